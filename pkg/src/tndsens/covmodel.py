"""Multinomial-logit model for the cell probabilities given covariates.

Cell probabilities at covariate ``c`` are a softmax over four linear
predictors with reference cell (0,0):

    g(beta, c) = softmax(0, c~' beta_10, c~' beta_01, c~' beta_11),  c~ = (1, c)

in canonical cell order. ``beta`` is stored as a ``(3, p + 1)`` array whose
rows belong to cells (1,0), (0,1), (1,1); flattened row by row it is the
parameter vector of length ``m = 3 (p + 1)``.
"""
from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy import stats

from .confidence import ConfidenceSet, _hull_bounds, ci_bounds_opt
from .core import ObservedTable, SensitivityParams, format_value
from .exceptions import DegenerateSet, InvalidInput, NonConverged
from .qcqp import SolverConfig, solve_bounds
from .sharp_bounds import BoundsInterval

log = logging.getLogger(__name__)

MAX_ITER = 100
GRAD_TOL = 1e-10
SEPARATION_RIDGE = 1e-8
# a linear predictor this large means a cell probability below 1e-13: the
# likelihood is still rising toward infinity, not at an interior optimum
SEPARATION_ETA = 30.0
ROUTES = ("box-hull", "exact-set")


@dataclass(frozen=True, eq=False)
class IndividualData:
    """Individual-level rows: covariates ``(n, p)``, exposure ``z`` and test result ``y``."""

    covariates: np.ndarray
    z: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.covariates, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        z = np.asarray(self.z, dtype=int)
        y = np.asarray(self.y, dtype=int)
        if c.ndim != 2 or z.shape != (c.shape[0],) or y.shape != (c.shape[0],):
            raise InvalidInput("covariates, z and y must have matching lengths")
        if not np.all(np.isfinite(c)):
            raise InvalidInput("covariates must be finite")
        if np.any((z != 0) & (z != 1)) or np.any((y != 0) & (y != 1)):
            raise InvalidInput("z and y must be 0 or 1")
        object.__setattr__(self, "covariates", c)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return int(self.z.size)

    @property
    def cell_index(self) -> np.ndarray:
        """Canonical cell index ``z + 2 y`` of each row."""
        return self.z + 2 * self.y

    def duplicated(self, times: int = 2) -> "IndividualData":
        return IndividualData(np.tile(self.covariates, (times, 1)), np.tile(self.z, times),
                              np.tile(self.y, times))


@dataclass(eq=False)
class ModelFit:
    """Fitted multinomial-logit model.

    ``sigma_hat`` is the inverse observed information, the covariance of
    ``beta_hat`` itself; ``asymptotic_cov = n * sigma_hat`` is the covariance
    of ``sqrt(n) (beta_hat - beta)``.
    """

    beta: np.ndarray
    sigma_hat: np.ndarray
    n: int
    loglik: float
    converged: bool
    iterations: int = 0
    grad_norm: float = math.nan
    ridge: float = 0.0
    loglik_path: List[float] = field(default_factory=list)

    @property
    def p(self) -> int:
        return self.beta.shape[1] - 1

    @property
    def m(self) -> int:
        return self.beta.size

    @property
    def asymptotic_cov(self) -> np.ndarray:
        return self.n * self.sigma_hat

    def to_dict(self) -> dict:
        return {
            "beta": {"10": self.beta[0].tolist(), "01": self.beta[1].tolist(), "11": self.beta[2].tolist()},
            "sigma_hat": self.sigma_hat.tolist(),
            "n": self.n,
            "loglik": self.loglik,
            "converged": self.converged,
            "iterations": self.iterations,
            "grad_norm": self.grad_norm,
            "ridge": self.ridge,
        }


def _design(c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.ndim == 0:
        c = c[None]
    if c.ndim == 1:
        return np.concatenate([[1.0], c])
    return np.column_stack([np.ones(c.shape[0]), c])


def _probs(beta, X):
    """Cell probabilities for design rows ``X`` (n, p+1); returns (n, 4)."""
    eta = np.zeros((X.shape[0], 4))
    eta[:, 1:] = X @ beta.T
    eta -= eta.max(axis=1, keepdims=True)
    e = np.exp(eta)
    return e / e.sum(axis=1, keepdims=True)


def _loglik(beta, X, idx):
    eta = np.zeros((X.shape[0], 4))
    eta[:, 1:] = X @ beta.T
    top = eta.max(axis=1)
    lse = top + np.log(np.exp(eta - top[:, None]).sum(axis=1))
    return float(np.sum(eta[np.arange(idx.size), idx] - lse))


def _grad_hess(beta, X, idx):
    G = _probs(beta, X)
    Y = np.zeros_like(G)
    Y[np.arange(idx.size), idx] = 1.0
    grad = ((Y - G)[:, 1:].T @ X).reshape(-1)
    g = G[:, 1:]
    # per-row diag(g) - g g' on the non-reference cells
    M = -np.einsum("ij,ik->ijk", g, g)
    M[:, [0, 1, 2], [0, 1, 2]] += g
    k = X.shape[1]
    info = np.einsum("ijk,il,im->jlkm", M, X, X).reshape(3 * k, 3 * k)
    return grad, info


def _newton(X, idx, beta0, ridge, max_iter, tol):
    beta = beta0.copy()
    n = idx.size

    def penalized(b):
        return _loglik(b, X, idx) - 0.5 * ridge * float(np.sum(b * b))

    ll = penalized(beta)
    path = [ll]
    grad_norm = math.inf
    for it in range(1, max_iter + 1):
        grad, info = _grad_hess(beta, X, idx)
        grad = grad - ridge * beta.reshape(-1)
        info = info + ridge * np.eye(info.shape[0])
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= tol * max(n, 1):
            return beta, ll, True, it - 1, grad_norm, path
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            return beta, ll, False, it, grad_norm, path
        if not np.all(np.isfinite(step)):
            return beta, ll, False, it, grad_norm, path
        t = 1.0
        while True:
            cand = beta + t * step.reshape(beta.shape)
            new = penalized(cand)
            if np.isfinite(new) and new >= ll - 1e-12 * abs(ll):
                break
            t /= 2
            if t < 1e-10:
                return beta, ll, False, it, grad_norm, path
        beta, ll = cand, max(new, ll)
        path.append(ll)
    grad, _ = _grad_hess(beta, X, idx)
    grad_norm = float(np.linalg.norm(grad - ridge * beta.reshape(-1)))
    return beta, ll, grad_norm <= tol * max(n, 1), max_iter, grad_norm, path


def fit_mnl(data: IndividualData, ridge: float = 0.0, max_iter: int = MAX_ITER,
            tol: float = GRAD_TOL) -> ModelFit:
    """Maximum-likelihood fit by Newton-Raphson with step-halving.

    Converged when the gradient norm drops below ``tol * n``. If the
    unpenalized fit fails (typically separation) it is retried once with a
    ``1e-8`` ridge and a warning.

    Raises
    ------
    NonConverged
        No convergence after ``max_iter`` iterations; the last iterate is
        attached as ``exc.result``.
    """
    if not isinstance(data, IndividualData):
        data = IndividualData(*data)
    idx = data.cell_index
    counts = np.bincount(idx, minlength=4)
    if np.any(counts == 0):
        raise InvalidInput(f"every cell needs at least one observation, got counts {counts.tolist()}")
    if data.covariates.size and np.max(np.abs(data.covariates)) > 1e3:
        warnings.warn("covariates exceed 1e3 in magnitude; the model assumes bounded covariates")
    X = _design(data.covariates)
    beta0 = np.zeros((3, X.shape[1]))
    # start the intercepts at the empirical log-odds against cell (0,0)
    beta0[:, 0] = np.log(counts[1:] / counts[0])
    beta, ll, ok, it, gn, path = _newton(X, idx, beta0, ridge, max_iter, tol)
    used = ridge
    separated = float(np.max(np.abs(X @ beta.T))) > SEPARATION_ETA
    if (not ok or separated) and ridge == 0.0:
        why = "separation detected" if ok else "Newton iterations failed"
        warnings.warn(f"{why} without a ridge; refitting with ridge 1e-8")
        used = SEPARATION_RIDGE
        beta, ll, ok, it, gn, path = _newton(X, idx, beta0, used, max_iter, tol)
    _, info = _grad_hess(beta, X, idx)
    info = info + used * np.eye(info.shape[0])
    try:
        sigma = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        sigma = np.linalg.pinv(info)
    sigma = (sigma + sigma.T) / 2
    fit = ModelFit(beta, sigma, data.n, _loglik(beta, X, idx), ok, it, gn, used, path)
    if not ok:
        raise NonConverged(f"Newton-Raphson stopped after {it} iterations (gradient norm {gn:.3g})", fit)
    return fit


def true_fit(beta, n: int = 1) -> ModelFit:
    """A ModelFit wrapper around known coefficients (zero covariance)."""
    beta = np.asarray(beta, dtype=float)
    if beta.ndim != 2 or beta.shape[0] != 3:
        raise InvalidInput("beta must have shape (3, p + 1)")
    m = beta.size
    return ModelFit(beta, np.zeros((m, m)), n, math.nan, True)


def predict_pi(fit: ModelFit, c) -> ObservedTable:
    """Cell probabilities at covariate value ``c`` in canonical order."""
    X = _design(c)[None, :]
    if X.shape[1] != fit.beta.shape[1]:
        raise InvalidInput(f"expected {fit.p} covariates, got {X.shape[1] - 1}")
    return ObservedTable(_probs(fit.beta, X)[0])


def jacobian_dc(fit: ModelFit, c) -> np.ndarray:
    """Derivative of the cell probabilities at ``c`` with respect to the flattened coefficients.

    Column ``j (p + 1) + l`` is ``M[:, j + 1] * c~[l]`` with
    ``M = diag(g) - g g'``.
    """
    x = _design(c)
    g = predict_pi(fit, c).cells
    M = np.diag(g) - np.outer(g, g)
    return np.einsum("ij,l->ijl", M[:, 1:], x).reshape(4, -1)


def simultaneous_set(fit: ModelFit, c, alpha: float = 0.05) -> ConfidenceSet:
    """Elliptical set ``{q : (g - q)' (D A D')^+ (g - q) <= chi2_{m, 1-alpha} / n}``.

    ``g`` and ``D`` are evaluated at the fitted coefficients and ``A`` is
    the asymptotic covariance ``n * sigma_hat``. The set is simultaneous
    over all ``c``.
    """
    if not fit.converged:
        raise InvalidInput("simultaneous sets need a converged fit")
    if not 0 < alpha < 1:
        raise InvalidInput("alpha must lie in (0, 1)")
    D = jacobian_dc(fit, c)
    A = D @ fit.asymptotic_cov @ D.T
    A = (A + A.T) / 2
    if not np.max(np.linalg.eigvalsh(A)) > 0:
        raise DegenerateSet("D A D' has rank zero")
    thr = float(stats.chi2.ppf(1 - alpha, fit.m))
    return ConfidenceSet("G", predict_pi(fit, c).cells, fit.n, alpha, matrix=A, threshold=thr, df=fit.m)


@dataclass
class BandRow:
    c: float
    point: BoundsInterval
    ci: BoundsInterval
    conf_set: Optional[ConfidenceSet] = None

    def to_dict(self) -> dict:
        return {"c": self.c, "lower": format_value(self.point.lower), "upper": format_value(self.point.upper),
                "ci_lower": format_value(self.ci.lower), "ci_upper": format_value(self.ci.upper)}


@dataclass
class BandResult:
    """Sensitivity bounds and simultaneous confidence bounds along a covariate grid."""

    grid: np.ndarray
    rows: List[BandRow]
    route: str
    params: SensitivityParams
    alpha: float

    def covers(self, truth: List[BoundsInterval], tol: float = 0.0) -> bool:
        """True when every confidence interval contains the matching true bounds."""
        return all(r.ci.lower <= t.lower * (1 + tol) and t.upper <= r.ci.upper * (1 + tol)
                   for r, t in zip(self.rows, truth))

    def write_csv(self, dest) -> None:
        write_band_csv(self, dest)


def band_bounds(fit: ModelFit, c_grid, alpha: float = 0.05, params=(0.1, 5.0, 2.0),
                route: str = "exact-set", cfg: Optional[SolverConfig] = None) -> BandResult:
    """Worst-case sensitivity bounds over the simultaneous set at each grid point.

    ``box-hull`` bounds each cell by the exact per-cell extent of the
    ellipse and applies the closed form (heterogeneity limit ignored, so it
    is conservative); ``exact-set`` optimizes jointly over the ellipse.
    """
    if route not in ROUTES:
        raise InvalidInput(f"route must be one of {ROUTES}")
    params = params if isinstance(params, SensitivityParams) else SensitivityParams(*params)
    grid = np.atleast_1d(np.asarray(c_grid, dtype=float))
    if grid.size == 0:
        raise InvalidInput("covariate grid is empty")
    rows = []
    for c in grid:
        cs = simultaneous_set(fit, c, alpha)
        point = solve_bounds(ObservedTable(cs.center), params, cfg)
        if route == "box-hull":
            ci = _hull_bounds(cs, params)
            ci = BoundsInterval(min(ci.lower, point.lower), max(ci.upper, point.upper),
                                params=params, method="box-hull")
        else:
            ci = ci_bounds_opt(None, cs=cs, params=params, cfg=cfg).interval
        rows.append(BandRow(float(c), point, ci, cs))
    return BandResult(grid, rows, route, params, alpha)


def true_band(beta, c_grid, params, cfg: Optional[SolverConfig] = None) -> List[BoundsInterval]:
    """Sharp sensitivity bounds at the true cell probabilities along a grid."""
    fit = true_fit(beta)
    params = params if isinstance(params, SensitivityParams) else SensitivityParams(*params)
    return [solve_bounds(predict_pi(fit, c), params, cfg) for c in np.atleast_1d(c_grid)]


# ---------------------------------------------------------------------------
# file formats


def read_individual_csv(source) -> IndividualData:
    """Read rows with header ``c1,...,cp,z,y``."""
    fh = source if hasattr(source, "read") else open(source, newline="")
    try:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[-2:] != ["z", "y"] or len(header) < 3:
            raise InvalidInput("individual CSV needs header c1,...,cp,z,y")
        expect = [f"c{i + 1}" for i in range(len(header) - 2)]
        if header[:-2] != expect:
            raise InvalidInput(f"covariate columns must be named {','.join(expect)}")
        rows = [r for r in reader if r]
    finally:
        if fh is not source:
            fh.close()
    if not rows:
        raise InvalidInput("individual CSV has no rows")
    try:
        arr = np.array(rows, dtype=float)
    except ValueError as exc:
        raise InvalidInput("individual CSV has non-numeric entries") from exc
    if np.any(arr[:, -2:] != np.round(arr[:, -2:])):
        raise InvalidInput("z and y must be integers")
    return IndividualData(arr[:, :-2], arr[:, -2].astype(int), arr[:, -1].astype(int))


def write_individual_csv(data: IndividualData, dest) -> None:
    p = data.covariates.shape[1]
    lines = [",".join([f"c{i + 1}" for i in range(p)] + ["z", "y"])]
    for c, z, y in zip(data.covariates, data.z, data.y):
        lines.append(",".join([repr(float(v)) for v in c] + [str(z), str(y)]))
    text = "\n".join(lines) + "\n"
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        with open(dest, "w", newline="") as fh:
            fh.write(text)


def write_band_csv(band: BandResult, dest) -> None:
    """Write ``c,lower,upper,ci_lower,ci_upper`` rows."""
    lines = ["c,lower,upper,ci_lower,ci_upper"]
    for r in band.rows:
        d = r.to_dict()
        lines.append(",".join(str(d[k]) if isinstance(d[k], str) else repr(float(d[k]))
                              for k in ("c", "lower", "upper", "ci_lower", "ci_upper")))
    text = "\n".join(lines) + "\n"
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        with open(dest, "w", newline="") as fh:
            fh.write(text)
