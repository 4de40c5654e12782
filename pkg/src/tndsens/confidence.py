"""Confidence sets for the cell probabilities and confidence bounds on the causal odds ratio.

Three set shapes are supported:

* ``Q``: elliptical, ``n (c - q)' A^+ (c - q) <= chi2_{df, 1-alpha}`` with
  ``A = diag(c) - c c'`` for a multinomial table.
* ``N``: per-cell studentized margins ``c +- d * sqrt(c (1 - c) / n)``.
* ``T``: per-cell arcsine margins ``asin(2c - 1) +- d / sqrt(n)``.

``d`` is a common critical value, the ``1 - alpha`` quantile of the largest
absolute coordinate of a Gaussian vector with the estimated correlation of
the four cells.

Confidence bounds on the odds ratio take the worst case of the sensitivity
bounds over every table in the set, either in closed form (rectangular sets,
no heterogeneity limit) or by optimization.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize, stats
from scipy.stats import qmc

from .core import OR_SIGNS, ObservedTable, SensitivityParams, observed_or, odds_ratio, validate_table
from .exceptions import BoundaryCell, InvalidCovariance, InvalidInput, UndefinedOddsRatio
from .qcqp import SolverConfig, _polish, _rho_from_p0, is_feasible, make_point, solve_bounds
from .sharp_bounds import BoundsInterval, CellBox, box_bounds, cell_box

log = logging.getLogger(__name__)

SHAPES = ("Q", "N", "T")
# "G" marks the covariate-model ellipse, which shares the shape-Q machinery
ELLIPTICAL = ("Q", "G")
PINV_RTOL = 1e-12
DEFAULT_DRAWS = 10**6
_PI_FLOOR = 1e-10


def _pinv_psd(a):
    """Pseudoinverse of a symmetric PSD matrix plus an orthonormal null-space basis."""
    lam, vec = np.linalg.eigh(a)
    top = lam.max() if lam.size else 0.0
    keep = lam > PINV_RTOL * top if top > 0 else np.zeros_like(lam, dtype=bool)
    inv = (vec[:, keep] / lam[keep]) @ vec[:, keep].T
    return inv, vec[:, ~keep], lam[keep], vec[:, keep]


@dataclass(eq=False)
class ConfidenceSet:
    """A confidence set for the four cell probabilities.

    For shape ``Q`` the set is ``{q : n (c - q)' A^+ (c - q) <= threshold,
    q - c in range(A)}``; ``matrix`` holds ``A``. For ``N`` and ``T`` it is
    the box ``lower <= q <= upper`` intersected with the simplex.
    """

    shape: str
    center: np.ndarray
    n: int
    alpha: float
    matrix: Optional[np.ndarray] = None
    threshold: Optional[float] = None
    df: Optional[int] = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    d_hat: Optional[float] = None
    pinv: Optional[np.ndarray] = field(default=None, repr=False)
    null_basis: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        if self.shape in ELLIPTICAL:
            self.matrix = np.asarray(self.matrix, dtype=float)
            self.pinv, self.null_basis, _, _ = _pinv_psd(self.matrix)

    @property
    def elliptical(self) -> bool:
        return self.shape in ELLIPTICAL

    def quad_form(self, q) -> float:
        """``n (c - q)' A^+ (c - q)``; only defined for elliptical sets."""
        if not self.elliptical:
            raise InvalidInput("quadratic form is only defined for elliptical sets")
        x = self.center - np.asarray(q, dtype=float)
        return float(self.n * x @ self.pinv @ x)

    def contains(self, q, tol: float = 1e-9) -> bool:
        q = np.asarray(q, dtype=float)
        if abs(q.sum() - 1.0) > tol or np.any(q < -tol):
            return False
        if self.elliptical:
            off = self.null_basis.T @ (q - self.center) if self.null_basis.size else np.zeros(0)
            return bool(np.all(np.abs(off) <= tol) and self.quad_form(q) <= self.threshold * (1 + tol) + tol)
        return bool(np.all(q >= self.lower - tol) and np.all(q <= self.upper + tol))

    def hull(self):
        """Per-cell ``(lower, upper)`` limits of the set, clipped to ``[0, 1]``.

        Exact for elliptical sets: the support of the ellipse along a unit
        cell direction is ``sqrt(threshold * A_kk / n)``.
        """
        if self.elliptical:
            half = np.sqrt(np.clip(np.diag(self.matrix), 0.0, None) * self.threshold / self.n)
            return np.clip(self.center - half, 0.0, 1.0), np.clip(self.center + half, 0.0, 1.0)
        return self.lower.copy(), self.upper.copy()

    def sample(self, k: int, rng: np.random.Generator, boundary: bool = True) -> np.ndarray:
        """Up to ``k`` points of the set, on its boundary when ``boundary`` is set.

        Elliptical sets map sphere points through ``A^{1/2}`` within the
        range of ``A``; rectangular sets draw the free cells uniformly and
        keep draws whose closing cell lands in range, then push them to a
        box face when ``boundary`` is set.
        """
        if self.elliptical:
            _, _, lam, vec = _pinv_psd(self.matrix)
            u = rng.standard_normal((k, lam.size))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            if not boundary:
                u *= rng.uniform(size=(k, 1)) ** (1.0 / max(lam.size, 1))
            x = (u * np.sqrt(lam * self.threshold / self.n)) @ vec.T
            pts = self.center + x
        else:
            lo, hi = self.lower, self.upper
            pts = np.empty((0, 4))
            for _ in range(50):
                g = rng.uniform(lo[:3], hi[:3], size=(4 * k, 3))
                last = 1.0 - g.sum(axis=1)
                ok = (last >= lo[3]) & (last <= hi[3])
                pts = np.vstack([pts, np.column_stack([g[ok], last[ok]])])
                if pts.shape[0] >= k:
                    break
            pts = pts[:k]
            if boundary and pts.shape[0]:
                pts = np.array([_push_to_face(p, lo, hi, rng) for p in pts])
        return pts[np.all(pts >= 0, axis=1)]


def _push_to_face(p, lo, hi, rng):
    """Move ``p`` along a random zero-sum direction until a box face is hit."""
    d = rng.standard_normal(4)
    d -= d.mean()
    with np.errstate(divide="ignore", invalid="ignore"):
        steps = np.where(d > 0, (hi - p) / d, np.where(d < 0, (lo - p) / d, np.inf))
    return p + d * float(np.min(steps))


@dataclass
class CiBoundsResult:
    """Confidence interval for the causal odds ratio under the sensitivity limits."""

    interval: BoundsInterval
    set_shape: str
    params: SensitivityParams
    alpha: float
    conf_set: Optional[ConfidenceSet] = None
    point: Optional[BoundsInterval] = None

    @property
    def lower(self) -> float:
        return self.interval.lower

    @property
    def upper(self) -> float:
        return self.interval.upper

    def to_dict(self) -> dict:
        out = self.interval.to_dict()
        out["alpha"] = self.alpha
        out["shape"] = self.set_shape
        out["n"] = self.conf_set.n if self.conf_set is not None else None
        return out


def simultaneous_level(alpha: float, k: int) -> float:
    """Per-stratum alpha giving joint coverage ``1 - alpha`` over ``k`` independent strata."""
    if not 0 < alpha < 1:
        raise InvalidInput("alpha must lie in (0, 1)")
    if int(k) != k or k < 1:
        raise InvalidInput("stratum count must be a positive integer")
    return 1.0 - (1.0 - alpha) ** (1.0 / k)


def cell_correlation(pi) -> np.ndarray:
    """Asymptotic correlation of the four studentized cell proportions."""
    pi = np.asarray(pi, dtype=float)
    r = np.sqrt(pi / (1 - pi))
    omega = -np.outer(r, r)
    np.fill_diagonal(omega, 1.0)
    return omega


def max_abs_gauss_quantile(omega, alpha: float, draws: int = DEFAULT_DRAWS, seed: int = 0) -> float:
    """Monte Carlo ``1 - alpha`` quantile of ``max_i |x_i|`` for ``x ~ N(0, omega)``.

    Parameters
    ----------
    omega : (k, k) array
        Symmetric, unit diagonal, positive semidefinite within 1e-8.
    alpha : float
        In ``(0, 1)``.
    draws : int
        Number of Gaussian draws.
    seed : int
        Seed for ``numpy.random.default_rng``; the result is deterministic given it.
    """
    omega = np.asarray(omega, dtype=float)
    if omega.ndim != 2 or omega.shape[0] != omega.shape[1]:
        raise InvalidCovariance("omega must be a square matrix")
    if not np.allclose(omega, omega.T, atol=1e-10):
        raise InvalidCovariance("omega must be symmetric")
    if not np.allclose(np.diag(omega), 1.0, atol=1e-10):
        raise InvalidCovariance("omega must have a unit diagonal")
    lam, vec = np.linalg.eigh(omega)
    if lam.min() < -1e-8:
        raise InvalidCovariance(f"omega is not positive semidefinite (eigenvalue {lam.min():.3g})")
    if not 0 < alpha < 1:
        raise InvalidInput("alpha must lie in (0, 1)")
    if draws < 1:
        raise InvalidInput("draws must be positive")
    root = vec * np.sqrt(np.clip(lam, 0.0, None))
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((int(draws), omega.shape[0])) @ root.T
    return float(np.quantile(np.max(np.abs(z), axis=1), 1 - alpha))


def _as_counts(counts) -> ObservedTable:
    if isinstance(counts, ObservedTable):
        if counts.counts is None:
            raise InvalidInput("confidence sets need a table with counts")
        return counts
    return validate_table(counts, as_counts=True)


def conf_set(counts, alpha: float = 0.05, shape: str = "Q", mc_draws: int = DEFAULT_DRAWS,
             seed: int = 0) -> ConfidenceSet:
    """Asymptotic ``1 - alpha`` confidence set for the cell probabilities of a count table.

    Parameters
    ----------
    counts : four integers or ObservedTable with counts
    alpha : float
    shape : {"Q", "N", "T"}
    mc_draws, seed
        Monte Carlo settings for the critical value of ``N`` and ``T``.
    """
    if shape not in SHAPES:
        raise InvalidInput(f"shape must be one of {SHAPES}, got {shape!r}")
    if not 0 < alpha < 1:
        raise InvalidInput("alpha must lie in (0, 1)")
    try:
        t = _as_counts(counts)
    except Exception as exc:
        if "all cells are zero" in str(exc):
            raise InvalidInput("a confidence set needs n >= 1") from exc
        raise
    pi, n = t.cells, t.n
    if shape == "Q":
        sigma = np.diag(pi) - np.outer(pi, pi)
        return ConfidenceSet("Q", pi.copy(), n, alpha, matrix=sigma,
                             threshold=float(stats.chi2.ppf(1 - alpha, 3)), df=3)
    if np.any(pi <= 0) or np.any(pi >= 1):
        raise BoundaryCell(f"shape {shape} needs every cell proportion strictly inside (0, 1)")
    d = max_abs_gauss_quantile(cell_correlation(pi), alpha, mc_draws, seed)
    if shape == "N":
        half = d * np.sqrt(pi * (1 - pi) / n)
        lo, hi = np.clip(pi - half, 0.0, 1.0), np.clip(pi + half, 0.0, 1.0)
    else:
        a = np.arcsin(2 * pi - 1)
        lim = math.pi / 2
        lo = (np.sin(np.clip(a - d / math.sqrt(n), -lim, lim)) + 1) / 2
        hi = (np.sin(np.clip(a + d / math.sqrt(n), -lim, lim)) + 1) / 2
    return ConfidenceSet(shape, pi.copy(), n, alpha, lower=lo, upper=hi, d_hat=d)


def _params(params) -> SensitivityParams:
    if isinstance(params, SensitivityParams):
        return params
    return SensitivityParams(*params)


def _hull_bounds(cs: ConfidenceSet, params: SensitivityParams) -> BoundsInterval:
    """Closed-form confidence bounds from per-cell set limits (ignores xi)."""
    lo, hi = cs.hull()
    box = CellBox(cell_box(lo, params.delta, params.gamma).lower,
                  cell_box(hi, params.delta, params.gamma).upper)
    out = box_bounds(box)
    out.params = params
    return out


def ci_bounds_closed(counts, alpha: float = 0.05, params=(0.0, 1.0), shape: str = "N",
                     mc_draws: int = DEFAULT_DRAWS, seed: int = 0) -> CiBoundsResult:
    """Closed-form confidence bounds from a rectangular confidence set.

    Each cell limit of the set is mapped through the cell-box formulas
    (lower set limit into the lower cell limit, upper into upper) and the
    box minimizer gives the lower bound, the exposure-swapped box the upper.
    A finite ``xi`` is not used; the interval stays valid but conservative.
    """
    if shape in ELLIPTICAL:
        raise InvalidInput("closed-form confidence bounds need a rectangular set (N or T); "
                           "use ci_bounds_opt for the elliptical set Q")
    params = _params(params)
    cs = conf_set(counts, alpha, shape, mc_draws, seed)
    out = _hull_bounds(cs, params)
    out.method = "closed-form-ci"
    return CiBoundsResult(out, shape, params, alpha, conf_set=cs)


# ---------------------------------------------------------------------------
# optimization over the set


class _SetChart:
    """Coordinates ``z`` for the set with ``q = center + J z``.

    Elliptical sets use ``z`` in the unit ball of the range of ``A``, so the
    sum of ``q`` is fixed and steps stay bounded; rectangular sets use
    ``z = q - center`` with a sum-to-zero equality.
    """

    def __init__(self, cs: ConfidenceSet):
        self.center = cs.center
        if cs.elliptical:
            _, _, lam, vec = _pinv_psd(cs.matrix)
            self.jac = vec * np.sqrt(lam * cs.threshold / cs.n)
            self.dim = lam.size
            self.bounds = [(-1.0, 1.0)] * self.dim
            self.ball = True
        else:
            self.jac = np.eye(4)
            self.dim = 4
            self.bounds = [(max(lo, _PI_FLOOR) - c, max(hi, _PI_FLOOR) - c)
                           for lo, hi, c in zip(cs.lower, cs.upper, cs.center)]
            self.ball = False

    def q(self, z):
        return self.center + self.jac @ z

    def constraints(self, dim):
        """SLSQP constraints on ``x`` whose first ``self.dim`` entries are ``z``."""
        k = self.dim

        def embed(g):
            full = np.zeros(dim)
            full[:k] = g
            return full

        if self.ball:
            cons = [{"type": "ineq", "fun": lambda x: 1.0 - x[:k] @ x[:k],
                     "jac": lambda x: embed(-2 * x[:k])},
                    {"type": "ineq", "fun": lambda x: self.q(x[:k]) - _PI_FLOOR,
                     "jac": lambda x: np.hstack([self.jac, np.zeros((4, dim - k))])}]
        else:
            cons = [{"type": "eq", "fun": lambda x: x[:k].sum(), "jac": lambda x: embed(np.ones(k))}]
        return cons


def _minimize(fun, x0, bounds, cons, maxiter):
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return optimize.minimize(fun, np.clip(x0, lo, hi), jac=True, method="SLSQP", bounds=bounds,
                                 constraints=cons, options={"maxiter": maxiter, "ftol": 1e-14})


def _joint_parts(q, w, rho):
    e = np.exp(-rho)
    return e, 1 - w + w * e


def _search_over_set(cs, params, cfg, warm):
    """Multistart SLSQP over ``(z, w, rho)`` with ``q(z)`` in the set."""
    delta, L = params.delta, math.log(params.gamma)
    ch = _SetChart(cs)
    k = ch.dim
    dim = k + 5
    J = ch.jac

    def objective(x, sign):
        q = ch.q(x[:k])
        w, rho = x[k], x[k + 1:]
        e, den = _joint_parts(q, w, rho)
        f = np.dot(OR_SIGNS, np.log(q)) - np.dot(OR_SIGNS, np.log(den))
        g = np.empty(dim)
        g[:k] = J.T @ (OR_SIGNS / q)
        g[k] = -np.dot(OR_SIGNS, (e - 1) / den)
        g[k + 1:] = OR_SIGNS * w * e / den
        return sign * f, sign * g

    def total(x):
        q = ch.q(x[:k])
        e, den = _joint_parts(q, x[k], x[k + 1:])
        return np.sum(q * (1 - e) / den)

    def total_jac(x):
        q = ch.q(x[:k])
        e, den = _joint_parts(q, x[k], x[k + 1:])
        g = np.empty(dim)
        g[:k] = J.T @ ((1 - e) / den)
        g[k] = np.sum(q * (1 - e) ** 2 / den**2)
        g[k + 1:] = q * e / den**2
        return g

    cons = ch.constraints(dim) + [{"type": "eq", "fun": total, "jac": total_jac}]
    if not math.isinf(params.xi):
        lx = math.log(params.xi)
        cons.append({"type": "ineq", "fun": lambda x: lx - np.dot(OR_SIGNS, x[k + 1:]),
                     "jac": lambda x: np.concatenate([np.zeros(k + 1), -OR_SIGNS])})
        cons.append({"type": "ineq", "fun": lambda x: lx + np.dot(OR_SIGNS, x[k + 1:]),
                     "jac": lambda x: np.concatenate([np.zeros(k + 1), OR_SIGNS])})
    bounds = ch.bounds + [(0.0, delta)] + [(-L, L)] * 4

    starts = [np.concatenate([np.zeros(k), x]) for x in warm]
    n_random = max(cfg.starts - len(starts), 0)
    if n_random:
        u = qmc.LatinHypercube(d=5, seed=cfg.seed).random(n_random)
        for row in u:
            starts.append(np.concatenate([np.zeros(k), [delta * (0.25 + 0.75 * row[0])],
                                          -L + 2 * L * row[1:]]))

    found = {}
    for side, sign in (("lower", 1.0), ("upper", -1.0)):
        best = None
        for x0 in starts:
            res = _minimize(lambda x: objective(x, sign), x0, bounds, cons, cfg.maxiter)
            q = np.clip(ch.q(res.x[:k]), _PI_FLOOR, None)
            q = q / q.sum()
            w = float(np.clip(res.x[k], 0.0, delta))
            if w <= 0 or not cs.contains(q, tol=cfg.search_tol):
                continue
            pt = make_point(q, w, _polish(q, w, res.x[k + 1:]))
            ok, _ = is_feasible(pt, ObservedTable(q), params, tol=cfg.search_tol)
            if not ok:
                continue
            val = pt.objective
            if best is None or sign * val < sign * best[0]:
                best = (val, q, pt)
        found[side] = best
    return found


def _extreme_or_over_set(cs, cfg, shift=None, delta=0.0):
    """Min and max over the set of the odds ratio after removing ``delta`` from one cell.

    ``shift`` is the cell index losing mass, or None for the plain odds ratio.
    Returns ``(min, max)``; infeasible searches give ``(inf, -inf)``.
    """
    ch = _SetChart(cs)
    k = ch.dim
    cons = ch.constraints(k)
    if shift is not None:
        cons.append({"type": "ineq",
                     "fun": lambda z: ch.q(z)[shift] - delta - _PI_FLOOR,
                     "jac": lambda z: ch.jac[shift]})
    off = np.zeros(4)
    if shift is not None:
        off[shift] = delta

    def fun(z, sign):
        v = ch.q(z) - off
        return sign * np.dot(OR_SIGNS, np.log(v)), sign * ch.jac.T @ (OR_SIGNS / v)

    out = []
    for sign in (1.0, -1.0):
        res = _minimize(lambda z: fun(z, sign), np.zeros(k), ch.bounds, cons, cfg.maxiter)
        q = ch.q(res.x)
        v = q - off
        good = cs.contains(q, cfg.search_tol) and np.all(v > 0)
        out.append(odds_ratio(v) if good else sign * math.inf)
    return out[0], out[1]


def _delta_only_over_set(cs, delta, cfg):
    """Worst case of the delta-only bounds over the set (no strength limit)."""
    lo, hi = cs.hull()
    # smallest value each cell reaches on the set within the simplex
    reach = np.maximum(lo, 1.0 - (hi.sum() - hi))
    if reach[3] <= delta or reach[0] <= delta:
        lower = 0.0
    else:
        lower = min(_extreme_or_over_set(cs, cfg, k, delta)[0] for k in (3, 0))
    if reach[1] <= delta or reach[2] <= delta:
        upper = math.inf
    else:
        # removing mass from a denominator cell raises the odds ratio
        upper = max(_extreme_or_over_set(cs, cfg, k, delta)[1] for k in (1, 2))
    return lower, upper


def ci_bounds_opt(counts, alpha: float = 0.05, params=(0.0, 1.0, math.inf), shape: str = "Q",
                  cfg: Optional[SolverConfig] = None, mc_draws: int = DEFAULT_DRAWS, seed: int = 0,
                  cs: Optional[ConfidenceSet] = None) -> CiBoundsResult:
    """Confidence bounds by optimizing the sensitivity program jointly over the set.

    The cell probabilities become four extra variables restricted to the
    confidence set. The result always contains the sensitivity bounds at the
    set center and never exceeds the closed-form bounds over the set's
    per-cell hull. Pass ``cs`` to reuse a prebuilt set (any shape, including
    the covariate-model ellipse); ``counts``, ``alpha`` and ``shape`` are then
    taken from it.
    """
    cfg = cfg or SolverConfig()
    params = _params(params)
    if cs is None:
        cs = conf_set(counts, alpha, shape, mc_draws, seed)
    center = ObservedTable(cs.center / cs.center.sum())
    if not center.positive:
        raise UndefinedOddsRatio("confidence bounds need all four cells positive")
    point = solve_bounds(center, params, cfg)
    outer = _hull_bounds(cs, params)
    converged = True
    lo, hi = point.lower, point.upper
    lo_q, hi_q = point.lower_witness, point.upper_witness

    if params.delta == 0.0 or params.gamma == 1.0:
        # the sensitivity slack vanishes: optimize the odds ratio of q itself
        a, b = _extreme_or_over_set(cs, cfg)
        lo, hi = min(lo, a), max(hi, b)
    elif math.isinf(params.gamma):
        a, b = _delta_only_over_set(cs, params.delta, cfg)
        lo, hi = min(lo, a), max(hi, b)
    else:
        L = math.log(params.gamma)
        warm = []
        for key in ("lower_point", "upper_point"):
            d = point.extra.get(key)
            if d and d["w"] > 0:
                warm.append(np.concatenate([[d["w"]],
                                            _rho_from_p0(cs.center, d["w"], np.array(d["p0"]), L)]))
        found = _search_over_set(cs, params, cfg, warm)
        if found["lower"] is None or found["upper"] is None:
            converged = False
        if found["lower"] is not None and found["lower"][0] < lo:
            lo, lo_q = found["lower"][0], found["lower"][2].decomposition.p0
        if found["upper"] is not None and found["upper"][0] > hi:
            hi, hi_q = found["upper"][0], found["upper"][2].decomposition.p0
    lo = max(lo, outer.lower)
    hi = min(hi, outer.upper)
    interval = BoundsInterval(lo, hi, lo_q, hi_q, params=params, method="qcqp-ci", converged=converged)
    return CiBoundsResult(interval, cs.shape, params, cs.alpha, conf_set=cs, point=point)


def ci_bounds_oracle(cs: ConfidenceSet, params, samples: int = 1000, seed: int = 0,
                     cfg: Optional[SolverConfig] = None) -> BoundsInterval:
    """Inner approximation of the confidence bounds from sampled set points.

    Evaluates the sensitivity bounds at the center and at ``samples`` set
    points (boundary and interior) and returns their envelope.
    """
    params = _params(params)
    rng = np.random.default_rng(seed)
    pts = np.vstack([cs.center[None, :], cs.sample(samples // 2, rng, boundary=True),
                     cs.sample(samples - samples // 2, rng, boundary=False)])
    lo, hi = math.inf, -math.inf
    for q in pts:
        if np.any(q <= 0):
            continue
        b = solve_bounds(ObservedTable(q / q.sum()), params, cfg)
        lo, hi = min(lo, b.lower), max(hi, b.upper)
    return BoundsInterval(lo, hi, params=params, method="oracle-ci")


def wald_or_interval(t: ObservedTable, alpha: float = 0.05):
    """Wald interval for the observed odds ratio on the log scale.

    The asymptotic variance of ``log OR`` is ``sum(1 / count)``.
    """
    if t.counts is None:
        raise InvalidInput("the Wald interval needs counts")
    point = observed_or(t)
    se = math.sqrt(sum(1.0 / c for c in t.counts))
    z = float(stats.norm.ppf(1 - alpha / 2))
    return point * math.exp(-z * se), point * math.exp(z * se)
