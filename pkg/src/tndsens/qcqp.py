"""Bounds under all three sensitivity constraints via nonconvex optimization.

The hidden structure is a mixture ``pi = (1 - w) p0 + w p1`` with

* ``0 <= w <= delta``
* ``1/gamma <= p0 / p1 <= gamma`` cellwise
* ``1/xi <= OR(p0) / OR(p1) <= xi``

and the objective is ``OR(p0)``. No closed form exists once ``xi`` binds.

The local search works in log-ratio coordinates ``rho = log(p0 / p1)``:
for fixed ``(w, rho)`` the level-zero cells are ``p0 = pi / (1 - w + w e^-rho)``,
the gamma constraint is a box on ``rho``, the xi constraint is linear in
``rho`` and summing to one is a single smooth equality that stays regular as
``w -> 0``. :func:`oracle_bounds` is an independent grid scan in the
original ``(w, p0)`` coordinates.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from .core import OR_SIGNS, ObservedTable, SensitivityParams, observed_or, odds_ratio
from .exceptions import InvalidInput, UndefinedOddsRatio
from .sharp_bounds import BoundsInterval, HiddenDecomposition, bounds_delta, bounds_delta_gamma

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    starts: int = 8
    grid_step: float = 0.01
    refine_rounds: int = 4
    tol: float = 1e-9
    seed: int = 0
    search_tol: float = 1e-6
    maxiter: int = 300

    def __post_init__(self):
        if self.starts < 1:
            raise InvalidInput("starts must be >= 1")
        if not 0 < self.grid_step <= 0.1:
            raise InvalidInput("grid_step must lie in (0, 0.1]")
        if not self.tol > 0:
            raise InvalidInput("tol must be positive")


@dataclass(frozen=True, eq=False)
class FeasiblePoint:
    """A hidden decomposition together with its derived ratios."""

    decomposition: HiddenDecomposition
    ratios: np.ndarray
    heterogeneity: float

    @property
    def objective(self) -> float:
        return odds_ratio(self.decomposition.p0)

    def to_dict(self) -> dict:
        out = self.decomposition.to_dict()
        out["ratios"] = [float(r) for r in self.ratios]
        out["heterogeneity"] = float(self.heterogeneity)
        return out


def _safe_ratio(a, b):
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(b > 0, a / np.where(b > 0, b, 1.0), np.where(a > 0, np.inf, 1.0))
    return r


def make_point(t, w: float, p0) -> FeasiblePoint:
    """Complete ``(w, p0)`` into a :class:`FeasiblePoint` using the mixture identity."""
    pi = t.cells if isinstance(t, ObservedTable) else np.asarray(t, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    w = float(w)
    if w > 0:
        p1 = (pi - (1 - w) * p0) / w
    else:
        p1 = pi.copy()
    ratios = _safe_ratio(p0, p1)
    het = _safe_ratio(np.array([odds_ratio(p0)]), np.array([odds_ratio(p1)]))[0]
    return FeasiblePoint(HiddenDecomposition(w, p0, p1), ratios, float(het))


def is_feasible(pt: FeasiblePoint, t: ObservedTable, params: SensitivityParams,
                tol: float = 1e-9) -> Tuple[bool, List[dict]]:
    """Check a point against every constraint.

    Returns ``(ok, report)``; each report entry names a violated constraint
    and its excess. Ratio-type constraints report the excess on the ratio
    scale, e.g. a heterogeneity of 2.5 under ``xi = 2`` has excess 0.5.
    """
    d = pt.decomposition
    pi = t.cells
    p0, p1, w = np.asarray(d.p0), np.asarray(d.p1), d.w
    report = []

    def check(name, excess, **info):
        if excess > tol:
            report.append({"constraint": name, "excess": float(excess), **info})

    check("mixture", float(np.max(np.abs(pi - (1 - w) * p0 - w * p1))))
    check("p0_sum", abs(p0.sum() - 1.0))
    check("p1_sum", abs(p1.sum() - 1.0))
    check("p0_range", float(max(-p0.min(), p0.max() - 1.0)))
    check("p1_range", float(max(-p1.min(), p1.max() - 1.0)))
    check("share", max(w - params.delta, -w))
    if not math.isinf(params.gamma):
        for k, r in enumerate(pt.ratios):
            check("gamma", max(r - params.gamma, 1.0 / params.gamma - r), cell=k)
    if not math.isinf(params.xi):
        h = pt.heterogeneity
        if math.isnan(h):
            check("xi", math.inf)
        else:
            check("xi", max(h - params.xi, 1.0 / params.xi - h))
    return (not report), report


# ---------------------------------------------------------------------------
# local search in (w, rho)


def _p0_from(pi, w, rho):
    return pi / (1 - w + w * np.exp(-rho))


def _objective(x, sign):
    w, rho = x[0], x[1:]
    e = np.exp(-rho)
    den = 1 - w + w * e
    f = -np.dot(OR_SIGNS, np.log(den))
    g = np.empty(5)
    g[0] = -np.dot(OR_SIGNS, (e - 1) / den)
    g[1:] = OR_SIGNS * w * e / den
    return sign * f, sign * g


def _sum_constraint(x, pi):
    w, rho = x[0], x[1:]
    e = np.exp(-rho)
    den = 1 - w + w * e
    return np.sum(pi * (1 - e) / den)


def _sum_constraint_jac(x, pi):
    w, rho = x[0], x[1:]
    e = np.exp(-rho)
    den = 1 - w + w * e
    g = np.empty(5)
    g[0] = np.sum(pi * (1 - e) ** 2 / den**2)
    g[1:] = pi * e / den**2
    return g


def _rho_from_p0(pi, w, p0, L):
    p1 = (pi - (1 - w) * p0) / w
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.log(p0 / p1)
    return np.clip(np.nan_to_num(rho, nan=0.0, posinf=L, neginf=-L), -L, L)


def _polish(pi, w, rho):
    """Map a search iterate to a witness whose cells sum to one exactly."""
    p0 = _p0_from(pi, w, rho)
    p0 = p0 / p0.sum()
    return p0


def _search(pi, params: SensitivityParams, cfg: SolverConfig, warm: List[np.ndarray]):
    """Multistart SLSQP for min and max of log OR(p0). Returns per-side best points."""
    delta, L = params.delta, math.log(params.gamma)
    log_xi = math.log(params.xi) if not math.isinf(params.xi) else None
    bounds = [(0.0, delta)] + [(-L, L)] * 4
    cons = [{"type": "eq", "fun": _sum_constraint, "jac": _sum_constraint_jac, "args": (pi,)}]
    if log_xi is not None:
        cons.append({"type": "ineq", "fun": lambda x: log_xi - np.dot(OR_SIGNS, x[1:]),
                     "jac": lambda x: np.concatenate([[0.0], -OR_SIGNS])})
        cons.append({"type": "ineq", "fun": lambda x: log_xi + np.dot(OR_SIGNS, x[1:]),
                     "jac": lambda x: np.concatenate([[0.0], OR_SIGNS])})

    starts = list(warm)
    n_random = max(cfg.starts - len(starts), 0)
    if n_random:
        sampler = qmc.LatinHypercube(d=5, seed=cfg.seed)
        u = sampler.random(n_random)
        for row in u:
            x = np.empty(5)
            x[0] = delta * (0.25 + 0.75 * row[0])
            x[1:] = -L + 2 * L * row[1:]
            if log_xi is not None:
                s = np.dot(OR_SIGNS, x[1:])
                if abs(s) > log_xi:
                    x[1:] -= OR_SIGNS * (s - math.copysign(log_xi, s)) / 4
            starts.append(x)

    results = {}
    for side, sign in (("lower", 1.0), ("upper", -1.0)):
        best = None
        n_ok = 0
        for x0 in starts:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                res = optimize.minimize(
                    _objective, np.clip(x0, [b[0] for b in bounds], [b[1] for b in bounds]),
                    args=(sign,), jac=True, method="SLSQP", bounds=bounds, constraints=cons,
                    options={"maxiter": cfg.maxiter, "ftol": 1e-14},
                )
            x = res.x
            w = float(np.clip(x[0], 0.0, delta))
            if w <= 0:
                continue
            p0 = _polish(pi, w, x[1:])
            pt = make_point(pi, w, p0)
            ok, _ = is_feasible(pt, ObservedTable(pi), params, tol=cfg.search_tol)
            if not ok:
                continue
            n_ok += 1
            val = math.log(pt.objective)
            if best is None or sign * val < sign * best[0] - 1e-15:
                best = (val, pt)
        results[side] = (best, n_ok)
    return results


def solve_bounds(t: ObservedTable, params: SensitivityParams,
                 cfg: Optional[SolverConfig] = None) -> BoundsInterval:
    """Sharp bounds on the causal odds ratio under (delta, gamma, xi).

    ``gamma = inf`` is routed to :func:`bounds_delta`: without a strength
    limit the heterogeneity limit cannot narrow the bounds. The returned
    interval always contains the observed odds ratio (the ``w = 0``
    decomposition) and never exceeds the (delta, gamma) closed form.
    Witness decompositions are stored under ``extra``.
    """
    cfg = cfg or SolverConfig()
    if not t.positive:
        raise UndefinedOddsRatio("sensitivity bounds need all four cells positive")
    pi = t.cells
    point = observed_or(t)
    if math.isinf(params.gamma):
        out = bounds_delta(t, params.delta)
        out.params = params
        out.method = "qcqp"
        return out
    if params.delta == 0.0 or params.gamma == 1.0:
        pt = make_point(pi, 0.0, pi)
        return BoundsInterval(point, point, pi.copy(), pi.copy(), params=params, method="qcqp",
                              extra={"lower_point": pt.to_dict(), "upper_point": pt.to_dict()})

    closed = bounds_delta_gamma(t, params.delta, params.gamma)
    L = math.log(params.gamma)
    warm = []
    for q in (closed.lower_witness, closed.upper_witness):
        warm.append(np.concatenate([[params.delta], _rho_from_p0(pi, params.delta, q, L)]))
    warm.append(np.concatenate([[params.delta / 2], np.zeros(4)]))
    found = _search(pi, params, cfg, warm)

    base = make_point(pi, 0.0, pi)
    sides = {}
    converged = True
    for side in ("lower", "upper"):
        best, n_ok = found[side]
        if n_ok == 0:
            converged = False
        pt = base
        if best is not None:
            val = best[1].objective
            if (side == "lower" and val < point) or (side == "upper" and val > point):
                pt = best[1]
        sides[side] = pt

    lo = min(sides["lower"].objective, point)
    hi = max(sides["upper"].objective, point)
    # feasible points cannot leave the closed-form interval; trim rounding
    lo = max(lo, closed.lower)
    hi = min(hi, closed.upper)
    return BoundsInterval(
        lo, hi, np.asarray(sides["lower"].decomposition.p0), np.asarray(sides["upper"].decomposition.p0),
        params=params, method="qcqp", converged=converged,
        extra={"lower_point": sides["lower"].to_dict(), "upper_point": sides["upper"].to_dict()},
    )


# ---------------------------------------------------------------------------
# brute-force oracle


def _slice_box(pi, w, gamma):
    """Per-cell range of ``p0`` allowed by the ratio and nonnegativity limits at share ``w``."""
    if w >= 1:
        return np.zeros(4), np.ones(4)
    hi = np.minimum(pi / (1 - w), 1.0)
    if math.isinf(gamma):
        return np.zeros(4), hi
    lo = pi / (1 + (gamma - 1) * w)
    hi = np.minimum(hi, gamma * pi / (gamma - (gamma - 1) * w))
    return lo, hi


def _axis(a, b, step, min_points):
    if b <= a:
        return np.array([a])
    return np.linspace(a, b, min(max(int(math.ceil((b - a) / step)) + 1, min_points), 400))


def _eval(pi, params, w, P0, tol):
    """Odds ratios of the feasible rows of ``P0`` at share ``w``."""
    gamma, xi = params.gamma, params.xi
    D = pi - (1 - w) * P0  # equals w * p1
    ok = np.all(D >= -tol, axis=1) & np.all(P0 >= -tol, axis=1)
    if not math.isinf(gamma):
        ok &= np.all(P0 * w <= gamma * D + tol, axis=1)
        ok &= np.all(D <= gamma * w * P0 + tol, axis=1)
    Q, Dk = P0[ok], np.clip(D[ok], 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        or0 = Q[:, 3] * Q[:, 0] / (Q[:, 1] * Q[:, 2])
        if not math.isinf(xi) and Q.shape[0]:
            h = or0 / (Dk[:, 3] * Dk[:, 0] / (Dk[:, 1] * Dk[:, 2]))
            fine = (h <= xi * (1 + tol)) & (h >= (1 - tol) / xi)
            Q, or0 = Q[fine], or0[fine]
    good = ~np.isnan(or0)
    return Q[good], or0[good]


def _scan_slice(pi, params, w, lo, hi, step, min_points, tol, keep_top):
    """Grid the three narrowest cells of a box; the widest cell closes the sum."""
    free = int(np.argmax(hi - lo))
    grid_cells = [k for k in range(4) if k != free]
    axes = [_axis(lo[k], hi[k], step, min_points) for k in grid_cells]
    g = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    P0 = np.empty((g.shape[0], 4))
    P0[:, grid_cells] = g
    P0[:, free] = 1.0 - g.sum(axis=1)
    keep = (P0[:, free] >= lo[free] - tol) & (P0[:, free] <= hi[free] + tol)
    Q, vals = _eval(pi, params, w, P0[keep], tol)
    if Q.shape[0] == 0:
        return [], []
    order = np.argsort(vals, kind="stable")
    lows = [(float(vals[i]), float(w), Q[i].copy()) for i in order[:keep_top]]
    highs = [(float(vals[i]), float(w), Q[i].copy()) for i in order[::-1][:keep_top]]
    return lows, highs


def _diverse(cands, side, spread, k):
    """Best ``k`` candidates that are pairwise more than ``spread`` apart (relative to ``spread``)."""
    cands = sorted(cands, key=lambda c: c[0], reverse=(side == "upper"))
    picked = []
    for c in cands:
        x = np.concatenate([[c[1]], c[2]]) / spread
        if all(np.max(np.abs(x - np.concatenate([[p[1]], p[2]]) / spread)) > 2 for p in picked):
            picked.append(c)
        if len(picked) == k:
            break
    return picked


def _better(a, b, side):
    if side == "lower":
        return a[0] < b[0] * (1 - 1e-12)
    return a[0] > b[0] * (1 + 1e-12)


def _pattern_refine(pi, params, best, side, radius, rounds, tol):
    """Local grid search: keep the window while the incumbent moves, shrink it when it stalls.

    ``radius`` holds half-widths for ``(w, p00, p10, p01, p11)``.
    """
    delta, gamma = params.delta, params.gamma
    radius = radius.copy()
    shrinks = 0
    for _ in range(60 * (rounds + 1)):
        if shrinks >= rounds:
            break
        _, w0, q0 = best
        cand = None
        for w in np.linspace(max(w0 - radius[0], 0.0), min(w0 + radius[0], delta), 5):
            if w <= 0:
                continue
            lo, hi = _slice_box(pi, w, gamma)
            lo = np.maximum(lo, q0 - radius[1:])
            hi = np.minimum(hi, q0 + radius[1:])
            if np.any(lo > hi):
                continue
            step = np.max(hi - lo) / 6 if np.max(hi - lo) > 0 else 1.0
            lows, highs = _scan_slice(pi, params, w, lo, hi, step, 7, tol, 1)
            for c in (lows if side == "lower" else highs):
                if cand is None or _better(c, cand, side):
                    cand = c
        if cand is not None and _better(cand, best, side):
            best = cand
        else:
            radius /= 3
            shrinks += 1
    return best


def oracle_bounds(t: ObservedTable, params: SensitivityParams, grid_step: float = 0.01,
                  refine_rounds: int = 8, tol: float = 1e-12, seeds: int = 4) -> BoundsInterval:
    """Brute-force bounds by scanning a grid over ``(w, p0)``.

    For each ``w`` on a grid over ``[0, delta]`` the level-zero cells are
    gridded inside the per-cell range that the ratio limit allows at that
    ``w``, and every point is checked against all constraints. The best
    ``seeds`` well-separated points on each side are then refined by a
    local grid pattern search. ``w = 0`` (the observed table itself) is
    always included.
    """
    if not t.positive:
        raise UndefinedOddsRatio("sensitivity bounds need all four cells positive")
    pi = t.cells
    point = observed_or(t)
    delta, gamma = params.delta, params.gamma
    if delta == 0.0:
        return BoundsInterval(point, point, pi.copy(), pi.copy(), params=params, method="oracle")

    n_w = max(int(math.ceil(delta / grid_step)) + 1, 11)
    w_vals = np.linspace(0.0, delta, n_w)[1:]
    lows, highs = [], []
    spread = np.zeros(5)
    spread[0] = delta / (n_w - 1)
    for w in w_vals:
        lo, hi = _slice_box(pi, w, gamma)
        a, b = _scan_slice(pi, params, w, lo, hi, grid_step, 13, tol, 4 * seeds)
        lows += a
        highs += b
        spread[1:] = np.maximum(spread[1:], (hi - lo) / 12)

    refined = {}
    for side, cands in (("lower", lows), ("upper", highs)):
        best = None
        for seed in _diverse(cands, side, np.maximum(spread, 1e-15), seeds):
            r = _pattern_refine(pi, params, seed, side, 2 * spread, refine_rounds, tol)
            if best is None or _better(r, best, side):
                best = r
        refined[side] = best

    if refined["lower"] is None and refined["upper"] is None:
        log.warning("oracle grid found no feasible point with w > 0; returning the point odds ratio")
    lo_val, lo_q = point, pi.copy()
    hi_val, hi_q = point, pi.copy()
    if refined["lower"] is not None and refined["lower"][0] < point:
        lo_val, lo_q = refined["lower"][0], refined["lower"][2]
    if refined["upper"] is not None and refined["upper"][0] > point:
        hi_val, hi_q = refined["upper"][0], refined["upper"][2]
    return BoundsInterval(lo_val, hi_val, lo_q, hi_q, params=params, method="oracle")
