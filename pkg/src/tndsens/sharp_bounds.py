"""Closed-form sharp bounds on the causal odds ratio at confounder level zero.

Three sensitivity constraints are handled here:

* ``delta`` alone: at most a ``delta`` share of tested units carry a nonzero
  hidden confounder.
* ``gamma`` alone (``delta = 1``): per-cell probability ratios between the
  two confounder levels lie in ``[1/gamma, gamma]``.
* both together.

All three reduce to minimizing an odds ratio over a box of per-cell limits
intersected with the probability simplex, which :func:`min_or_boxed` solves
exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (ObservedTable, SensitivityParams, as_cells, format_value, observed_or,
                   odds_ratio, relabel_exposure)
from .exceptions import InfeasibleBox, InvalidInput, UndefinedOddsRatio

SPLIT_TOL = 1e-12
_RELABEL = [1, 0, 3, 2]
I00, I10, I01, I11 = 0, 1, 2, 3


@dataclass(frozen=True, eq=False)
class CellBox:
    """Per-cell limits ``lower <= p <= upper`` on a cell vector (canonical order)."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float)
        hi = np.array(self.upper, dtype=float)
        if lo.shape != (4,) or hi.shape != (4,):
            raise InvalidInput("cell box needs four lower and four upper limits")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def feasible(self) -> bool:
        return (bool(np.all(self.lower <= self.upper + SPLIT_TOL))
                and self.lower.sum() <= 1 + SPLIT_TOL and self.upper.sum() >= 1 - SPLIT_TOL)

    def contains(self, q, tol: float = 1e-10) -> bool:
        q = np.asarray(q, dtype=float)
        return bool(np.all(q >= self.lower - tol) and np.all(q <= self.upper + tol))

    def relabeled(self) -> "CellBox":
        return CellBox(self.lower[_RELABEL], self.upper[_RELABEL])


@dataclass
class BoundsInterval:
    """Lower and upper bound on the causal odds ratio with attaining cell vectors.

    ``upper`` may be ``math.inf``. Witnesses are the hidden level-zero cell
    vectors ``p0`` whose odds ratio equals the bound.
    """

    lower: float
    upper: float
    lower_witness: Optional[np.ndarray] = None
    upper_witness: Optional[np.ndarray] = None
    params: Optional[SensitivityParams] = None
    method: str = "closed-form"
    converged: bool = True
    extra: dict = field(default_factory=dict)

    def __iter__(self):
        yield self.lower
        yield self.upper

    def __contains__(self, value):
        return self.lower <= value <= self.upper

    @property
    def log_width(self) -> float:
        if self.lower <= 0 or math.isinf(self.upper):
            return math.inf
        return math.log(self.upper) - math.log(self.lower)

    def to_dict(self) -> dict:
        def wit(w):
            return None if w is None else [float(x) for x in w]

        out = {
            "lower": format_value(self.lower),
            "upper": format_value(self.upper),
            "lower_witness": wit(self.lower_witness),
            "upper_witness": wit(self.upper_witness),
            "params": self.params.as_dict() if self.params is not None else None,
            "method": self.method,
            "converged": self.converged,
        }
        out.update(self.extra)
        return out


@dataclass(frozen=True, eq=False)
class HiddenDecomposition:
    """Observed cells as a mixture ``pi = (1 - w) * p0 + w * p1``.

    ``w`` is the share of tested units with a nonzero hidden confounder.
    ``degenerate`` marks witnesses where ``p0`` has a zero cell, so the
    attained odds ratio is 0 or infinite.
    """

    w: float
    p0: np.ndarray
    p1: np.ndarray
    degenerate: bool = False

    def mixture(self) -> np.ndarray:
        return (1 - self.w) * np.asarray(self.p0) + self.w * np.asarray(self.p1)

    def to_dict(self) -> dict:
        return {"w": float(self.w), "p0": [float(x) for x in self.p0],
                "p1": [float(x) for x in self.p1], "degenerate": self.degenerate}


def _require_positive(t):
    if not t.positive:
        raise UndefinedOddsRatio("sensitivity bounds need all four cells positive")


def bounds_delta(t: ObservedTable, delta: float) -> BoundsInterval:
    """Sharp bounds when only the confounder share ``delta`` is constrained.

    The lower bound is the smaller of pulling ``delta`` mass out of cell
    (1,1) or cell (0,0); the upper bound pulls it out of (1,0) or (0,1). The
    upper bound is infinite once ``delta >= min(p10, p01)``.
    """
    _require_positive(t)
    delta = float(delta)
    if not 0 <= delta <= 1:
        raise InvalidInput("delta must lie in [0, 1]")
    p00, p10, p01, p11 = t.cells
    den = p10 * p01
    lower = min(max(p11 - delta, 0.0) * p00, p11 * max(p00 - delta, 0.0)) / den
    num = p11 * p00
    with np.errstate(divide="ignore"):
        up = [num / (max(p10 - delta, 0.0) * p01) if p10 > delta else math.inf,
              num / (p10 * max(p01 - delta, 0.0)) if p01 > delta else math.inf]
    upper = max(up)
    lo_dec = attaining_decomposition(t, delta, "lower")
    up_dec = attaining_decomposition(t, delta, "upper")
    return BoundsInterval(
        float(lower), float(upper), lo_dec.p0, up_dec.p0,
        params=SensitivityParams(delta, math.inf, math.inf), method="closed-form",
        extra={"lower_decomposition": lo_dec.to_dict(), "upper_decomposition": up_dec.to_dict()},
    )


def cell_box(t, delta: float, gamma: float) -> CellBox:
    """Per-cell limits on the hidden level-zero cells ``p0``.

    lower = max(pi / (delta*gamma + 1 - delta), (pi - delta) / (1 - delta))
    upper = min(pi * gamma / (delta + (1 - delta) * gamma), 1)

    ``(pi - delta) / (1 - delta)`` is taken as 0 at ``delta = 1``, and
    ``gamma = inf`` uses the exact limits of both expressions. ``t`` may be an
    ObservedTable or any cell vector (confidence limits reuse this map).
    """
    pi = as_cells(t)
    delta = float(delta)
    gamma = float(gamma)
    if not 0 <= delta <= 1:
        raise InvalidInput("delta must lie in [0, 1]")
    if not gamma >= 1:
        raise InvalidInput("gamma must be >= 1")
    if delta == 0.0:
        return CellBox(pi.copy(), np.minimum(pi, 1.0))
    if math.isinf(gamma):
        first_lo = np.zeros(4)
        up = pi / (1 - delta) if delta < 1 else np.ones(4)
    else:
        first_lo = pi / (delta * gamma + (1 - delta))
        up = pi * gamma / (delta + (1 - delta) * gamma)
    second_lo = (pi - delta) / (1 - delta) if delta < 1 else np.zeros(4)
    return CellBox(np.maximum(first_lo, second_lo), np.minimum(up, 1.0))


def min_or_boxed(box: CellBox):
    """Minimize ``c11*c00 / (c10*c01)`` over the box intersected with the simplex.

    Returns ``(value, q)`` with ``q`` the minimizing cell vector. At the
    minimum either the numerator cells sit at their lower limits or the
    denominator cells sit at their upper limits; which one depends on whether
    ``l11 + l00 + u10 + u01 >= 1``.
    """
    lo, hi = box.lower, box.upper
    if np.any(lo > hi + SPLIT_TOL) or lo.sum() > 1 + SPLIT_TOL or hi.sum() < 1 - SPLIT_TOL:
        raise InfeasibleBox(f"box with sum(lower)={lo.sum():.6g}, sum(upper)={hi.sum():.6g}")
    l00, l10, l01, l11 = lo
    u00, u10, u01, u11 = hi
    q = np.empty(4)
    if l11 + l00 + u01 + u10 >= 1 - SPLIT_TOL:
        rest = 1 - l11 - l00
        q10 = min(max(l10, rest - u01, rest / 2), u10, rest - l01)
        q[:] = (l00, q10, rest - q10, l11)
        return odds_ratio(q), q

    best = None
    for q11 in (max(l11, 1 - u10 - u01 - u00), min(u11, 1 - u10 - u01 - l00)):
        cand = np.array([1 - u10 - u01 - q11, u10, u01, q11])
        val = odds_ratio(cand)
        # ties within rounding keep the first candidate
        if best is None or val < best[0] * (1 - SPLIT_TOL):
            best = (val, cand)
    return best


def bounds_delta_gamma(t: ObservedTable, delta: float, gamma: float) -> BoundsInterval:
    """Sharp bounds under both the confounder-share and confounding-strength limits.

    The upper bound is the reciprocal of the lower bound for the table with
    exposure levels swapped.
    """
    _require_positive(t)
    params = SensitivityParams(delta, gamma, math.inf)
    if params.delta == 0.0 or params.gamma == 1.0:
        point = observed_or(t)
        return BoundsInterval(point, point, t.cells.copy(), t.cells.copy(), params=params)
    lo_val, lo_q = min_or_boxed(cell_box(t, params.delta, params.gamma))
    flip_val, flip_q = min_or_boxed(cell_box(relabel_exposure(t), params.delta, params.gamma))
    upper = math.inf if flip_val == 0 else 1.0 / flip_val
    return BoundsInterval(float(lo_val), float(upper), lo_q, flip_q[_RELABEL], params=params)


def box_bounds(box: CellBox) -> BoundsInterval:
    """Lower and upper odds-ratio bounds over an arbitrary feasible cell box."""
    lo_val, lo_q = min_or_boxed(box)
    flip_val, flip_q = min_or_boxed(box.relabeled())
    upper = math.inf if flip_val == 0 else 1.0 / flip_val
    return BoundsInterval(float(lo_val), float(upper), lo_q, flip_q[_RELABEL])


def calibrate_benchmarks(t_a: ObservedTable, t_b: ObservedTable):
    """Observed-covariate benchmarks for gamma and xi.

    Returns ``(gamma_hat, xi_hat)``: the largest per-cell probability ratio
    between the two tables and the ratio of their odds ratios, both folded
    to be >= 1.
    """
    _require_positive(t_a)
    _require_positive(t_b)
    ratio = t_a.cells / t_b.cells
    gamma_hat = float(np.max(np.maximum(ratio, 1 / ratio)))
    r = observed_or(t_a) / observed_or(t_b)
    return gamma_hat, float(max(r, 1 / r))


def attaining_decomposition(t: ObservedTable, delta: float, bound: str = "lower") -> HiddenDecomposition:
    """Hidden mixture attaining the ``delta``-only bound.

    The nonzero confounder level puts all its mass on one cell, with share
    ``w = min(delta, pi_cell)``. For the lower bound the candidates are cells
    (1,1) and (0,0); for the upper bound (1,0) and (0,1). The extremal
    candidate is returned. When ``w`` is clamped to ``pi_cell`` the level-zero
    table has an empty cell and ``degenerate`` is set.
    """
    _require_positive(t)
    if bound not in ("lower", "upper"):
        raise InvalidInput("bound must be 'lower' or 'upper'")
    pi = t.cells
    delta = float(delta)
    if delta == 0.0:
        return HiddenDecomposition(0.0, pi.copy(), pi.copy())
    cells = (I11, I00) if bound == "lower" else (I10, I01)
    best = None
    for k in cells:
        w = min(delta, float(pi[k]))
        p1 = np.zeros(4)
        p1[k] = 1.0
        p0 = (pi - w * p1) / (1 - w)
        p0[k] = max(p0[k], 0.0)
        if w == pi[k]:
            p0[k] = 0.0
        val = odds_ratio(p0)
        better = best is None or (val < best[0] if bound == "lower" else val > best[0])
        if better:
            best = (val, HiddenDecomposition(w, p0, p1, degenerate=bool(p0[k] == 0.0)))
    return best[1]
