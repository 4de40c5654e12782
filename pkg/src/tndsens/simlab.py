"""Data generators and simulation harnesses.

Per-replication seeds come from ``numpy.random.SeedSequence(seed).spawn``
order, i.e. replication ``r`` always uses child ``r`` of the root sequence,
so any subset of replications can be rerun on its own.
"""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .confidence import DEFAULT_DRAWS, ci_bounds_opt, conf_set
from .core import ObservedTable, SensitivityParams, format_value, parse_param, validate_table
from .covmodel import IndividualData, _design, _probs, band_bounds, fit_mnl, true_band
from .exceptions import InfeasibleMarginals, InvalidInput, TNDError
from .qcqp import SolverConfig, solve_bounds

# coefficients of the continuous-covariate experiment; rows are cells (1,0), (0,1), (1,1)
REFERENCE_BETA = np.array([[0.5, 0.5], [1.3, -1.3], [-0.1, -0.3]])
REFERENCE_PI = (0.1, 0.2, 0.3, 0.4)


def replication_seed(seed: int, rep: int) -> np.random.SeedSequence:
    """Seed sequence of replication ``rep``; independent of how many others run."""
    return np.random.SeedSequence(entropy=seed, spawn_key=(rep,))


def sample_multinomial_table(pi, n: int, seed=0) -> ObservedTable:
    """One multinomial draw of ``n`` units from cell probabilities ``pi``."""
    cells = pi.cells if isinstance(pi, ObservedTable) else validate_table(pi).cells
    if int(n) != n or n < 1:
        raise InvalidInput("n must be a positive integer")
    rng = np.random.default_rng(seed)
    return validate_table(rng.multinomial(int(n), cells), as_counts=True)


def sample_dirichlet_pi(concentration=(1.0, 1.0, 1.0, 1.0), seed=0) -> ObservedTable:
    """One Dirichlet draw built from normalized Gamma variates."""
    a = np.asarray(concentration, dtype=float)
    if a.shape != (4,) or np.any(~(a > 0)):
        raise InvalidInput("concentration needs four positive values")
    rng = np.random.default_rng(seed)
    g = rng.standard_gamma(a)
    return ObservedTable(g / g.sum())


def simulate_continuous(beta=REFERENCE_BETA, n: int = 50000, seed=0) -> IndividualData:
    """Draw ``c ~ U(0, 1)`` and one cell per row from the logit model at ``beta``."""
    beta = np.asarray(beta, dtype=float)
    if int(n) != n or n < 1:
        raise InvalidInput("n must be a positive integer")
    p = beta.shape[1] - 1
    rng = np.random.default_rng(seed)
    c = rng.uniform(size=(int(n), p))
    G = _probs(beta, _design(c))
    cell = (rng.uniform(size=int(n))[:, None] > np.cumsum(G, axis=1)[:, :3]).sum(axis=1)
    return IndividualData(c, cell % 2, cell // 2)


def fixed_or_table(or_target: float, m1: float, m2: float) -> ObservedTable:
    """Table with odds ratio ``or_target``, treated share ``m1`` and positive share ``m2``.

    ``x = p11`` solves ``(1 - R) x^2 + [(1 - m1 - m2) + R (m1 + m2)] x - R m1 m2 = 0``
    and the table is ``(1 - m1 - m2 + x, m1 - x, m2 - x, x)``. The root with
    all four cells in ``(0, 1)`` is returned.
    """
    R = float(or_target)
    if not R > 0:
        raise InvalidInput("odds ratio must be positive")
    if not (0 < m1 < 1 and 0 < m2 < 1):
        raise InvalidInput("marginal shares must lie in (0, 1)")
    a = 1 - R
    b = (1 - m1 - m2) + R * (m1 + m2)
    c = -R * m1 * m2
    if abs(a) < 1e-14:
        roots = [-c / b]
    else:
        disc = b * b - 4 * a * c
        if disc < 0:
            raise InfeasibleMarginals("no real table for these marginals")
        sq = math.sqrt(disc)
        # numerically stable pair of roots
        qv = -0.5 * (b + math.copysign(sq, b))
        roots = [qv / a, c / qv] if qv != 0 else [0.0]
    for x in roots:
        cells = np.array([1 - m1 - m2 + x, m1 - x, m2 - x, x])
        if np.all(cells > 0) and np.all(cells < 1):
            return ObservedTable(cells)
    raise InfeasibleMarginals(f"no root gives a valid table for R={R}, m1={m1}, m2={m2}")


def fixed_or_scan(or_target: float = 0.5, grid: Sequence[float] = None,
                  params_list: Sequence[SensitivityParams] = None,
                  cfg: Optional[SolverConfig] = None) -> List[dict]:
    """Sharp bounds over an ``(m1, m2)`` grid of fixed-odds-ratio tables.

    Returns one row per grid point and parameter set with the bounds and
    ``log(upper / lower)``.
    """
    grid = np.round(np.arange(1, 10) / 10, 10) if grid is None else np.asarray(grid, dtype=float)
    if params_list is None:
        params_list = [SensitivityParams(0.1, 5, math.inf), SensitivityParams(0.1, 5, 2)]
    rows = []
    for m1 in grid:
        for m2 in grid:
            t = fixed_or_table(or_target, float(m1), float(m2))
            for prm in params_list:
                b = solve_bounds(t, prm, cfg)
                width = b.log_width
                rows.append({"m1": float(m1), "m2": float(m2), "delta": prm.delta,
                             "gamma": format_value(prm.gamma), "xi": format_value(prm.xi),
                             "lower": b.lower, "upper": format_value(b.upper),
                             "log_width": format_value(width)})
    return rows


# ---------------------------------------------------------------------------
# coverage studies


@dataclass
class ExperimentConfig:
    """Settings for a coverage study.

    ``kind`` is ``"table"`` (multinomial tables from ``true_pi``) or
    ``"continuous"`` (logit model at ``true_beta`` over ``grid``).
    """

    replications: int = 200
    n: int = 1000
    true_pi: Optional[Sequence[float]] = REFERENCE_PI
    true_beta: Optional[Sequence[Sequence[float]]] = None
    params: SensitivityParams = field(default_factory=lambda: SensitivityParams(0.1, 5, 2))
    alpha: float = 0.05
    shapes: Sequence[str] = ("Q", "N", "T")
    seed: int = 0
    kind: str = "table"
    mc_draws: int = 10**5
    grid: Optional[Sequence[float]] = None
    route: str = "exact-set"

    def __post_init__(self):
        if isinstance(self.params, dict):
            self.params = SensitivityParams(**self.params)
        elif not isinstance(self.params, SensitivityParams):
            self.params = SensitivityParams(*self.params)
        if int(self.replications) != self.replications or self.replications < 1:
            raise InvalidInput("replications must be >= 1")
        if int(self.n) != self.n or self.n < 1:
            raise InvalidInput("n must be >= 1")
        if not 0 < self.alpha < 1:
            raise InvalidInput("alpha must lie in (0, 1)")
        if self.kind not in ("table", "continuous"):
            raise InvalidInput("kind must be 'table' or 'continuous'")
        if self.kind == "continuous" and self.true_beta is None:
            self.true_beta = REFERENCE_BETA.tolist()
        self.shapes = tuple(self.shapes)
        # lists keep to_dict stable across a JSON round trip
        if self.true_pi is not None:
            self.true_pi = [float(v) for v in self.true_pi]
        if self.true_beta is not None:
            self.true_beta = np.asarray(self.true_beta, dtype=float).tolist()
        if self.grid is not None:
            self.grid = [float(v) for v in self.grid]

    @classmethod
    def from_json(cls, source) -> "ExperimentConfig":
        if hasattr(source, "read"):
            data = json.load(source)
        else:
            with open(source) as fh:
                data = json.load(fh)
        if "params" in data and isinstance(data["params"], dict):
            data["params"] = SensitivityParams(**{k: parse_param(v) for k, v in data["params"].items()})
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise InvalidInput(f"unknown config fields {sorted(extra)}")
        return cls(**data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = self.params.as_dict()
        d["shapes"] = list(self.shapes)
        return d


@dataclass
class CoverageRecord:
    rep: int
    shape: str
    covered: bool
    lower: float
    upper: float
    width: float
    seconds: float
    error: Optional[str] = None


@dataclass
class CoverageReport:
    """Per-shape coverage of the true sharp bounds by the confidence bounds."""

    config: ExperimentConfig
    truth: Dict[str, float]
    records: List[CoverageRecord]

    def _rows(self, shape):
        return [r for r in self.records if r.shape == shape]

    def coverage(self, shape: str) -> float:
        rows = self._rows(shape)
        return sum(r.covered for r in rows) / len(rows) if rows else math.nan

    def mean_log_width(self, shape: str) -> float:
        w = [r.width for r in self._rows(shape) if r.error is None]
        return float(np.mean(w)) if w else math.nan

    def summary(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "truth": {k: format_value(v) for k, v in self.truth.items()},
            "shapes": {s: {"coverage": self.coverage(s), "mean_log_width": format_value(self.mean_log_width(s)),
                           "replications": len(self._rows(s)),
                           "errors": sum(r.error is not None for r in self._rows(s))}
                       for s in self.config.shapes},
        }

    def write_csv(self, dest) -> None:
        """Write ``rep,shape,covered,lower,upper,width,seconds`` rows."""
        lines = ["rep,shape,covered,lower,upper,width,seconds"]
        for r in self.records:
            lines.append(f"{r.rep},{r.shape},{int(r.covered)},{format_value(r.lower)},"
                         f"{format_value(r.upper)},{format_value(r.width)},{r.seconds:.6f}")
        text = "\n".join(lines) + "\n"
        if hasattr(dest, "write"):
            dest.write(text)
        else:
            with open(dest, "w", newline="") as fh:
                fh.write(text)

    def write_summary(self, dest) -> None:
        text = json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"
        if hasattr(dest, "write"):
            dest.write(text)
        else:
            with open(dest, "w") as fh:
                fh.write(text)


def _width(lo, hi):
    if lo <= 0 or math.isinf(hi):
        return math.inf
    return math.log(hi) - math.log(lo)


def _table_replication(cfg, rep, truth, solver):
    ss = replication_seed(cfg.seed, rep)
    table_seed, mc_seed = ss.spawn(2)
    t = sample_multinomial_table(cfg.true_pi, cfg.n, np.random.default_rng(table_seed))
    mc = int(mc_seed.generate_state(1)[0])
    out = []
    for shape in cfg.shapes:
        t0 = time.perf_counter()
        try:
            if not t.positive:
                raise TNDError("sampled table has an empty cell")
            r = ci_bounds_opt(t, cfg.alpha, cfg.params, shape, solver, mc_draws=cfg.mc_draws, seed=mc)
            lo, hi, err = r.lower, r.upper, None
        except TNDError as exc:
            lo, hi, err = math.nan, math.nan, str(exc)
        covered = err is None and lo <= truth["lower"] and truth["upper"] <= hi
        out.append(CoverageRecord(rep, shape, bool(covered), lo, hi, _width(lo, hi) if err is None else math.nan,
                                  time.perf_counter() - t0, err))
    return out


def _continuous_replication(cfg, rep, truth_rows, solver):
    ss = replication_seed(cfg.seed, rep)
    data = simulate_continuous(np.asarray(cfg.true_beta), cfg.n, np.random.default_rng(ss))
    t0 = time.perf_counter()
    try:
        fit = fit_mnl(data)
        band = band_bounds(fit, cfg.grid, cfg.alpha, cfg.params, cfg.route, solver)
        covered = band.covers(truth_rows)
        lo = min(r.ci.lower for r in band.rows)
        hi = max(r.ci.upper for r in band.rows)
        width = float(np.mean([_width(r.ci.lower, r.ci.upper) for r in band.rows]))
        err = None
    except TNDError as exc:
        covered, lo, hi, width, err = False, math.nan, math.nan, math.nan, str(exc)
    return [CoverageRecord(rep, "G", bool(covered), lo, hi, width, time.perf_counter() - t0, err)]


def coverage_study(cfg: ExperimentConfig, solver: Optional[SolverConfig] = None,
                   workers: int = 1) -> CoverageReport:
    """Repeat sampling and confidence-bound computation; record coverage of the true bounds.

    A replication covers when both true sharp bounds lie inside its
    confidence interval. Errors in a replication are recorded, not raised.
    With ``workers > 1`` replications run in a process pool; results are
    identical to a serial run.
    """
    if cfg.kind == "table":
        truth_b = solve_bounds(validate_table(cfg.true_pi), cfg.params, solver)
        truth = {"lower": truth_b.lower, "upper": truth_b.upper}
        job, arg = _table_replication, truth
    else:
        if cfg.grid is None:
            cfg.grid = np.linspace(0, 1, 101).tolist()
        truth_rows = true_band(np.asarray(cfg.true_beta), cfg.grid, cfg.params, solver)
        truth = {"min_lower": min(b.lower for b in truth_rows), "max_upper": max(b.upper for b in truth_rows)}
        job, arg = _continuous_replication, truth_rows
    reps = range(cfg.replications)
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as ex:
            chunks = list(ex.map(job, [cfg] * len(reps), reps, [arg] * len(reps), [solver] * len(reps)))
    else:
        chunks = [job(cfg, r, arg, solver) for r in reps]
    records = [rec for chunk in chunks for rec in chunk]
    if cfg.kind == "continuous":
        cfg = ExperimentConfig(**{**cfg.__dict__, "shapes": ("G",)})
    return CoverageReport(cfg, truth, records)
