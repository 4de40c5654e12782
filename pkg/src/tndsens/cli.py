"""Command-line entry point: ``python -m tndsens <subcommand> ...``.

Exit codes: 0 success, 2 input error, 3 numerical failure, 4 non-convergence
(results are still written, with their ``converged`` flags).
"""
from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import __version__
from .confidence import SHAPES, ci_bounds_closed, ci_bounds_opt, simultaneous_level, wald_or_interval
from .core import (ObservedTable, SensitivityParams, format_value, observed_or, parse_param, read_tables,
                   validate_table, write_strata_csv)
from .covmodel import ROUTES, band_bounds, fit_mnl, read_individual_csv, write_individual_csv
from .exceptions import (EmptyRestriction, InfeasibleMarginals, InvalidInput, InvalidTable, NonConverged,
                         TNDError)
from .qcqp import SolverConfig, solve_bounds
from .sharp_bounds import bounds_delta, bounds_delta_gamma, calibrate_benchmarks
from .simlab import (ExperimentConfig, coverage_study, fixed_or_scan, replication_seed,
                     sample_multinomial_table, simulate_continuous)

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_NONCONVERGED = 0, 2, 3, 4
INPUT_ERRORS = (InvalidInput, InvalidTable, EmptyRestriction, InfeasibleMarginals, FileNotFoundError,
                json.JSONDecodeError)


class _NonConvergedResult(Exception):
    """Raised after outputs are written when some result did not converge."""


@dataclass
class RunManifest:
    """Provenance record written next to an output file."""

    command: str
    flags: dict
    inputs: dict
    seed: Optional[int]
    version: str = __version__
    wall_seconds: float = 0.0
    outputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"command": self.command, "flags": self.flags, "inputs": self.inputs, "seed": self.seed,
                "version": self.version, "wall_seconds": self.wall_seconds, "outputs": self.outputs}


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _threads() -> int:
    try:
        return max(int(os.environ.get("TND_THREADS", "1")), 1)
    except ValueError:
        return 1


def _float_list(text) -> List[float]:
    """Parse ``a,b,c`` or ``start:stop:count`` (inclusive linspace)."""
    text = str(text).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise InvalidInput(f"range grid must be start:stop:count, got {text!r}")
        a, b, k = float(parts[0]), float(parts[1]), int(parts[2])
        if k < 1:
            raise InvalidInput("grid count must be positive")
        return [float(v) for v in np.linspace(a, b, k)]
    vals = [parse_param(v) for v in text.split(",") if v.strip()]
    if not vals:
        raise InvalidInput("empty grid")
    return vals


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _clean(obj):
    """Make a JSON-ready copy: numpy scalars to floats, infinities to strings, nan to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        return format_value(v)
    return obj


def _emit(text: str, out: Optional[str], written: list):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)
        written.append(out)


def _params(args) -> SensitivityParams:
    return SensitivityParams(args.delta, args.gamma, args.xi)


def _load_tables(args):
    if getattr(args, "counts", None):
        vals = _float_list(args.counts)
        return {"all": validate_table(vals, as_counts=True)}
    if getattr(args, "table", None):
        return read_tables(args.table)
    raise InvalidInput("give --counts or --table")


def _ve(lo, hi):
    """Efficacy interval ``1 - OR`` with the endpoints swapped."""
    return [format_value(1 - hi), format_value(1 - lo)]


def _bounds_dict(b) -> dict:
    return {"lower": format_value(b.lower), "upper": format_value(b.upper),
            "ve": _ve(b.lower, b.upper), "method": b.method, "converged": bool(b.converged)}


# ---------------------------------------------------------------------------
# subcommands


def cmd_analyze(args, written):
    tables = _load_tables(args)
    prm = _params(args)
    cfg = SolverConfig(seed=args.seed)
    strata = {}
    converged = True
    for key in sorted(tables):
        t = tables[key]
        rec = {"cells": [float(c) for c in t.cells], "counts": list(t.counts) if t.counts else None}
        point = observed_or(t)
        rec["or"] = point
        rec["ve"] = 1 - point
        rec["ve_percent"] = round(100 * (1 - point), 2)
        if math.isinf(prm.gamma):
            closed = bounds_delta(t, prm.delta)
        else:
            closed = bounds_delta_gamma(t, prm.delta, prm.gamma)
        rec["bounds_closed_form"] = _bounds_dict(closed)
        if not math.isinf(prm.xi):
            sol = solve_bounds(t, prm, cfg)
            converged &= sol.converged
            rec["bounds_solver"] = _bounds_dict(sol)
            rec["bounds"] = rec["bounds_solver"]
        else:
            rec["bounds"] = rec["bounds_closed_form"]
        if args.alpha is not None and t.counts is not None:
            level = simultaneous_level(args.alpha, len(tables))
            lo, hi = wald_or_interval(t, level)
            rec["or_ci"] = [lo, hi]
            rec["ve_ci"] = _ve(lo, hi)
            ci = ci_bounds_opt(t, level, prm, args.set_shape, cfg, mc_draws=args.mc_draws, seed=args.seed)
            converged &= ci.interval.converged
            rec["ci_bounds"] = {**_bounds_dict(ci.interval), "alpha": level, "shape": args.set_shape}
        strata[key] = rec
    out = {"params": prm.as_dict(), "alpha": args.alpha, "strata": strata}
    _emit(_dumps(_clean(out)), args.out, written)
    return converged


def cmd_heatmap(args, written):
    tables = _load_tables(args)
    if len(tables) != 1:
        raise InvalidInput("heatmap takes a single table")
    t = next(iter(tables.values()))
    gammas = _float_list(args.gamma_grid or args.grid or "1,2,3,4,5")
    xis = _float_list(args.xi_grid or args.grid or "1,2,3,4,5")
    cfg = SolverConfig(seed=args.seed)
    rows = []
    converged = True
    header = "gamma,xi,lower,upper" + (",ci_lower,ci_upper" if args.alpha is not None else "")
    for g in sorted(gammas):
        for x in sorted(xis):
            prm = SensitivityParams(args.delta, g, x)
            b = solve_bounds(t, prm, cfg)
            converged &= b.converged
            row = [format_value(g), format_value(x), format_value(b.lower), format_value(b.upper)]
            if args.alpha is not None:
                ci = ci_bounds_opt(t, args.alpha, prm, args.set_shape, cfg, mc_draws=args.mc_draws, seed=args.seed)
                converged &= ci.interval.converged
                row += [format_value(ci.lower), format_value(ci.upper)]
            rows.append(row)
    text = header + "\n" + "".join(",".join(_cell(v) for v in r) + "\n" for r in rows)
    _emit(text, args.out, written)
    contour = nullification_contour(rows, sorted(gammas), sorted(xis), use_ci=args.alpha is not None)
    ctext = "xi,gamma_cross\n" + "".join(f"{_cell(format_value(x))},{_cell(g)}\n" for x, g in contour)
    if args.contour:
        _emit(ctext, args.contour, written)
    elif args.out not in (None, "-"):
        _emit(ctext, _sidecar(args.out, "contour.csv"), written)
    return converged


def _cell(v):
    if isinstance(v, str):
        return v
    if v is None:
        return ""
    return repr(float(v))


def _sidecar(path, suffix):
    root, _ = os.path.splitext(path)
    return f"{root}.{suffix}"


def nullification_contour(rows, gammas, xis, use_ci=False):
    """For each xi, the gamma at which the upper limit first reaches 1.

    Linear interpolation in ``log(upper)`` between adjacent grid values;
    ``None`` when the upper limit stays below 1 over the grid, and the first
    grid value when it starts at or above 1.
    """
    col = 5 if use_ci else 3
    table = {(r[0], r[1]): r[col] for r in rows}
    out = []
    for x in xis:
        xv = format_value(x)
        ups = [table[(format_value(g), xv)] for g in gammas]
        ups = [math.inf if u == "inf" else float(u) for u in ups]
        cross = None
        for i, u in enumerate(ups):
            if u >= 1:
                if i == 0:
                    cross = gammas[0]
                else:
                    g0, g1, u0 = gammas[i - 1], gammas[i], ups[i - 1]
                    if math.isinf(u) or math.isinf(g1):
                        cross = g1
                    else:
                        s = (0 - math.log(u0)) / (math.log(u) - math.log(u0))
                        cross = g0 + s * (g1 - g0)
                break
        out.append((x, cross))
    return out


def cmd_ci(args, written):
    tables = _load_tables(args)
    prm = _params(args)
    cfg = SolverConfig(seed=args.seed)
    level = simultaneous_level(args.alpha, len(tables))
    method = args.method
    if method == "auto":
        method = "closed" if args.set_shape in ("N", "T") and math.isinf(prm.xi) else "opt"
    res = {}
    converged = True
    for key in sorted(tables):
        t = tables[key]
        if method == "closed":
            r = ci_bounds_closed(t, level, prm, args.set_shape, args.mc_draws, args.seed)
        else:
            r = ci_bounds_opt(t, level, prm, args.set_shape, cfg, args.mc_draws, args.seed)
        converged &= r.interval.converged
        d = r.to_dict()
        d["ve"] = _ve(r.lower, r.upper)
        d["method"] = method
        res[key] = d
    out = {"params": prm.as_dict(), "alpha": args.alpha, "per_stratum_alpha": level, "shape": args.set_shape,
           "strata": res}
    _emit(_dumps(_clean(out)), args.out, written)
    return converged


def cmd_fit(args, written):
    data = read_individual_csv(args.data)
    try:
        fit = fit_mnl(data)
    except NonConverged as exc:
        if exc.result is not None:
            _emit(_dumps(_clean(exc.result.to_dict())), args.out, written)
        raise
    _emit(_dumps(_clean(fit.to_dict())), args.out, written)
    return fit.converged


def cmd_band(args, written):
    data = read_individual_csv(args.data)
    fit = fit_mnl(data)
    grid = _float_list(args.grid or "0:1:101")
    band = band_bounds(fit, grid, args.alpha, _params(args), args.route, SolverConfig(seed=args.seed))
    buf = io.StringIO()
    band.write_csv(buf)
    _emit(buf.getvalue(), args.out, written)
    return all(r.ci.converged and r.point.converged for r in band.rows)


def cmd_calibrate(args, written):
    tables = read_tables(args.table)
    keys = sorted(tables)
    if len(keys) < 2:
        raise InvalidInput("calibration needs at least two strata")
    pairs = []
    for i, a in enumerate(keys):
        for b in keys[i + 1:]:
            g, x = calibrate_benchmarks(tables[a], tables[b])
            pairs.append({"strata": [a, b], "gamma_hat": g, "xi_hat": x})
    _emit(_dumps(_clean({"benchmarks": pairs})), args.out, written)
    return True


def cmd_simulate(args, written):
    cfg = ExperimentConfig.from_json(args.config)
    if cfg.kind == "table":
        tables = {}
        for r in range(cfg.replications):
            tables[f"rep{r:0{len(str(cfg.replications - 1))}d}"] = sample_multinomial_table(
                cfg.true_pi, cfg.n, np.random.default_rng(replication_seed(cfg.seed, r).spawn(2)[0]))
        buf = io.StringIO()
        write_strata_csv(tables, buf)
    else:
        data = simulate_continuous(np.asarray(cfg.true_beta), cfg.n,
                                   np.random.default_rng(replication_seed(cfg.seed, args.rep)))
        buf = io.StringIO()
        write_individual_csv(data, buf)
    _emit(buf.getvalue(), args.out, written)
    return True


def cmd_coverage(args, written):
    cfg = ExperimentConfig.from_json(args.config)
    report = coverage_study(cfg, SolverConfig(seed=args.seed), workers=_threads())
    buf = io.StringIO()
    report.write_csv(buf)
    _emit(buf.getvalue(), args.out, written)
    summary = _dumps(_clean(report.summary()))
    if args.summary:
        _emit(summary, args.summary, written)
    elif args.out not in (None, "-"):
        _emit(summary, _sidecar(args.out, "summary.json"), written)
    else:
        sys.stdout.write(summary)
    return True


def cmd_fixed_or_scan(args, written):
    grid = _float_list(args.grid) if args.grid else None
    xis = _float_list(args.xi_list) if args.xi_list else [math.inf, 2.0]
    plist = [SensitivityParams(args.delta, args.gamma, x) for x in xis]
    rows = fixed_or_scan(args.odds_ratio, grid, plist, SolverConfig(seed=args.seed))
    cols = ["m1", "m2", "delta", "gamma", "xi", "lower", "upper", "log_width"]
    text = ",".join(cols) + "\n" + "".join(",".join(_cell(r[c]) for c in cols) + "\n" for r in rows)
    _emit(text, args.out, written)
    return True


COMMANDS = {
    "analyze": cmd_analyze, "heatmap": cmd_heatmap, "ci": cmd_ci, "fit": cmd_fit, "band": cmd_band,
    "calibrate": cmd_calibrate, "simulate": cmd_simulate, "coverage": cmd_coverage,
    "fixed-or-scan": cmd_fixed_or_scan,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tndsens", description="Sensitivity bounds for test-negative designs.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, params=True, table=True, alpha=False):
        if table:
            g = sp.add_mutually_exclusive_group()
            g.add_argument("--table", help="stratum,z,y,count CSV or JSON table file")
            g.add_argument("--counts", help="four counts c00,c10,c01,c11")
        if params:
            sp.add_argument("--delta", type=float, default=0.0)
            sp.add_argument("--gamma", type=parse_param, default=math.inf)
            sp.add_argument("--xi", type=parse_param, default=math.inf)
        if alpha:
            sp.add_argument("--set-shape", choices=SHAPES, default="Q")
            sp.add_argument("--mc-draws", type=int, default=10**6)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=None, help="output file (default stdout)")
        sp.add_argument("--grid", default=None, help="a,b,c or start:stop:count")

    sp = sub.add_parser("analyze", help="odds ratio, efficacy and sensitivity bounds per stratum")
    common(sp, alpha=True)
    sp.add_argument("--alpha", type=float, default=None)

    sp = sub.add_parser("heatmap", help="bounds over a (gamma, xi) grid")
    common(sp, alpha=True)
    sp.add_argument("--alpha", type=float, default=None)
    sp.add_argument("--gamma-grid", default=None)
    sp.add_argument("--xi-grid", default=None)
    sp.add_argument("--contour", default=None, help="output CSV for the upper-bound-equals-1 contour")

    sp = sub.add_parser("ci", help="confidence bounds under the sensitivity limits")
    common(sp, alpha=True)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--method", choices=("auto", "closed", "opt"), default="auto")

    sp = sub.add_parser("fit", help="fit the multinomial-logit model to individual rows")
    common(sp, params=False, table=False)
    sp.add_argument("--data", required=True)

    sp = sub.add_parser("band", help="simultaneous sensitivity band along a covariate grid")
    common(sp, table=False)
    sp.add_argument("--data", required=True)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--route", choices=ROUTES, default="exact-set")

    sp = sub.add_parser("calibrate", help="benchmark (gamma, xi) from pairs of strata")
    common(sp, params=False)

    sp = sub.add_parser("simulate", help="draw datasets from an experiment config")
    common(sp, params=False, table=False)
    sp.add_argument("--config", required=True)
    sp.add_argument("--rep", type=int, default=0, help="replication index for continuous data")

    sp = sub.add_parser("coverage", help="run a coverage study from an experiment config")
    common(sp, params=False, table=False)
    sp.add_argument("--config", required=True)
    sp.add_argument("--summary", default=None)

    sp = sub.add_parser("fixed-or-scan", help="bound widths over fixed-odds-ratio tables")
    common(sp, table=False)
    sp.add_argument("--odds-ratio", type=float, default=0.5)
    sp.add_argument("--xi-list", default=None, help="xi values, default inf,2")
    sp.set_defaults(delta=0.1, gamma=5.0)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    written: list = []
    t0 = time.perf_counter()
    code = EXIT_OK
    try:
        ok = COMMANDS[args.command](args, written)
        if not ok:
            code = EXIT_NONCONVERGED
    except NonConverged as exc:
        sys.stderr.write(f"error: {exc}\n")
        code = EXIT_NONCONVERGED
    except INPUT_ERRORS as exc:
        sys.stderr.write(f"error: {exc}\n")
        code = EXIT_INPUT
    except (TNDError, ArithmeticError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        code = EXIT_NUMERIC
    if getattr(args, "out", None) not in (None, "-") and written:
        inputs = {}
        for name in ("table", "data", "config"):
            path = getattr(args, name, None)
            if path and os.path.exists(path):
                inputs[path] = _digest(path)
        flags = {k: format_value(v) if isinstance(v, float) else v for k, v in vars(args).items()}
        man = RunManifest(args.command, flags, inputs, getattr(args, "seed", None),
                          wall_seconds=time.perf_counter() - t0,
                          outputs={path: _digest(path) for path in written})
        with open(_sidecar(args.out, "manifest.json"), "w") as fh:
            fh.write(_dumps(_clean(man.to_dict())))
    return code


if __name__ == "__main__":
    sys.exit(main())
