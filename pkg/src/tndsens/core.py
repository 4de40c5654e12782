"""Contingency tables of exposure by outcome among tested units.

Cells are always stored in the canonical order

    (z, y) = (0, 0), (1, 0), (0, 1), (1, 1)

i.e. ``cells[0] = p00``, ``cells[1] = p10``, ``cells[2] = p01`` and
``cells[3] = p11``. ``z`` is the exposure and ``y`` the test result.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from .exceptions import EmptyRestriction, InvalidInput, InvalidTable, UndefinedOddsRatio

CELL_ORDER = ((0, 0), (1, 0), (0, 1), (1, 1))
CELL_LABELS = ("00", "10", "01", "11")
# +1 for the numerator cells of the odds ratio, -1 for the denominator cells
OR_SIGNS = np.array([1.0, -1.0, -1.0, 1.0])


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ObservedTable:
    """Normalized 2x2 joint distribution of exposure and outcome.

    Use :func:`validate_table` to build one from raw numbers.
    """

    cells: np.ndarray
    counts: Optional[Tuple[int, int, int, int]] = None
    n: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "cells", _frozen(self.cells))

    @property
    def positive(self) -> bool:
        return bool(np.all(self.cells > 0))

    p00 = property(lambda self: float(self.cells[0]))
    p10 = property(lambda self: float(self.cells[1]))
    p01 = property(lambda self: float(self.cells[2]))
    p11 = property(lambda self: float(self.cells[3]))

    def __eq__(self, other):
        if not isinstance(other, ObservedTable):
            return NotImplemented
        return (np.array_equal(self.cells, other.cells)
                and self.counts == other.counts and self.n == other.n)

    def __hash__(self):
        return hash((tuple(self.cells), self.counts, self.n))

    def __repr__(self):
        cells = ", ".join(f"{c:.6g}" for c in self.cells)
        extra = f", n={self.n}" if self.n is not None else ""
        return f"ObservedTable(({cells}){extra})"


@dataclass(frozen=True, eq=False)
class GeneralTable:
    """Joint table over categorical exposure ``z in 0..I`` and outcome ``y in 0..J``.

    ``cells[z, y]`` holds either counts or probabilities.
    """

    cells: np.ndarray
    is_counts: bool = False
    dims: Tuple[int, int] = field(init=False)

    def __post_init__(self):
        cells = _frozen(self.cells)
        if cells.ndim != 2:
            raise InvalidTable("general table must be two-dimensional")
        if np.any(~np.isfinite(cells)) or np.any(cells < 0):
            raise InvalidTable("general table entries must be finite and nonnegative")
        if not self.is_counts and abs(cells.sum() - 1.0) > 1e-12:
            raise InvalidTable(f"probabilities sum to {cells.sum()!r}, not 1")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "dims", cells.shape)


@dataclass(frozen=True)
class SensitivityParams:
    """Sensitivity parameters.

    delta : bound on the share of tested units with a nonzero hidden confounder.
    gamma : bound on per-cell probability ratios across confounder levels.
    xi : bound on the ratio of causal odds ratios across confounder levels.

    ``math.inf`` for gamma or xi drops that constraint.
    """

    delta: float = 0.0
    gamma: float = math.inf
    xi: float = math.inf

    def __post_init__(self):
        for name in ("delta", "gamma", "xi"):
            v = getattr(self, name)
            if isinstance(v, str):
                v = parse_param(v)
            object.__setattr__(self, name, float(v))
        if not 0.0 <= self.delta <= 1.0:
            raise InvalidInput(f"delta must lie in [0, 1], got {self.delta}")
        if math.isnan(self.gamma) or self.gamma < 1.0:
            raise InvalidInput(f"gamma must be >= 1, got {self.gamma}")
        if math.isnan(self.xi) or self.xi < 1.0:
            raise InvalidInput(f"xi must be >= 1, got {self.xi}")

    def as_dict(self):
        return {"delta": self.delta, "gamma": format_value(self.gamma),
                "xi": format_value(self.xi)}


def parse_param(text) -> float:
    """Parse a parameter value, accepting ``inf``/``Infinity``."""
    if isinstance(text, (int, float)):
        return float(text)
    t = str(text).strip().lower()
    if t in ("inf", "+inf", "infinity", "∞"):
        return math.inf
    return float(t)


def format_value(v):
    """JSON-friendly float: infinities become the string ``"inf"``."""
    if v is None:
        return None
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def validate_table(raw, as_counts: bool = False) -> ObservedTable:
    """Build a normalized :class:`ObservedTable` from four nonnegative numbers.

    Parameters
    ----------
    raw : sequence of 4 numbers or ObservedTable
        Cells in canonical order (p00, p10, p01, p11).
    as_counts : bool
        Treat ``raw`` as integer counts; the total is kept as ``n``.
    """
    if isinstance(raw, ObservedTable):
        if as_counts and raw.counts is not None:
            return validate_table(raw.counts, as_counts=True)
        # already normalized; renormalizing again could move the last ulp
        return raw
    vals = list(raw)
    if len(vals) != 4:
        raise InvalidTable(f"expected 4 cells, got {len(vals)}")
    if as_counts:
        counts = []
        for v in vals:
            if not float(v).is_integer():
                raise InvalidTable(f"count {v!r} is not an integer")
            counts.append(int(v))
        if any(c < 0 for c in counts):
            raise InvalidTable("negative count")
        n = sum(counts)
        if n == 0:
            raise InvalidTable("all cells are zero")
        cells = [float(Fraction(c, n)) for c in counts]
        return ObservedTable(cells, tuple(counts), n)

    arr = np.asarray(vals, dtype=float)
    if np.any(~np.isfinite(arr)):
        raise InvalidTable("non-finite cell")
    if np.any(arr < 0):
        raise InvalidTable("negative cell")
    total = arr.sum()
    if total <= 0:
        raise InvalidTable("all cells are zero")
    return ObservedTable(arr / total)


def observed_or(t: ObservedTable) -> float:
    """Cross-product ratio p11 * p00 / (p10 * p01)."""
    c = t.cells if isinstance(t, ObservedTable) else np.asarray(t, dtype=float)
    if np.any(c <= 0):
        raise UndefinedOddsRatio("odds ratio needs all four cells positive")
    return float(c[3] * c[0] / (c[1] * c[2]))


def odds_ratio(cells) -> float:
    """Odds ratio of a raw cell vector; zero cells give 0, inf or nan."""
    c = np.asarray(cells, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return float(c[3] * c[0] / (c[1] * c[2]))


def relabel_exposure(t: ObservedTable) -> ObservedTable:
    """Swap exposure levels: (p00, p10, p01, p11) -> (p10, p00, p11, p01)."""
    perm = [1, 0, 3, 2]
    counts = tuple(t.counts[i] for i in perm) if t.counts is not None else None
    return ObservedTable(t.cells[perm], counts, t.n)


def restrict_table(g: GeneralTable, z_pair: Tuple[int, int] = (0, 1),
                   y_pair: Tuple[int, int] = (0, 1)) -> ObservedTable:
    """Restrict a categorical table to two exposure and two outcome levels.

    The four selected cells are renormalized to sum to one. ``z_pair[0]``
    and ``y_pair[0]`` play the role of level 0.
    """
    (z0, z1), (y0, y1) = z_pair, y_pair
    if z0 == z1 or y0 == y1:
        raise InvalidInput("restriction needs two distinct levels on each axis")
    I, J = g.dims
    for z in (z0, z1):
        if not 0 <= z < I:
            raise InvalidInput(f"exposure level {z} out of range")
    for y in (y0, y1):
        if not 0 <= y < J:
            raise InvalidInput(f"outcome level {y} out of range")
    sel = [g.cells[z0, y0], g.cells[z1, y0], g.cells[z0, y1], g.cells[z1, y1]]
    if sum(sel) <= 0:
        raise EmptyRestriction("selected cells have zero total mass")
    return validate_table(sel, as_counts=g.is_counts)


# ---------------------------------------------------------------------------
# file formats


def read_strata_csv(source) -> Dict[str, ObservedTable]:
    """Read ``stratum,z,y,count`` rows into one count table per stratum.

    ``source`` is a path or an open text stream. Strata keep file order.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, newline="") as fh:
            text = fh.read()
    reader = csv.DictReader(io.StringIO(text))
    need = {"stratum", "z", "y", "count"}
    if reader.fieldnames is None or not need.issubset(reader.fieldnames):
        raise InvalidInput("table CSV needs header stratum,z,y,count")
    raw: Dict[str, Dict[Tuple[int, int], float]] = {}
    for row in reader:
        try:
            key = (int(row["z"]), int(row["y"]))
            count = float(row["count"])
        except (TypeError, ValueError) as exc:
            raise InvalidInput(f"malformed row {row}") from exc
        if key not in CELL_ORDER:
            raise InvalidInput(f"z and y must be 0 or 1, got {key}")
        cells = raw.setdefault(row["stratum"], {})
        if key in cells:
            raise InvalidInput(f"duplicate cell {key} in stratum {row['stratum']!r}")
        cells[key] = count
    if not raw:
        raise InvalidInput("no rows in table CSV")
    out = {}
    for stratum, cells in raw.items():
        missing = [k for k in CELL_ORDER if k not in cells]
        if missing:
            raise InvalidInput(f"stratum {stratum!r} is missing cells {missing}")
        out[stratum] = validate_table([cells[k] for k in CELL_ORDER], as_counts=True)
    return out


def write_strata_csv(tables: Dict[str, ObservedTable], dest) -> None:
    rows = ["stratum,z,y,count"]
    for stratum, t in tables.items():
        if t.counts is None:
            raise InvalidInput("only count tables can be written")
        for (z, y), c in zip(CELL_ORDER, t.counts):
            rows.append(f"{stratum},{z},{y},{c}")
    text = "\n".join(rows) + "\n"
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        with open(dest, "w", newline="") as fh:
            fh.write(text)


def read_strata_json(source) -> Dict[str, ObservedTable]:
    """Read ``{"stratum": ..., "counts": [c00, c10, c01, c11]}`` records.

    Accepts a single object, a list of objects, or JSON lines.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source) as fh:
            text = fh.read()
    text = text.strip()
    try:
        data = json.loads(text)
        records = data if isinstance(data, list) else [data]
    except json.JSONDecodeError:
        records = [json.loads(line) for line in text.splitlines() if line.strip()]
    out = {}
    for rec in records:
        if "counts" not in rec:
            raise InvalidInput("JSON table record needs a 'counts' field")
        out[str(rec.get("stratum", len(out)))] = validate_table(rec["counts"], as_counts=True)
    return out


def read_tables(path) -> Dict[str, ObservedTable]:
    """Dispatch on extension: ``.json``/``.jsonl`` or CSV."""
    p = str(path)
    if p.endswith((".json", ".jsonl")):
        return read_strata_json(p)
    return read_strata_csv(p)


def iter_cells(t: ObservedTable) -> Iterable[Tuple[Tuple[int, int], float]]:
    return zip(CELL_ORDER, (float(c) for c in t.cells))


def as_cells(x) -> np.ndarray:
    """Cell vector of an ObservedTable or a raw sequence."""
    if isinstance(x, ObservedTable):
        return x.cells
    return np.asarray(x, dtype=float)
