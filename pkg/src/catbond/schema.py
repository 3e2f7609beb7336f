"""Bond schema, CSV ingestion, and design-matrix construction.

A bond tranche is described by 19 predictors and one response:

========  =============================================================
column    meaning
========  =============================================================
EL        expected loss, percentage points of notional
PFL       probability of first loss, percentage points
SIZE      tranche size, USD millions
TERM      risk term, months
INDEM     1 if the trigger is indemnity-based
WIND      1 if the single covered peril is wind
EQ        1 if the single covered peril is earthquake
US        1 if the single covered territory is the United States
EU        1 if the single covered territory is Europe
JP        1 if the single covered territory is Japan
SR        1 if the lead structurer is the dominant sponsor group
IG        1 if the tranche carries an investment-grade rating
ROLX      property-catastrophe rate-on-line index at issuance
BBSPR     BB corporate bond spread at issuance, basis points
GC.GLOB   global peak-peril price index
GC.US     US wind price index
GC.AP     Asia-Pacific price index
GC.EU     European wind price index
GC.UK     UK price index
SPREAD    issuance spread, basis points (response)
========  =============================================================

Multi-peril and multi-territory deals carry zeros in all the
corresponding indicator columns, so at most one of WIND/EQ and at most
one of US/EU/JP may be set.  PFL is *not* required to exceed EL; real
data contains tranches quoted either way.

Spreads and EL/PFL live on different scales on disk (basis points
versus percentage points).  Model code in this package works on the
decimal spread ``SPREAD / BPS_PER_UNIT``; conversion happens at the
call sites, never inside the CSV layer.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, fields
from typing import Iterable, Sequence

import numpy as np

BPS_PER_UNIT = 10_000.0

#: canonical predictor order; also the on-disk column order (SPREAD last)
PREDICTORS = (
    "EL",
    "PFL",
    "SIZE",
    "TERM",
    "INDEM",
    "WIND",
    "EQ",
    "US",
    "EU",
    "JP",
    "SR",
    "IG",
    "ROLX",
    "BBSPR",
    "GC.GLOB",
    "GC.US",
    "GC.AP",
    "GC.EU",
    "GC.UK",
)

RESPONSE = "SPREAD"

BINARY_PREDICTORS = ("INDEM", "WIND", "EQ", "US", "EU", "JP", "SR", "IG")

#: territory/regional-index interactions of the full linear pricing model
DEFAULT_INTERACTIONS = (
    ("US", "GC.US"),
    ("JP", "GC.AP"),
    ("EU", "GC.EU"),
)

_ATTR_FOR = {name: name.lower().replace(".", "_") for name in PREDICTORS}
_ATTR_FOR[RESPONSE] = "spread"


class CatbondError(Exception):
    """Base class for all errors raised by this package."""


class MissingColumn(CatbondError):
    """A required CSV column is absent."""

    def __init__(self, column: str):
        self.column = column
        super().__init__(f"missing required column {column!r}")


class ParseError(CatbondError):
    """A CSV cell could not be parsed, or the file shape is invalid."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        where = ""
        if row is not None:
            where = f" (row {row}" + (f", column {column}" if column else "") + ")"
        super().__init__(message + where)


class InvariantViolation(CatbondError):
    """A record violates a schema invariant."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"{message} (row {row})"
        super().__init__(message)


class UnknownPredictor(CatbondError):
    """A feature specification references a predictor that does not exist."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(
            f"unknown predictor {name!r}; valid names: {', '.join(PREDICTORS)}"
        )


@dataclass
class BondRecord:
    """One bond tranche.  Field names mirror the CSV columns, lowercased."""

    el: float
    pfl: float
    size: float
    term: float
    indem: int
    wind: int
    eq: int
    us: int
    eu: int
    jp: int
    sr: int
    ig: int
    rolx: float
    bbspr: float
    gc_glob: float
    gc_us: float
    gc_ap: float
    gc_eu: float
    gc_uk: float
    spread: float | None = None

    def validate(self, row: int | None = None) -> None:
        vals = {f.name: getattr(self, f.name) for f in fields(self)}
        for name, v in vals.items():
            if v is None:
                continue
            if not np.isfinite(v):
                raise InvariantViolation(f"{name.upper()} is not finite", row)
        for name in BINARY_PREDICTORS:
            v = vals[_ATTR_FOR[name]]
            if v not in (0, 1):
                raise InvariantViolation(f"{name} must be 0 or 1, got {v!r}", row)
        if self.us + self.eu + self.jp > 1:
            raise InvariantViolation("at most one of US, EU, JP may be 1", row)
        if self.wind + self.eq > 1:
            raise InvariantViolation("at most one of WIND, EQ may be 1", row)
        if self.el < 0:
            raise InvariantViolation("EL must be >= 0", row)
        if self.pfl < 0:
            raise InvariantViolation("PFL must be >= 0", row)
        if self.size <= 0:
            raise InvariantViolation("SIZE must be > 0", row)
        if self.term <= 0:
            raise InvariantViolation("TERM must be > 0", row)
        if self.spread is not None and self.spread <= 0:
            raise InvariantViolation("SPREAD must be > 0", row)


class Dataset:
    """Column store over bond records.

    Columns are float64 arrays keyed by CSV column name.  ``spread`` is
    ``None`` for prediction-only data loaded from a CSV without a
    SPREAD column.
    """

    def __init__(self, columns: dict[str, np.ndarray], spread: np.ndarray | None = None):
        missing = [c for c in PREDICTORS if c not in columns]
        if missing:
            raise MissingColumn(missing[0])
        n = len(next(iter(columns.values())))
        self.columns = {c: np.asarray(columns[c], dtype=np.float64) for c in PREDICTORS}
        for c, arr in self.columns.items():
            if arr.shape != (n,):
                raise ParseError(f"column {c} has length {arr.shape}, expected ({n},)")
        self.spread = None if spread is None else np.asarray(spread, dtype=np.float64)
        if self.spread is not None and self.spread.shape != (n,):
            raise ParseError("SPREAD length does not match predictor columns")
        self.n = n

    def __len__(self) -> int:
        return self.n

    @property
    def has_response(self) -> bool:
        return self.spread is not None

    def column(self, name: str) -> np.ndarray:
        if name == RESPONSE:
            if self.spread is None:
                raise MissingColumn(RESPONSE)
            return self.spread
        if name not in self.columns:
            raise UnknownPredictor(name)
        return self.columns[name]

    def take(self, idx: Sequence[int] | np.ndarray) -> "Dataset":
        idx = np.asarray(idx, dtype=np.intp)
        cols = {c: a[idx] for c, a in self.columns.items()}
        spread = None if self.spread is None else self.spread[idx]
        return Dataset(cols, spread)

    def records(self) -> list[BondRecord]:
        out = []
        for i in range(self.n):
            kw = {_ATTR_FOR[c]: self.columns[c][i] for c in PREDICTORS}
            for b in BINARY_PREDICTORS:
                kw[_ATTR_FOR[b]] = int(kw[_ATTR_FOR[b]])
            kw["spread"] = None if self.spread is None else float(self.spread[i])
            out.append(BondRecord(**kw))
        return out

    @classmethod
    def from_records(cls, records: Iterable[BondRecord], validate: bool = True) -> "Dataset":
        records = list(records)
        if not records:
            raise InvariantViolation("dataset must contain at least one record")
        cols = {c: np.empty(len(records)) for c in PREDICTORS}
        spreads = np.empty(len(records))
        any_spread = any(r.spread is not None for r in records)
        all_spread = all(r.spread is not None for r in records)
        if any_spread and not all_spread:
            raise InvariantViolation("either every record has a spread or none does")
        for i, r in enumerate(records):
            if validate:
                r.validate(row=i + 1)
            for c in PREDICTORS:
                cols[c][i] = getattr(r, _ATTR_FOR[c])
            if all_spread:
                spreads[i] = r.spread
        return cls(cols, spreads if all_spread else None)

    def validate(self) -> None:
        """Vectorised re-check of the record invariants."""
        for c in PREDICTORS:
            if not np.all(np.isfinite(self.columns[c])):
                i = int(np.flatnonzero(~np.isfinite(self.columns[c]))[0])
                raise InvariantViolation(f"{c} is not finite", row=i + 1)
        for c in BINARY_PREDICTORS:
            a = self.columns[c]
            bad = (a != 0) & (a != 1)
            if bad.any():
                i = int(np.flatnonzero(bad)[0])
                raise InvariantViolation(f"{c} must be 0 or 1", row=i + 1)
        terr = self.columns["US"] + self.columns["EU"] + self.columns["JP"]
        if (terr > 1).any():
            i = int(np.flatnonzero(terr > 1)[0])
            raise InvariantViolation("at most one of US, EU, JP may be 1", row=i + 1)
        peril = self.columns["WIND"] + self.columns["EQ"]
        if (peril > 1).any():
            i = int(np.flatnonzero(peril > 1)[0])
            raise InvariantViolation("at most one of WIND, EQ may be 1", row=i + 1)
        for c, lo, strict in (("EL", 0.0, False), ("PFL", 0.0, False),
                              ("SIZE", 0.0, True), ("TERM", 0.0, True)):
            a = self.columns[c]
            bad = (a <= lo) if strict else (a < lo)
            if bad.any():
                i = int(np.flatnonzero(bad)[0])
                op = ">" if strict else ">="
                raise InvariantViolation(f"{c} must be {op} {lo:g}", row=i + 1)
        if self.spread is not None:
            if not np.all(np.isfinite(self.spread)):
                i = int(np.flatnonzero(~np.isfinite(self.spread))[0])
                raise InvariantViolation("SPREAD is not finite", row=i + 1)
            if (self.spread <= 0).any():
                i = int(np.flatnonzero(self.spread <= 0)[0])
                raise InvariantViolation("SPREAD must be > 0", row=i + 1)


@dataclass(frozen=True)
class FeatureSpec:
    """Selection of predictor columns and pairwise interactions.

    ``predictors`` are main-effect columns in canonical order;
    ``interactions`` are (a, b) pairs appended as elementwise products
    named ``"a:b"``.  The default is the full pricing design: all 19
    predictors plus the three territory/price-index interactions.
    """

    predictors: tuple[str, ...] = PREDICTORS
    interactions: tuple[tuple[str, str], ...] = DEFAULT_INTERACTIONS

    def __post_init__(self):
        seen = set()
        for p in self.predictors:
            if p not in PREDICTORS:
                raise UnknownPredictor(p)
            if p in seen:
                raise InvariantViolation(f"duplicate predictor {p!r} in feature spec")
            seen.add(p)
        for a, b in self.interactions:
            for name in (a, b):
                if name not in PREDICTORS:
                    raise UnknownPredictor(name)

    @classmethod
    def full(cls) -> "FeatureSpec":
        return cls()

    @classmethod
    def main_effects(cls, predictors: Sequence[str] = PREDICTORS) -> "FeatureSpec":
        return cls(predictors=tuple(predictors), interactions=())

    @property
    def names(self) -> list[str]:
        return list(self.predictors) + [f"{a}:{b}" for a, b in self.interactions]


def design_matrix(data: Dataset, spec: FeatureSpec | None = None) -> tuple[np.ndarray, list[str]]:
    """Build the model matrix for ``spec`` (no intercept column).

    Returns
    -------
    X : ndarray of shape (n, k)
        Main-effect columns in spec order, then interaction products.
    names : list of str
        Column names, interactions as ``"a:b"``.
    """
    if spec is None:
        spec = FeatureSpec.full()
    cols = [data.column(p) for p in spec.predictors]
    for a, b in spec.interactions:
        cols.append(data.column(a) * data.column(b))
    X = np.column_stack(cols) if cols else np.empty((data.n, 0))
    return X, spec.names


def _parse_cell(raw: str, column: str, row: int) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ParseError(f"cannot parse value {raw!r}", row=row, column=column) from None


def _format_cell(v: float) -> str:
    # integers print without a trailing ".0"; floats use shortest
    # round-trip repr so write -> load is exact
    f = float(v)
    if f.is_integer() and abs(f) < 1e15:
        return str(int(f))
    return repr(f)


def load_csv(path_or_buf, require_response: bool = False, validate: bool = True) -> Dataset:
    """Load a bond CSV.

    Parameters
    ----------
    path_or_buf : str, Path or text file object
        CSV with the canonical columns; SPREAD is optional unless
        ``require_response``.
    require_response : bool
        Raise :class:`MissingColumn` if SPREAD is absent.
    validate : bool
        Check schema invariants after parsing.
    """
    if hasattr(path_or_buf, "read"):
        return _load_csv_file(path_or_buf, require_response, validate)
    with open(path_or_buf, newline="") as fh:
        return _load_csv_file(fh, require_response, validate)


def _load_csv_file(fh, require_response: bool, validate: bool) -> Dataset:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file: no header row") from None
    header = [h.strip() for h in header]
    known = set(PREDICTORS) | {RESPONSE}
    for h in header:
        if h not in known:
            raise ParseError(f"unknown column {h!r} in header", row=0)
    if len(set(header)) != len(header):
        raise ParseError("duplicate column in header", row=0)
    for c in PREDICTORS:
        if c not in header:
            raise MissingColumn(c)
    has_spread = RESPONSE in header
    if require_response and not has_spread:
        raise MissingColumn(RESPONSE)

    pos = {c: header.index(c) for c in header}
    raw_cols: dict[str, list[float]] = {c: [] for c in header}
    nrow = 0
    for row_i, row in enumerate(reader, start=1):
        if not row or (len(row) == 1 and row[0].strip() == ""):
            continue
        if len(row) != len(header):
            raise ParseError(
                f"expected {len(header)} fields, got {len(row)}", row=row_i
            )
        for c in header:
            raw_cols[c].append(_parse_cell(row[pos[c]].strip(), c, row_i))
        nrow += 1
    if nrow == 0:
        raise ParseError("no data rows")

    cols = {c: np.asarray(raw_cols[c]) for c in PREDICTORS}
    spread = np.asarray(raw_cols[RESPONSE]) if has_spread else None
    data = Dataset(cols, spread)
    if validate:
        data.validate()
    return data


def write_csv(data: Dataset, path_or_buf) -> None:
    """Write ``data`` in canonical column order (SPREAD last, if present).

    Output is deterministic: one formatting rule per cell, ``\\n`` line
    endings, no quoting.  Writing the same dataset twice produces
    byte-identical files.
    """
    if hasattr(path_or_buf, "write"):
        _write_csv_file(data, path_or_buf)
    else:
        with open(path_or_buf, "w", newline="") as fh:
            _write_csv_file(data, fh)


def _write_csv_file(data: Dataset, fh) -> None:
    header = list(PREDICTORS) + ([RESPONSE] if data.has_response else [])
    fh.write(",".join(header) + "\n")
    for i in range(data.n):
        cells = [_format_cell(data.columns[c][i]) for c in PREDICTORS]
        if data.has_response:
            cells.append(_format_cell(data.spread[i]))
        fh.write(",".join(cells) + "\n")


def dumps_csv(data: Dataset) -> str:
    """Render the canonical CSV to a string (used for hashing/tests)."""
    buf = io.StringIO()
    _write_csv_file(data, buf)
    return buf.getvalue()
