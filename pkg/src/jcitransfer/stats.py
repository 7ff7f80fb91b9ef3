"""Conditional independence testing on tabular multi-domain data.

Partial correlation with a Fisher z p-value, and the conversion of p-values
into weighted constraints for the solver.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import norm

from .admg import CONTEXT, SYSTEM, SeparationQuery, VarId, make_universe

#: Largest |r| passed to atanh.
R_CLAMP = 1.0 - 1e-12
#: Smallest p-value used when computing weights.
P_FLOOR = 1e-16


class DataError(ValueError):
    """Raised when a dataset violates its invariants."""


class InsufficientSamples(DataError):
    pass


class Untestable(DataError):
    """The statement cannot be tested on the given rows (singular covariance)."""


@dataclass(frozen=True)
class DomainDataset:
    """Multi-domain data with a source/target indicator ``c1`` and target ``y``.

    ``rows`` holds one sample per row in universe order; missing target values
    are NaN and flagged by ``y_mask``.
    """

    universe: tuple[VarId, ...]
    rows: np.ndarray
    c1: int
    y: int

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[1] != len(self.universe):
            raise DataError(
                f"rows have shape {rows.shape}, expected (n, {len(self.universe)})"
            )
        object.__setattr__(self, "universe", tuple(self.universe))
        object.__setattr__(self, "rows", rows)
        if self.universe[self.c1].role != CONTEXT:
            raise DataError(f"c1 column {self.names[self.c1]} must be a context variable")
        if self.universe[self.y].role != SYSTEM:
            raise DataError(f"target column {self.names[self.y]} must be a system variable")
        c1 = rows[:, self.c1]
        bad = np.flatnonzero(~np.isin(c1, (0.0, 1.0)))
        if bad.size:
            raise DataError(
                f"column {self.names[self.c1]} must contain only 0/1; row {bad[0]} has {c1[bad[0]]!r}"
            )
        missing = np.isnan(rows)
        missing[:, self.y] = False
        if missing.any():
            r, c = np.argwhere(missing)[0]
            raise DataError(f"missing value at row {r}, column {self.names[c]}")

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.universe]

    @property
    def y_mask(self) -> np.ndarray:
        return np.isnan(self.rows[:, self.y])

    @property
    def source(self) -> np.ndarray:
        return self.rows[self.rows[:, self.c1] == 0]

    @property
    def target(self) -> np.ndarray:
        return self.rows[self.rows[:, self.c1] == 1]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DataError(f"unknown column {name!r}") from None

    def validate_task(self) -> None:
        """Check the task layout: Y missing exactly on target rows, both sides non-empty."""
        in_target = self.rows[:, self.c1] == 1
        mask = self.y_mask
        wrong = np.flatnonzero(mask != in_target)
        if wrong.size:
            r = wrong[0]
            state = "missing" if mask[r] else "present"
            raise DataError(
                f"row {r}: target {self.names[self.y]} is {state} but "
                f"{self.names[self.c1]}={int(in_target[r])}"
            )
        if not (~in_target).any():
            raise InsufficientSamples("no source rows")
        if not in_target.any():
            raise InsufficientSamples("no target rows")

    def masked(self) -> "DomainDataset":
        """Copy with Y hidden wherever c1 = 1."""
        rows = self.rows.copy()
        rows[rows[:, self.c1] == 1, self.y] = np.nan
        return DomainDataset(self.universe, rows, self.c1, self.y)


@dataclass(frozen=True)
class CiTestResult:
    r: float
    p: float
    n: int
    cond_size: int


@dataclass(frozen=True)
class WeightedConstraint:
    query: SeparationQuery
    independent: bool
    weight: float

    def __post_init__(self):
        if not self.weight >= 0:
            raise ValueError(f"constraint weight must be >= 0, got {self.weight}")
        object.__setattr__(self, "query", self.query.canonical())

    @property
    def hard(self) -> bool:
        return math.isinf(self.weight)


def partial_correlation(
    data: np.ndarray, x: int, y: int, cond: Sequence[int] = ()
) -> float:
    """Sample partial correlation of columns ``x`` and ``y`` given ``cond``.

    Computed from the covariance of ``{x, y} | cond`` through the Schur
    complement of the conditioning block, which equals
    ``-P[x, y] / sqrt(P[x, x] P[y, y])`` for the precision matrix ``P``
    whenever the full block is invertible, and stays defined (|r| = 1) when
    x and y are collinear given ``cond``.
    """
    cond = list(cond)
    data = np.asarray(data, dtype=float)
    n = data.shape[0]
    if n <= len(cond) + 3:
        raise InsufficientSamples(f"{n} rows for a conditioning set of size {len(cond)}")
    cols = [x, y] + cond
    sub = data[:, cols]
    if np.isnan(sub).any():
        raise DataError("missing values among the tested columns")
    cov = np.cov(sub, rowvar=False, ddof=1).reshape(len(cols), len(cols))
    scale = np.sqrt(np.diag(cov))
    if np.any(scale <= 1e-12 * max(1.0, float(np.abs(sub).max()))):
        raise Untestable("constant column")
    corr = cov / np.outer(scale, scale)
    a = corr[:2, :2]
    if cond:
        s = corr[2:, 2:]
        if np.linalg.cond(s) > 1e10:
            raise Untestable("singular conditioning covariance")
        b = corr[:2, 2:]
        a = a - b @ np.linalg.solve(s, b.T)
    if a[0, 0] <= 1e-10 or a[1, 1] <= 1e-10:
        raise Untestable("variable determined by the conditioning set")
    r = a[0, 1] / math.sqrt(a[0, 0] * a[1, 1])
    return float(min(1.0, max(-1.0, r)))


def fisher_z_p(r: float, n: int, cond_size: int) -> float:
    if n <= cond_size + 3:
        raise InsufficientSamples(f"n={n} too small for cond_size={cond_size}")
    if not abs(r) <= 1.0:
        raise ValueError(f"|r| must be <= 1, got {r}")
    z = math.sqrt(n - cond_size - 3) * math.atanh(min(abs(r), R_CLAMP))
    return float(min(1.0, 2.0 * norm.sf(z)))


def ci_test(data: np.ndarray, x: int, y: int, cond: Sequence[int] = ()) -> CiTestResult:
    r = partial_correlation(data, x, y, cond)
    n = np.asarray(data).shape[0]
    return CiTestResult(r=r, p=fisher_z_p(r, n, len(cond)), n=n, cond_size=len(cond))


def to_constraint(q: SeparationQuery, p: float, alpha: float) -> WeightedConstraint:
    """Independent iff ``p >= alpha``, weighted by ``|log p - log alpha|``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p-value out of range: {p}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    weight = abs(math.log(max(p, P_FLOOR)) - math.log(alpha))
    return WeightedConstraint(q, p >= alpha, weight)


# -- CSV + sidecar -------------------------------------------------------------


def read_dataset(csv_path: str | Path, meta_path: str | Path | None = None) -> DomainDataset:
    """Load a dataset CSV and its JSON sidecar (default: ``<csv>.json``)."""
    csv_path = Path(csv_path)
    meta_path = Path(meta_path) if meta_path else csv_path.with_suffix(".json")
    try:
        meta = json.loads(meta_path.read_text())
        context, system = list(meta["context"]), list(meta["system"])
        c1_name, y_name = meta["c1"], meta["target"]
    except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read sidecar {meta_path}: {exc}") from exc
    universe = make_universe(context, system)
    names = [v.name for v in universe]
    with csv_path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{csv_path} is empty") from None
        missing = set(names) - set(header)
        if missing:
            raise DataError(f"{csv_path} lacks columns {sorted(missing)}")
        order = [header.index(name) for name in names]
        rows = []
        for lineno, record in enumerate(reader, start=2):
            if len(record) != len(header):
                raise DataError(f"{csv_path}:{lineno}: expected {len(header)} fields")
            values = []
            for col, j in zip(names, order):
                cell = record[j].strip()
                if cell == "":
                    values.append(np.nan)
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    raise DataError(f"{csv_path}:{lineno}: bad number {cell!r} in {col}") from None
            rows.append(values)
    if c1_name not in names or y_name not in names:
        raise DataError(f"sidecar names c1={c1_name!r}, target={y_name!r} not among columns")
    data = np.array(rows, dtype=float).reshape(len(rows), len(names))
    return DomainDataset(universe, data, names.index(c1_name), names.index(y_name))


def _format_cell(value: float, role: str) -> str:
    if np.isnan(value):
        return ""
    if role == CONTEXT and float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def write_dataset(ds: DomainDataset, csv_path: str | Path, meta_path: str | Path | None = None) -> None:
    csv_path = Path(csv_path)
    meta_path = Path(meta_path) if meta_path else csv_path.with_suffix(".json")
    roles = [v.role for v in ds.universe]
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ds.names)
        for row in ds.rows:
            writer.writerow([_format_cell(v, r) for v, r in zip(row, roles)])
    meta = {
        "context": [v.name for v in ds.universe if v.role == CONTEXT],
        "system": [v.name for v in ds.universe if v.role == SYSTEM],
        "c1": ds.names[ds.c1],
        "target": ds.names[ds.y],
    }
    meta_path.write_text(json.dumps(meta, indent=2) + "\n")
