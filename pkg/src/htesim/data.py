"""Dataset containers, deterministic splitting, and CSV ingestion.

All containers are frozen after construction and safe to share across
workers; the split helpers are pure functions of (n, seed).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from ._rng import derive_rng

COLUMN_KINDS = ("binary", "ordered-discrete", "continuous")


class SchemaError(ValueError):
    """A column violates its declared kind."""


class ParseError(ValueError):
    """A cell could not be read as a number."""


@dataclass(frozen=True)
class Dataset:
    """A dense covariate matrix with per-column kind tags.

    Invariants (enforced at construction): no NaN/inf entries, binary columns
    contain only {0, 1}, and all columns share the same length n >= 1.
    """

    covariates: np.ndarray
    column_kinds: tuple[str, ...]
    column_names: tuple[str, ...]

    def __post_init__(self):
        X = np.ascontiguousarray(self.covariates, dtype=np.float64)
        object.__setattr__(self, "covariates", X)
        object.__setattr__(self, "column_kinds", tuple(self.column_kinds))
        object.__setattr__(self, "column_names", tuple(self.column_names))
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError(f"covariates must be a non-empty 2-D matrix, got shape {X.shape}")
        if len(self.column_kinds) != X.shape[1] or len(self.column_names) != X.shape[1]:
            raise ValueError("column_kinds and column_names must match the number of columns")
        for kind in self.column_kinds:
            if kind not in COLUMN_KINDS:
                raise SchemaError(f"unknown column kind {kind!r}; expected one of {COLUMN_KINDS}")
        if not np.isfinite(X).all():
            raise ValueError("covariates contain NaN or infinite entries")
        for j, kind in enumerate(self.column_kinds):
            if kind == "binary" and not np.isin(X[:, j], (0.0, 1.0)).all():
                raise SchemaError(f"binary column {self.column_names[j]!r} contains values outside {{0, 1}}")

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def k(self) -> int:
        return self.covariates.shape[1]

    def select_rows(self, rows: np.ndarray) -> "Dataset":
        return Dataset(self.covariates[rows], self.column_kinds, self.column_names)

    def column(self, name: str) -> np.ndarray:
        return self.covariates[:, self.column_names.index(name)]


@dataclass(frozen=True)
class Sample:
    """One replication's estimation data: covariates, treatment, outcome.

    ``true_ite`` is only present for simulated samples and feeds the
    infeasible benchmark estimator.
    """

    data: Dataset
    treatment: np.ndarray
    outcome: np.ndarray
    true_ite: np.ndarray | None = None

    def __post_init__(self):
        n = self.data.n
        d = np.ascontiguousarray(self.treatment, dtype=np.float64).ravel()
        y = np.ascontiguousarray(self.outcome, dtype=np.float64).ravel()
        if d.shape[0] != n or y.shape[0] != n:
            raise ValueError("treatment and outcome must have the same length as the covariates")
        if not np.isin(d, (0.0, 1.0)).all():
            raise ValueError("treatment must contain only 0 and 1")
        if not np.isfinite(y).all():
            raise ValueError("outcome contains NaN or infinite entries")
        object.__setattr__(self, "treatment", d)
        object.__setattr__(self, "outcome", y)
        if self.true_ite is not None:
            t = np.ascontiguousarray(self.true_ite, dtype=np.float64).ravel()
            if t.shape[0] != n:
                raise ValueError("true_ite must have the same length as the covariates")
            object.__setattr__(self, "true_ite", t)

    @property
    def n(self) -> int:
        return self.data.n


@dataclass(frozen=True)
class SplitPlan:
    """A partition of {0..n-1} into folds, reproducible from its seed."""

    fold_assignments: np.ndarray
    seed: int
    n_folds: int = field(default=0)

    def __post_init__(self):
        a = np.ascontiguousarray(self.fold_assignments, dtype=np.int64)
        object.__setattr__(self, "fold_assignments", a)
        n_folds = int(self.n_folds) if self.n_folds else int(a.max()) + 1
        object.__setattr__(self, "n_folds", n_folds)
        if a.min() < 0 or a.max() >= n_folds:
            raise ValueError("fold assignments out of range")
        sizes = np.bincount(a, minlength=n_folds)
        if sizes.min() == 0:
            raise ValueError("every fold must be non-empty")
        if sizes.max() - sizes.min() > 1:
            raise ValueError("fold sizes may differ by at most 1")

    @property
    def n(self) -> int:
        return self.fold_assignments.shape[0]

    def fold(self, f: int) -> np.ndarray:
        return np.flatnonzero(self.fold_assignments == f)

    def swapped(self) -> "SplitPlan":
        """Two-fold plan with the fold labels exchanged."""
        if self.n_folds != 2:
            raise ValueError("swapped() is only defined for two-fold plans")
        return SplitPlan(1 - self.fold_assignments, self.seed, 2)


@dataclass(frozen=True)
class PredictionSet:
    """One estimator's predictions for one replication at all three levels."""

    iate: np.ndarray
    gate: np.ndarray
    ate: float
    estimator_id: str
    replication_id: int


def make_folds(n: int, n_folds: int, seed: int) -> SplitPlan:
    """Uniform random partition into ``n_folds`` folds of near-equal size.

    Fold sizes differ by at most one (earlier folds take the remainder).
    """
    n, n_folds = int(n), int(n_folds)
    if n_folds < 2 or n_folds > n:
        raise ValueError(f"n_folds must be in [2, n]; got n_folds={n_folds}, n={n}")
    rng = derive_rng(seed, "fold-assignment")
    perm = rng.permutation(n)
    base, rem = divmod(n, n_folds)
    assignments = np.empty(n, dtype=np.int64)
    start = 0
    for f in range(n_folds):
        size = base + (1 if f < rem else 0)
        assignments[perm[start:start + size]] = f
        start += size
    return SplitPlan(assignments, seed, n_folds)


def split_half(n: int, seed: int) -> SplitPlan:
    """50:50 split; fold 0 holds ceil(n/2) units."""
    if n < 2:
        raise ValueError(f"need at least 2 units to split in half, got {n}")
    return make_folds(n, 2, seed)


def load_schema(path) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Read a schema file of ``name,kind`` lines; returns (names, kinds)."""
    names, kinds = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise SchemaError(f"{path}: line {lineno}: expected 'name,kind', got {row!r}")
            name, kind = row[0].strip(), row[1].strip()
            if kind not in COLUMN_KINDS:
                raise SchemaError(f"{path}: line {lineno}: unknown kind {kind!r}")
            names.append(name)
            kinds.append(kind)
    if not names:
        raise SchemaError(f"{path}: schema file is empty")
    return tuple(names), tuple(kinds)


def load_csv(path, schema: dict[str, str] | tuple[tuple[str, ...], tuple[str, ...]]) -> Dataset:
    """Read a headered CSV into a validated Dataset.

    ``schema`` maps column name -> kind (or is a (names, kinds) pair). The
    header must match the schema names exactly; rows with missing cells are
    rejected with their row index, malformed numbers with their line number.
    """
    if isinstance(schema, dict):
        names, kinds = tuple(schema.keys()), tuple(schema.values())
    else:
        names, kinds = schema
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: file is empty") from None
        if tuple(h.strip() for h in header) != names:
            raise SchemaError(f"{path}: header {header!r} does not match schema columns {list(names)!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(names):
                raise ParseError(f"{path}: line {lineno}: expected {len(names)} cells, got {len(row)}")
            values = []
            for j, cell in enumerate(row):
                cell = cell.strip()
                if cell == "" or cell.upper() in ("NA", "NAN"):
                    raise ParseError(f"{path}: row {lineno - 1} (line {lineno}): missing value in column {names[j]!r}")
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ParseError(
                        f"{path}: line {lineno}: malformed numeric cell {cell!r} in column {names[j]!r}"
                    ) from None
            rows.append(values)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return Dataset(np.array(rows, dtype=np.float64), kinds, names)


def format_float(x: float) -> str:
    """Shortest decimal string that round-trips the float64 exactly."""
    return repr(float(x))


def write_csv(path, data: Dataset) -> None:
    """Write a Dataset so that ``load_csv`` recovers it bit-for-bit."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(data.column_names)
        for row in data.covariates:
            writer.writerow([format_float(v) for v in row])


def write_schema(path, data: Dataset) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for name, kind in zip(data.column_names, data.column_kinds):
            writer.writerow([name, kind])
