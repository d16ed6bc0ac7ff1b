"""Polynomial/interaction feature expansion with collinearity pruning.

Expands a covariate matrix into base columns, all pairwise interactions of
the retained base columns, and powers 2-4 of the retained continuous
columns. Binary columns whose share of ones falls below 1% (or above 99%)
are excluded, as is one column of every pair correlated beyond ±0.99; every
removal is logged with its reason.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .data import Dataset
from .validation import check_matrix

RARE_BINARY_SHARE = 0.01
MAX_ABS_CORR = 0.99


@dataclass(frozen=True)
class Term:
    """One output column: a product of original columns raised to powers."""

    factors: tuple[tuple[int, int], ...]  # (original column index, exponent)

    def name(self, column_names) -> str:
        parts = []
        for j, p in self.factors:
            parts.append(column_names[j] if p == 1 else f"{column_names[j]}^{p}")
        return "*".join(parts)

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        out = np.ones(X.shape[0])
        for j, p in self.factors:
            out = out * (X[:, j] ** p if p > 1 else X[:, j])
        return out


@dataclass(frozen=True)
class FeatureExpansion:
    """The retained expansion terms plus a log of dropped ones."""

    base_columns: tuple[str, ...]
    generated_terms: tuple[Term, ...]
    drop_log: tuple[tuple[str, str], ...] = field(default_factory=tuple)
    source_names: tuple[str, ...] = ()
    out_kinds: tuple[str, ...] = ()

    @property
    def n_features(self) -> int:
        return len(self.generated_terms)

    def output_names(self) -> tuple[str, ...]:
        return tuple(t.name(self.source_names) for t in self.generated_terms)

    def apply(self, data: Dataset) -> Dataset:
        """Evaluate the retained terms on new data with the same columns."""
        if data.column_names != self.source_names:
            raise ValueError("dataset columns do not match the columns this expansion was built from")
        return Dataset(self.apply_matrix(data.covariates), self.out_kinds, self.output_names())

    def apply_matrix(self, X: np.ndarray) -> np.ndarray:
        """Evaluate the retained terms on a raw matrix with the same columns."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.source_names):
            raise ValueError(f"expected a matrix with {len(self.source_names)} columns, got shape {X.shape}")
        return np.column_stack([t.evaluate(X) for t in self.generated_terms])


def _term_kind(term: Term, kinds) -> str:
    facs = term.factors
    if all(kinds[j] == "binary" and p == 1 for j, p in facs):
        return "binary"
    if len(facs) == 1 and facs[0][1] == 1:
        return kinds[facs[0][0]]
    return "continuous"


def expand_features(data: Dataset) -> tuple[Dataset, FeatureExpansion]:
    """Expand a Dataset; returns the expanded Dataset and the reusable map."""
    X = data.covariates
    kinds = data.column_kinds
    names = data.column_names
    drop_log: list[tuple[str, str]] = []

    # Base retention: rare binaries and constants never enter the expansion.
    retained_base = []
    for j, kind in enumerate(kinds):
        col = X[:, j]
        if kind == "binary":
            share = col.mean()
            if share < RARE_BINARY_SHARE or share > 1 - RARE_BINARY_SHARE:
                drop_log.append((names[j], f"binary share {share:.4f} outside [{RARE_BINARY_SHARE}, {1 - RARE_BINARY_SHARE}]"))
                continue
        elif col.max() == col.min():
            drop_log.append((names[j], "constant column"))
            continue
        retained_base.append(j)

    terms: list[Term] = [Term(((j, 1),)) for j in retained_base]
    for a in range(len(retained_base)):
        for b in range(a + 1, len(retained_base)):
            terms.append(Term(((retained_base[a], 1), (retained_base[b], 1))))
    for j in retained_base:
        if kinds[j] == "continuous":
            for p in (2, 3, 4):
                terms.append(Term(((j, p),)))

    # Drop degenerate generated columns before the correlation filter.
    cols, kept_terms = [], []
    for t in terms:
        v = t.evaluate(X)
        tname = t.name(names)
        if v.max() == v.min():
            if len(t.factors) > 1 or t.factors[0][1] > 1:
                drop_log.append((tname, "constant column"))
                continue
            # retained base columns are never constant at this point
        if np.isin(v, (0.0, 1.0)).all():
            share = v.mean()
            if share < RARE_BINARY_SHARE or share > 1 - RARE_BINARY_SHARE:
                drop_log.append((tname, f"binary share {share:.4f} outside [{RARE_BINARY_SHARE}, {1 - RARE_BINARY_SHARE}]"))
                continue
        cols.append(v)
        kept_terms.append(t)

    # Correlation filter: keep the earlier column of any pair beyond the cap.
    M = np.column_stack(cols)
    corr = np.corrcoef(M, rowvar=False)
    keep = np.ones(len(kept_terms), dtype=bool)
    for j in range(1, len(kept_terms)):
        earlier = np.flatnonzero(keep[:j])
        hits = earlier[np.abs(corr[earlier, j]) > MAX_ABS_CORR]
        if hits.size:
            i = int(hits[0])
            drop_log.append(
                (kept_terms[j].name(names), f"|corr|={abs(corr[i, j]):.4f} with {kept_terms[i].name(names)}")
            )
            keep[j] = False

    final_terms = tuple(t for t, k in zip(kept_terms, keep) if k)
    if not final_terms:
        raise ValueError("feature expansion dropped every column")
    out_kinds = tuple(_term_kind(t, kinds) for t in final_terms)
    expansion = FeatureExpansion(
        base_columns=tuple(names[j] for j in retained_base),
        generated_terms=final_terms,
        drop_log=tuple(drop_log),
        source_names=names,
        out_kinds=out_kinds,
    )
    expanded = Dataset(M[:, keep], out_kinds, expansion.output_names())
    return expanded, expansion


class FeatureExpander(BaseEstimator, TransformerMixin):
    """Array-facing transformer wrapper around :func:`expand_features`.

    Column kinds are inferred when not given: a column whose values are all
    in {0, 1} is treated as binary, anything else as continuous.
    """

    def __init__(self, column_kinds=None, column_names=None):
        self.column_kinds = column_kinds
        self.column_names = column_names

    def _as_dataset(self, X) -> Dataset:
        X = check_matrix(X)
        names = tuple(self.column_names) if self.column_names else tuple(f"x{j + 1}" for j in range(X.shape[1]))
        if self.column_kinds is not None:
            kinds = tuple(self.column_kinds)
        else:
            kinds = tuple(
                "binary" if np.isin(X[:, j], (0.0, 1.0)).all() else "continuous" for j in range(X.shape[1])
            )
        return Dataset(X, kinds, names)

    def fit(self, X, y=None):
        _, self.expansion_ = expand_features(self._as_dataset(X))
        return self

    def transform(self, X):
        return self.expansion_.apply(self._as_dataset(X)).covariates

    def get_feature_names_out(self, input_features=None):
        return np.asarray(self.expansion_.output_names(), dtype=object)
