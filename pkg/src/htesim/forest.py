"""Honest random forests: regression, probability, and causal variants.

Each tree draws a fresh random partition of the training sample into a build
part (grows the tree), an estimation part (populates the leaves), and a
leave-out part, with fractions (0.25, 0.25, 0.50) by default. Predictions
are weighted averages of estimation-part outcomes, where the weights come
from within-leaf uniform neighborhoods averaged over trees.

The causal variant splits on node-level pseudo-outcomes

    rho_i = (D_i - mean_P D) * (Y_i - mean_P Y - (D_i - mean_P D) * slope_P)
            / var_P(D),

recomputed exactly in every parent node, and predicts the difference of the
two within-arm weighted outcome means. Local centering replaces D and Y by
D - p(x) and Y - mu(x) before splitting, with leaves storing the centered
outcomes and the original arms.

Sub-sampling is keyed by unit id (rows are canonicalized by id before any
randomness is drawn), so fits and predictions are invariant to permuting
training rows when stable ids are supplied.
"""

from __future__ import annotations

import json

import numpy as np
from sklearn.base import BaseEstimator

from . import _forest_kernels as fk
from ._rng import derive_rng, derive_seed
from .validation import check_binary, check_both_arms, check_matrix, check_vector

PROB_CLAMP = 0.01
_MODEL_FORMAT_VERSION = 1


def _check_fractions(fractions) -> tuple[float, float, float]:
    fb, fe, fl = (float(f) for f in fractions)
    if min(fb, fe, fl) < 0 or fb <= 0 or fe <= 0:
        raise ValueError("honest fractions must be nonnegative with positive build and estimate parts")
    if abs(fb + fe + fl - 1.0) > 1e-12:
        raise ValueError(f"honest fractions must sum to 1, got {fractions}")
    return fb, fe, fl


class _BaseHonestForest(BaseEstimator):
    """Shared fitting/prediction machinery; not used directly."""

    def __init__(self, n_trees=1000, mtry=70, min_leaf=1,
                 honest_fractions=(0.25, 0.25, 0.50), seed=0):
        self.n_trees = n_trees
        self.mtry = mtry
        self.min_leaf = min_leaf
        self.honest_fractions = honest_fractions
        self.seed = seed

    _is_causal = False

    def _validate_params(self, n, k):
        if self.n_trees < 1:
            raise ValueError("n_trees must be at least 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be at least 1")
        if self.mtry < 1:
            raise ValueError("mtry must be at least 1")
        _check_fractions(self.honest_fractions)
        if n < 4:
            raise ValueError(f"need at least 4 training rows for honest splits, got {n}")

    def _canonicalize(self, X, y, d, unit_ids):
        n = X.shape[0]
        if unit_ids is None:
            ids = np.arange(n, dtype=np.int64)
        else:
            ids = np.ascontiguousarray(unit_ids, dtype=np.int64).ravel()
            if ids.shape[0] != n or np.unique(ids).shape[0] != n:
                raise ValueError("unit_ids must be unique and match the number of rows")
        order = np.argsort(ids, kind="stable")
        self._order_ = order
        self._n_train_ = n
        return (np.ascontiguousarray(X[order]),
                np.ascontiguousarray(y[order]),
                None if d is None else np.ascontiguousarray(d[order]))

    def _grow_all(self, X, z_split, d_split):
        """Grow all trees; z_split/d_split are the (possibly centered) vectors
        the splitting rule sees."""
        n, k = X.shape
        fb, fe, _ = _check_fractions(self.honest_fractions)
        mtry_eff = min(int(self.mtry), k)
        mode = fk.SPLIT_CAUSAL if self._is_causal else fk.SPLIT_REGRESSION
        d_arr = d_split if d_split is not None else np.zeros(n)

        trees = []
        for t in range(int(self.n_trees)):
            rng = derive_rng(self.seed, "honest-partition", t)
            perm = rng.permutation(n)
            n_b = max(1, int(fb * n))
            n_e = max(1, int(fe * n))
            if n_b + n_e > n:
                raise ValueError("honest fractions leave no room for both build and estimate parts")
            build = np.ascontiguousarray(perm[:n_b], dtype=np.int64)
            est = np.ascontiguousarray(perm[n_b:n_b + n_e], dtype=np.int64)
            max_nodes = 2 * n_b + 1
            feature = np.empty(max_nodes, dtype=np.int32)
            threshold = np.empty(max_nodes)
            left = np.empty(max_nodes, dtype=np.int32)
            right = np.empty(max_nodes, dtype=np.int32)
            tree_seed = np.uint64(derive_seed(self.seed, "tree-stream", t))
            n_nodes, est_rows, est_leaf = fk.grow_tree(
                X, z_split, d_arr, build, est, mode,
                mtry_eff, int(self.min_leaf), tree_seed,
                feature, threshold, left, right,
            )
            trees.append((
                feature[:n_nodes].copy(), threshold[:n_nodes].copy(),
                left[:n_nodes].copy(), right[:n_nodes].copy(),
                est_rows, est_leaf,
            ))
        return trees

    def _flatten(self, trees):
        offsets = np.zeros(len(trees) + 1, dtype=np.int64)
        est_offsets = np.zeros(len(trees) + 1, dtype=np.int64)
        for t, (feat, _, _, _, est_rows, _) in enumerate(trees):
            offsets[t + 1] = offsets[t] + feat.shape[0]
            est_offsets[t + 1] = est_offsets[t] + est_rows.shape[0]
        total = offsets[-1]
        self._feature_ = np.empty(total, dtype=np.int32)
        self._threshold_ = np.empty(total)
        self._left_ = np.empty(total, dtype=np.int32)
        self._right_ = np.empty(total, dtype=np.int32)
        self._est_rows_ = np.empty(est_offsets[-1], dtype=np.int64)
        self._est_leaf_ = np.empty(est_offsets[-1], dtype=np.int32)
        for t, (feat, thr, lft, rgt, est_rows, est_leaf) in enumerate(trees):
            s = offsets[t]
            self._feature_[s:s + feat.shape[0]] = feat
            self._threshold_[s:s + feat.shape[0]] = thr
            self._left_[s:s + feat.shape[0]] = lft
            self._right_[s:s + feat.shape[0]] = rgt
            e = est_offsets[t]
            self._est_rows_[e:e + est_rows.shape[0]] = est_rows
            self._est_leaf_[e:e + est_rows.shape[0]] = est_leaf + s
        self._tree_offsets_ = offsets
        self._est_offsets_ = est_offsets

    def _check_query(self, X):
        X = check_matrix(X, "X")
        if X.shape[1] != self.k_:
            raise ValueError(f"X has {X.shape[1]} columns, model was fitted with {self.k_}")
        return X


class HonestRegressionForest(_BaseHonestForest):
    """Honest forest minimizing within-leaf outcome variance."""

    def fit(self, X, y, unit_ids=None):
        X = check_matrix(X)
        y = check_vector(y, X.shape[0])
        self._validate_params(*X.shape)
        self.k_ = X.shape[1]
        Xc, yc, _ = self._canonicalize(X, y, None, unit_ids)
        trees = self._grow_all(Xc, yc, None)
        self._flatten(trees)
        self._y_train_ = yc
        total = self._tree_offsets_[-1]
        counts = np.zeros(total, dtype=np.int64)
        sums = np.zeros(total)
        np.add.at(counts, self._est_leaf_, 1)
        np.add.at(sums, self._est_leaf_, yc[self._est_rows_])
        self._leaf_value_ = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
        self._leaf_count_ = counts
        return self

    def predict(self, X):
        X = self._check_query(X)
        return fk.forest_predict_regression(
            self._tree_offsets_, self._feature_, self._threshold_,
            self._left_, self._right_, self._leaf_value_, X,
        )

    def weights(self, X):
        """Row-stochastic weight matrix over the training rows (caller order)."""
        X = self._check_query(X)
        w = fk.forest_weights_regression(
            self._tree_offsets_, self._feature_, self._threshold_,
            self._left_, self._right_,
            self._est_offsets_, self._est_rows_, self._est_leaf_,
            self._leaf_count_, X, self._n_train_,
        )
        out = np.zeros_like(w)
        out[:, self._order_] = w
        return out


class HonestProbabilityForest(HonestRegressionForest):
    """Regression forest on a 0/1 outcome; predictions clamped to [0.01, 0.99]."""

    def fit(self, X, d, unit_ids=None):
        d = check_binary(d, np.asarray(X).shape[0], "d")
        check_both_arms(d)
        return super().fit(X, d, unit_ids)

    def predict(self, X):
        return np.clip(super().predict(X), PROB_CLAMP, 1.0 - PROB_CLAMP)


class CausalForest(_BaseHonestForest):
    """Honest causal forest with optional local centering.

    ``centering='none'`` splits on the raw (y, d); ``centering='local'``
    requires cross-fitted propensity and outcome predictions and splits on the
    residualized values, storing centered outcomes in the leaves.
    """

    _is_causal = True

    def __init__(self, n_trees=1000, mtry=70, min_leaf=1,
                 honest_fractions=(0.25, 0.25, 0.50), seed=0, centering="none"):
        super().__init__(n_trees, mtry, min_leaf, honest_fractions, seed)
        self.centering = centering

    def fit(self, X, y, d, p_hat=None, mu_hat=None, unit_ids=None):
        X = check_matrix(X)
        n = X.shape[0]
        y = check_vector(y, n)
        d = check_binary(d, n, "d")
        check_both_arms(d)
        self._validate_params(*X.shape)
        if self.centering not in ("none", "local"):
            raise ValueError(f"centering must be 'none' or 'local', got {self.centering!r}")
        if self.centering == "local":
            if p_hat is None or mu_hat is None:
                raise ValueError("centering='local' requires p_hat and mu_hat")
            p_hat = check_vector(p_hat, n, "p_hat")
            mu_hat = check_vector(mu_hat, n, "mu_hat")
            y_work = y - mu_hat
            d_work = d - p_hat
        else:
            y_work = y
            # splitting only uses within-node deviations of d, so any constant
            # shift is equivalent; d - 1/2 makes centering='none' coincide
            # bitwise with centering='local' under constant p_hat = 1/2
            d_work = d - 0.5
        self.k_ = X.shape[1]
        order_inputs = np.column_stack([y_work, d_work, d])
        Xc, _, packed = self._canonicalize(X, y, order_inputs, unit_ids)
        yw, dw, dc = packed[:, 0].copy(), packed[:, 1].copy(), packed[:, 2].copy()
        trees = self._grow_all(Xc, np.ascontiguousarray(yw), np.ascontiguousarray(dw))
        self._flatten(trees)
        self._d_train_ = dc
        self._y_work_ = yw
        total = self._tree_offsets_[-1]
        self._leaf_count1_ = np.zeros(total, dtype=np.int64)
        self._leaf_count0_ = np.zeros(total, dtype=np.int64)
        sum1 = np.zeros(total)
        sum0 = np.zeros(total)
        rows = self._est_rows_
        leaves = self._est_leaf_
        treated = dc[rows] > 0.5
        np.add.at(self._leaf_count1_, leaves[treated], 1)
        np.add.at(self._leaf_count0_, leaves[~treated], 1)
        np.add.at(sum1, leaves[treated], yw[rows[treated]])
        np.add.at(sum0, leaves[~treated], yw[rows[~treated]])
        self._leaf_mean1_ = np.where(self._leaf_count1_ > 0, sum1 / np.maximum(self._leaf_count1_, 1), 0.0)
        self._leaf_mean0_ = np.where(self._leaf_count0_ > 0, sum0 / np.maximum(self._leaf_count0_, 1), 0.0)
        return self

    def predict(self, X, on_missing_arm="nan"):
        """Treatment-effect predictions; queries whose leaves never contain one
        of the arms give NaN (or raise when ``on_missing_arm='raise'``)."""
        X = self._check_query(X)
        out = fk.forest_predict_causal(
            self._tree_offsets_, self._feature_, self._threshold_,
            self._left_, self._right_,
            self._leaf_mean1_, self._leaf_count1_,
            self._leaf_mean0_, self._leaf_count0_, X,
        )
        if on_missing_arm == "raise" and np.isnan(out).any():
            bad = int(np.isnan(out).sum())
            raise RuntimeError(f"{bad} query point(s) have no estimation units in one arm across all trees")
        return out

    def weights(self, X):
        """Per-arm weight matrices (w1, w0) over training rows, each row-stochastic."""
        X = self._check_query(X)
        w1, w0 = fk.forest_weights_causal(
            self._tree_offsets_, self._feature_, self._threshold_,
            self._left_, self._right_,
            self._est_offsets_, self._est_rows_, self._est_leaf_,
            self._leaf_count1_, self._leaf_count0_,
            self._d_train_, X, self._n_train_,
        )
        out1 = np.zeros_like(w1)
        out0 = np.zeros_like(w0)
        out1[:, self._order_] = w1
        out0[:, self._order_] = w0
        return out1, out0


_FOREST_CLASSES = {
    "HonestRegressionForest": HonestRegressionForest,
    "HonestProbabilityForest": HonestProbabilityForest,
    "CausalForest": CausalForest,
}

_ARRAY_FIELDS = (
    "_feature_", "_threshold_", "_left_", "_right_", "_tree_offsets_",
    "_est_offsets_", "_est_rows_", "_est_leaf_", "_order_",
    "_leaf_value_", "_leaf_count_", "_y_train_",
    "_leaf_mean1_", "_leaf_mean0_", "_leaf_count1_", "_leaf_count0_",
    "_d_train_", "_y_work_",
)


def save_forest(model, path) -> None:
    """Serialize a fitted forest to a self-describing .npz file."""
    meta = {
        "format_version": _MODEL_FORMAT_VERSION,
        "class": type(model).__name__,
        "params": model.get_params(),
        "k": model.k_,
        "n_train": model._n_train_,
    }
    arrays = {f: getattr(model, f) for f in _ARRAY_FIELDS if hasattr(model, f)}
    np.savez(path, __meta__=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)


def load_forest(path):
    with np.load(path) as archive:
        meta = json.loads(bytes(archive["__meta__"]).decode())
        if meta["format_version"] != _MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported forest file version {meta['format_version']}")
        params = meta["params"]
        if "honest_fractions" in params:
            params["honest_fractions"] = tuple(params["honest_fractions"])
        model = _FOREST_CLASSES[meta["class"]](**params)
        model.k_ = meta["k"]
        model._n_train_ = meta["n_train"]
        for f in _ARRAY_FIELDS:
            if f in archive:
                setattr(model, f, archive[f])
    return model
