import numpy as np
import pytest

from htesim import CausalForest, HonestProbabilityForest, HonestRegressionForest, load_forest, save_forest
from htesim._forest_kernels import SPLIT_CAUSAL, grow_tree


def _xy(n, k, seed, noise=1.0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, k))
    y = (X[:, 0] > 0).astype(float) + noise * rng.normal(size=n)
    return X, y


def test_constant_outcome_predicts_constant():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(50, 3))
    f = HonestRegressionForest(n_trees=10, mtry=3, seed=1).fit(X, np.full(50, 7.5))
    assert np.all(f.predict(rng.normal(size=(20, 3))) == 7.5)


def test_single_tree_min_leaf_n_returns_estimation_mean():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(40, 2))
    y = rng.normal(size=40)
    f = HonestRegressionForest(n_trees=1, min_leaf=40, mtry=2, seed=2).fit(X, y)
    # the single root leaf holds the tree's estimation subsample
    est_rows = f._est_rows_
    expected = y[f._order_][est_rows].mean()
    pred = f.predict(rng.normal(size=(5, 2)))
    assert np.allclose(pred, expected, rtol=0, atol=1e-12)


def test_step_function_out_of_sample_mse():
    X, y = _xy(2000, 5, seed=3, noise=0.01)
    f = HonestRegressionForest(n_trees=100, mtry=5, seed=4).fit(X, y)
    Xt, yt = _xy(1000, 5, seed=5, noise=0.0)
    mse = float(np.mean((f.predict(Xt) - yt) ** 2))
    assert mse < 0.05


def test_monotone_step_recovered_at_interior_points():
    X, y = _xy(2000, 1, seed=6, noise=0.01)
    f = HonestRegressionForest(n_trees=100, mtry=1, seed=7).fit(X, y)
    lo = f.predict(np.array([[-1.0], [-0.5]]))
    hi = f.predict(np.array([[0.5], [1.0]]))
    assert np.abs(lo - 0.0).max() < 0.1
    assert np.abs(hi - 1.0).max() < 0.1


def test_prediction_equals_weight_dot_product():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(300, 4))
    y = X[:, 0] + rng.normal(size=300)
    f = HonestRegressionForest(n_trees=30, mtry=4, seed=9).fit(X, y)
    Xq = rng.normal(size=(50, 4))
    w = f.weights(Xq)
    assert np.abs(w @ y - f.predict(Xq)).max() < 1e-10


def test_weights_nonnegative_and_row_stochastic():
    rng = np.random.default_rng(10)
    X = rng.normal(size=(200, 3))
    y = rng.normal(size=200)
    f = HonestRegressionForest(n_trees=25, mtry=3, seed=11).fit(X, y)
    w = f.weights(rng.normal(size=(100, 3)))
    assert w.min() >= 0
    assert np.abs(w.sum(axis=1) - 1.0).max() < 1e-12


def test_single_tree_leaf_weights_uniform():
    rng = np.random.default_rng(12)
    X = rng.normal(size=(40, 2))
    y = rng.normal(size=40)
    f = HonestRegressionForest(n_trees=1, min_leaf=40, mtry=2, seed=13).fit(X, y)
    w = f.weights(np.zeros((1, 2)))[0]
    nz = w[w > 0]
    m = f._est_rows_.shape[0]
    assert nz.size == m
    assert np.allclose(nz, 1.0 / m)


def test_duplicated_tree_gives_same_weights_as_single():
    rng = np.random.default_rng(14)
    X = rng.normal(size=(120, 3))
    y = X[:, 1] + rng.normal(size=120)
    f = HonestRegressionForest(n_trees=1, mtry=3, seed=15).fit(X, y)
    w1 = f.weights(rng.normal(size=(10, 3)))
    # duplicate the fitted tree's flat arrays into a two-tree model
    n_nodes = f._tree_offsets_[1]
    n_est = f._est_offsets_[1]
    f._tree_offsets_ = np.array([0, n_nodes, 2 * n_nodes])
    f._est_offsets_ = np.array([0, n_est, 2 * n_est])
    for name in ("_feature_", "_threshold_", "_left_", "_right_", "_leaf_value_", "_leaf_count_"):
        setattr(f, name, np.concatenate([getattr(f, name)] * 2))
    f._est_rows_ = np.concatenate([f._est_rows_] * 2)
    f._est_leaf_ = np.concatenate([f._est_leaf_, f._est_leaf_ + n_nodes])
    rng = np.random.default_rng(14)
    rng.normal(size=(120, 3))
    rng.normal(size=120)
    w2 = f.weights(rng.normal(size=(10, 3)))
    assert np.allclose(w1, w2, atol=1e-15)


def test_row_permutation_invariance_with_stable_ids():
    rng = np.random.default_rng(16)
    n = 150
    X = rng.normal(size=(n, 3))
    y = X[:, 0] + rng.normal(size=n)
    ids = rng.permutation(10_000)[:n]
    f1 = HonestRegressionForest(n_trees=20, mtry=3, seed=17).fit(X, y, unit_ids=ids)
    perm = rng.permutation(n)
    f2 = HonestRegressionForest(n_trees=20, mtry=3, seed=17).fit(X[perm], y[perm], unit_ids=ids[perm])
    Xq = rng.normal(size=(25, 3))
    assert np.array_equal(f1.predict(Xq), f2.predict(Xq))
    w1, w2 = f1.weights(Xq), f2.weights(Xq)
    assert np.array_equal(w1[:, np.argsort(ids)], w2[:, np.argsort(ids[perm])])


def test_same_seed_reproducible_different_seed_not():
    X, y = _xy(200, 3, seed=18)
    a = HonestRegressionForest(n_trees=10, mtry=3, seed=5).fit(X, y).predict(X[:20])
    b = HonestRegressionForest(n_trees=10, mtry=3, seed=5).fit(X, y).predict(X[:20])
    c = HonestRegressionForest(n_trees=10, mtry=3, seed=6).fit(X, y).predict(X[:20])
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_small_sample_and_fraction_validation():
    X = np.zeros((3, 2))
    with pytest.raises(ValueError, match="at least 4"):
        HonestRegressionForest(n_trees=1).fit(X, np.zeros(3))
    with pytest.raises(ValueError, match="fractions"):
        HonestRegressionForest(honest_fractions=(0.5, 0.5, 0.5)).fit(np.zeros((10, 1)), np.zeros(10))


def test_probability_forest_contract():
    rng = np.random.default_rng(19)
    n = 2000
    X = rng.normal(size=(n, 4))
    d = (rng.random(n) < 0.5).astype(float)
    f = HonestProbabilityForest(n_trees=50, mtry=4, seed=20).fit(X, d)
    p = f.predict(rng.normal(size=(500, 4)))
    assert abs(p.mean() - 0.5) < 0.05
    assert p.min() >= 0.01 and p.max() <= 0.99


def test_probability_forest_single_class_error():
    X = np.random.default_rng(21).normal(size=(20, 2))
    with pytest.raises(ValueError, match="single class"):
        HonestProbabilityForest(n_trees=2).fit(X, np.ones(20))


def test_causal_forest_constant_effect():
    rng = np.random.default_rng(22)
    n = 2000
    X = rng.normal(size=(n, 4))
    d = (rng.random(n) < 0.5).astype(float)
    y = 2.0 * d + rng.normal(size=n)
    f = CausalForest(n_trees=60, mtry=4, seed=23).fit(X, y, d)
    pred = f.predict(rng.normal(size=(500, 4)))
    assert abs(np.nanmean(pred) - 2.0) < 0.1


def test_causal_forest_null_effect():
    rng = np.random.default_rng(24)
    n = 2000
    X = rng.normal(size=(n, 4))
    d = (rng.random(n) < 0.5).astype(float)
    y = rng.normal(size=n)
    # min_leaf bounds the irreducible neighborhood noise of honest leaves
    f = CausalForest(n_trees=300, mtry=4, min_leaf=10, seed=25).fit(X, y, d)
    pred = f.predict(rng.normal(size=(500, 4)))
    assert np.nanmean(np.abs(pred)) < 0.15


def test_causal_node_without_treatment_variation_becomes_leaf():
    rng = np.random.default_rng(26)
    n = 32
    X = np.ascontiguousarray(rng.normal(size=(n, 2)))
    y = np.ascontiguousarray(rng.normal(size=n))
    d = np.ascontiguousarray(np.ones(n))  # no variation anywhere
    build = np.arange(0, 16, dtype=np.int64)
    est = np.arange(16, 32, dtype=np.int64)
    max_nodes = 2 * 16 + 1
    feature = np.empty(max_nodes, dtype=np.int32)
    threshold = np.empty(max_nodes)
    left = np.empty(max_nodes, dtype=np.int32)
    right = np.empty(max_nodes, dtype=np.int32)
    n_nodes, _, _ = grow_tree(X, y, d, build, est, SPLIT_CAUSAL, 2, 1, np.uint64(1),
                              feature, threshold, left, right)
    assert n_nodes == 1
    assert feature[0] == -1


def test_causal_single_leaf_difference_of_means():
    rng = np.random.default_rng(27)
    n = 60
    X = rng.normal(size=(n, 2))
    d = np.tile([1.0, 0.0], n // 2)
    y = np.where(d == 1, 3.0, 1.0)
    f = CausalForest(n_trees=1, min_leaf=n, mtry=2, seed=28).fit(X, y, d)
    pred = f.predict(rng.normal(size=(10, 2)))
    assert np.allclose(pred, 2.0, atol=1e-12)


def test_causal_weights_sum_to_one_per_arm_and_match_prediction():
    rng = np.random.default_rng(29)
    n = 400
    X = rng.normal(size=(n, 3))
    d = (rng.random(n) < 0.5).astype(float)
    y = 1.5 * d * X[:, 0] + rng.normal(size=n)
    f = CausalForest(n_trees=25, mtry=3, seed=30).fit(X, y, d)
    Xq = rng.normal(size=(50, 3))
    w1, w0 = f.weights(Xq)
    assert np.abs(w1.sum(axis=1) - 1.0).max() < 1e-12
    assert np.abs(w0.sum(axis=1) - 1.0).max() < 1e-12
    assert w1.min() >= 0 and w0.min() >= 0
    # weights only load on the matching arm
    assert np.all(w1[:, d == 0] == 0.0)
    assert np.all(w0[:, d == 1] == 0.0)
    y_work = f._y_work_[np.argsort(f._order_)]  # back to caller order
    plug_in = w1 @ y_work - w0 @ y_work
    assert np.abs(plug_in - f.predict(Xq)).max() < 1e-10


def test_causal_local_centering_with_constant_nuisances_matches_plain():
    rng = np.random.default_rng(31)
    n = 300
    X = rng.normal(size=(n, 3))
    d = (rng.random(n) < 0.5).astype(float)
    y = d * X[:, 0] + rng.normal(size=n)
    plain = CausalForest(n_trees=10, mtry=3, seed=32).fit(X, y, d)
    centered = CausalForest(n_trees=10, mtry=3, seed=32, centering="local").fit(
        X, y, d, p_hat=np.full(n, 0.5), mu_hat=np.zeros(n)
    )
    assert np.array_equal(plain._feature_, centered._feature_)
    assert np.array_equal(plain._threshold_, centered._threshold_)
    Xq = rng.normal(size=(40, 3))
    assert np.array_equal(plain.predict(Xq), centered.predict(Xq))


def test_causal_centering_requires_nuisances():
    X = np.random.default_rng(33).normal(size=(20, 2))
    d = np.tile([0.0, 1.0], 10)
    with pytest.raises(ValueError, match="requires p_hat and mu_hat"):
        CausalForest(n_trees=2, centering="local").fit(X, np.zeros(20), d)


def test_forest_serialization_roundtrip(tmp_path):
    X, y = _xy(100, 3, seed=34)
    f = HonestRegressionForest(n_trees=8, mtry=3, seed=35).fit(X, y)
    save_forest(f, tmp_path / "model.npz")
    g = load_forest(tmp_path / "model.npz")
    Xq = np.random.default_rng(36).normal(size=(30, 3))
    assert np.array_equal(f.predict(Xq), g.predict(Xq))
    assert g.get_params()["n_trees"] == 8

    rng = np.random.default_rng(37)
    d = (rng.random(100) < 0.5).astype(float)
    cf = CausalForest(n_trees=8, mtry=3, seed=38).fit(X, y, d)
    save_forest(cf, tmp_path / "cf.npz")
    cf2 = load_forest(tmp_path / "cf.npz")
    assert np.array_equal(cf.predict(Xq), cf2.predict(Xq), equal_nan=True)
