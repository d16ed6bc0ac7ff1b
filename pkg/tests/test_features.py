import numpy as np
import pytest

from htesim import Dataset, FeatureExpander, expand_features


def _dataset(X, kinds, names=None):
    names = names or tuple(f"x{j + 1}" for j in range(X.shape[1]))
    return Dataset(np.asarray(X, dtype=float), kinds, names)


def test_two_continuous_columns_give_nine_terms():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(50, 2))
    ds = _dataset(X, ("continuous", "continuous"), ("a", "b"))
    expanded, info = expand_features(ds)
    assert expanded.k == 9
    assert set(expanded.column_names) == {"a", "b", "a*b", "a^2", "a^3", "a^4", "b^2", "b^3", "b^4"}


def test_expansion_values_match_manual_products():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(30, 2))
    ds = _dataset(X, ("continuous", "continuous"), ("a", "b"))
    expanded, _ = expand_features(ds)
    cols = dict(zip(expanded.column_names, expanded.covariates.T))
    assert np.array_equal(cols["a*b"], X[:, 0] * X[:, 1])
    assert np.array_equal(cols["a^3"], X[:, 0] ** 3)


def test_rare_binary_dropped_and_logged():
    rng = np.random.default_rng(2)
    n = 1000
    X = np.column_stack([rng.normal(size=n), (rng.random(n) < 0.005).astype(float)])
    ds = _dataset(X, ("continuous", "binary"), ("a", "rare"))
    expanded, info = expand_features(ds)
    assert "rare" not in expanded.column_names
    assert any(name == "rare" and "share" in reason for name, reason in info.drop_log)


def test_duplicate_column_keeps_exactly_one():
    rng = np.random.default_rng(3)
    a = rng.normal(size=200)
    ds = _dataset(np.column_stack([a, a]), ("continuous", "continuous"), ("a", "a_copy"))
    expanded, info = expand_features(ds)
    assert "a" in expanded.column_names
    assert "a_copy" not in expanded.column_names
    assert any("corr" in reason for _, reason in info.drop_log)


def test_correlation_cap_holds_on_output():
    rng = np.random.default_rng(4)
    n = 400
    base = rng.normal(size=n)
    X = np.column_stack([base, base + 0.001 * rng.normal(size=n), rng.normal(size=n)])
    ds = _dataset(X, ("continuous",) * 3)
    expanded, _ = expand_features(ds)
    corr = np.corrcoef(expanded.covariates, rowvar=False)
    off = corr[~np.eye(corr.shape[0], dtype=bool)]
    assert np.abs(off).max() <= 0.99 + 1e-12


def test_ordered_discrete_gets_interactions_but_no_powers():
    rng = np.random.default_rng(5)
    X = np.column_stack([rng.integers(0, 3, size=100).astype(float), rng.normal(size=100)])
    ds = _dataset(X, ("ordered-discrete", "continuous"), ("lvl", "a"))
    expanded, _ = expand_features(ds)
    assert "lvl*a" in expanded.column_names
    assert "lvl^2" not in expanded.column_names
    assert "a^4" in expanded.column_names


def test_binary_interaction_of_rare_overlap_dropped():
    rng = np.random.default_rng(6)
    n = 2000
    b1 = (rng.random(n) < 0.06).astype(float)
    b2 = (rng.random(n) < 0.06).astype(float)
    ds = _dataset(np.column_stack([b1, b2]), ("binary", "binary"), ("b1", "b2"))
    expanded, info = expand_features(ds)
    # the product has share ~0.36%, below the 1% floor
    assert "b1*b2" not in expanded.column_names


def test_apply_reproduces_fit_output_and_checks_columns():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(60, 3))
    ds = _dataset(X, ("continuous",) * 3)
    expanded, info = expand_features(ds)
    again = info.apply(ds)
    assert np.array_equal(again.covariates, expanded.covariates)
    with pytest.raises(ValueError):
        info.apply(_dataset(X[:, :2], ("continuous",) * 2))


def test_transformer_wrapper_matches_functional_path():
    rng = np.random.default_rng(8)
    X = np.column_stack([rng.normal(size=80), (rng.random(80) < 0.4).astype(float)])
    tf = FeatureExpander().fit(X)
    out = tf.transform(X)
    ds = _dataset(X, ("continuous", "binary"))
    expanded, _ = expand_features(ds)
    assert np.array_equal(out, expanded.covariates)
    assert list(tf.get_feature_names_out()) == list(expanded.column_names)
    assert tf.get_params()["column_kinds"] is None
