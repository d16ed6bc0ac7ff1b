import numpy as np
import pytest

from htesim import ConvergenceError, LogisticLasso, WeightedLasso
from htesim._lasso_kernels import cd_path
from htesim.lasso import lasso_objective


def _wls_oracle(X, y, w):
    """Weighted least squares by normal equations, intercept included."""
    Z = np.column_stack([np.ones(len(y)), X])
    A = Z.T @ (w[:, None] * Z)
    b = Z.T @ (w * y)
    theta = np.linalg.solve(A, b)
    return theta[0], theta[1:]


def test_lambda_zero_matches_normal_equations_unit_weights():
    rng = np.random.default_rng(10)
    X = rng.normal(size=(50, 2))
    y = 1.5 + X @ np.array([2.0, -3.0]) + rng.normal(size=50)
    model = WeightedLasso(lambda_grid=[0.0]).fit(X, y)
    icept, coef = _wls_oracle(X, y, np.ones(50))
    assert abs(model.intercept_ - icept) < 1e-6
    assert np.abs(model.coef_ - coef).max() < 1e-6


def test_lambda_zero_matches_normal_equations_general_weights():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(80, 3))
    y = -0.5 + X @ np.array([1.0, 0.0, 2.5]) + rng.normal(size=80)
    w = rng.uniform(0.1, 3.0, size=80)
    model = WeightedLasso(lambda_grid=[0.0]).fit(X, y, sample_weight=w)
    icept, coef = _wls_oracle(X, y, w)
    assert abs(model.intercept_ - icept) < 1e-6
    assert np.abs(model.coef_ - coef).max() < 1e-6


def test_all_slopes_zero_at_and_above_lambda_max():
    rng = np.random.default_rng(12)
    X = rng.normal(size=(100, 5))
    y = X @ np.array([1.0, -1.0, 0.5, 0.0, 0.0]) + rng.normal(size=100)
    model = WeightedLasso(seed=1).fit(X, y)
    assert model.lambdas_[0] == pytest.approx(model.lambda_max_)
    assert np.all(model.coef_path_[0] == 0.0)
    above = WeightedLasso(lambda_grid=[2.0 * model.lambda_max_]).fit(X, y)
    assert np.all(above.coef_ == 0.0)


def test_orthonormal_design_soft_threshold_oracle():
    rng = np.random.default_rng(13)
    n, p = 64, 6
    Q, _ = np.linalg.qr(rng.normal(size=(n, p)))
    X = Q * np.sqrt(n)  # columns orthogonal with (1/n) X_j'X_j = 1
    beta = np.array([3.0, -2.0, 1.0, 0.5, 0.0, 0.0])
    y = X @ beta + rng.normal(size=n) * 0.1
    lam = 0.8
    model = WeightedLasso(lambda_grid=[lam], standardize=False, fit_intercept=False).fit(X, y)
    z = X.T @ y / n
    oracle = np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)
    assert np.abs(model.coef_ - oracle).max() < 1e-8


def test_objective_monotone_nonincreasing_per_sweep():
    rng = np.random.default_rng(14)
    n, p = 60, 8
    X = rng.normal(size=(n, p)) @ (np.eye(p) + 0.4 * rng.normal(size=(p, p)))
    y = X @ rng.normal(size=p) + rng.normal(size=n)
    w = np.ones(n)
    lam = 0.3
    objectives = []
    for sweeps in range(1, 25):
        betas, _, _ = cd_path(
            np.ascontiguousarray(X), np.ascontiguousarray(y), w, float(n),
            np.ascontiguousarray((X * X).sum(axis=0) / n),
            np.array([lam]), sweeps, 0.0,
        )
        objectives.append(lasso_objective(X, y, w, betas[0], 0.0, lam))
    diffs = np.diff(objectives)
    assert (diffs <= 1e-12).all()


def test_path_sparsity_trend_endpoints():
    rng = np.random.default_rng(15)
    X = rng.normal(size=(120, 10))
    y = X @ np.array([2.0, -1.5] + [0.0] * 8) + 0.5 * rng.normal(size=120)
    model = WeightedLasso(n_lambdas=40, seed=3).fit(X, y)
    nnz = (model.coef_path_ != 0).sum(axis=1)
    assert nnz[0] == 0
    assert nnz[-1] >= 1


def test_constant_outcome_gives_intercept_only():
    X = np.random.default_rng(16).normal(size=(30, 4))
    model = WeightedLasso(seed=0).fit(X, np.full(30, 5.0))
    assert model.intercept_ == pytest.approx(5.0, abs=1e-12)
    assert np.all(model.coef_ == 0.0)


def test_nonconvergence_raises_with_last_change():
    rng = np.random.default_rng(17)
    X = rng.normal(size=(40, 6))
    X[:, 3] = X[:, 0] * 0.99 + 0.01 * rng.normal(size=40)
    y = X @ rng.normal(size=6) + rng.normal(size=40)
    with pytest.raises(ConvergenceError, match="did not converge"):
        WeightedLasso(lambda_grid=[0.0], max_iter=1, tol=1e-14).fit(X, y)


def test_scale_equivariance_power_of_two_exact():
    rng = np.random.default_rng(18)
    X = rng.normal(size=(90, 7))
    y = X @ np.array([1.0, 0.0, -2.0, 0.5, 0.0, 0.0, 3.0]) + rng.normal(size=90)
    m1 = WeightedLasso(seed=5).fit(X, y)
    m2 = WeightedLasso(seed=5).fit(X, 4.0 * y)
    assert np.array_equal(m2.coef_, 4.0 * m1.coef_)
    assert m2.intercept_ == 4.0 * m1.intercept_
    Xq = rng.normal(size=(20, 7))
    assert np.array_equal(m2.predict(Xq), 4.0 * m1.predict(Xq))


def test_weight_validation():
    X = np.ones((5, 1))
    y = np.arange(5.0)
    with pytest.raises(ValueError):
        WeightedLasso(lambda_grid=[0.0]).fit(X, y, sample_weight=np.zeros(5))
    with pytest.raises(ValueError):
        WeightedLasso(lambda_grid=[0.0]).fit(X, y, sample_weight=[-1, 1, 1, 1, 1])


def test_logistic_pure_noise_shrinks_slopes():
    rng = np.random.default_rng(19)
    n, k = 2000, 10
    X = rng.normal(size=(n, k))
    d = (rng.random(n) < 0.4).astype(float)
    model = LogisticLasso(seed=7).fit(X, d)
    share = d.mean()
    assert abs(model.intercept_ - np.log(share / (1 - share))) < 0.15
    assert np.abs(model.coef_).max() < 0.1


def test_logistic_huge_penalty_predicts_sample_share():
    rng = np.random.default_rng(20)
    X = rng.normal(size=(300, 4))
    d = (rng.random(300) < 0.3).astype(float)
    model = LogisticLasso(lambda_grid=[1e6]).fit(X, d)
    assert np.all(model.coef_ == 0.0)
    prob = model.predict_proba(X)
    assert np.allclose(prob, d.mean(), atol=1e-6)


def test_logistic_probabilities_clamped():
    rng = np.random.default_rng(21)
    X = rng.normal(size=(200, 2))
    d = (X[:, 0] > 0).astype(float)  # perfectly separable
    model = LogisticLasso(lambda_grid=[0.0]).fit(X, d)
    prob = model.predict_proba(X)
    assert prob.min() >= 0.01 and prob.max() <= 0.99


def test_logistic_recovers_signal_direction():
    rng = np.random.default_rng(22)
    n = 1500
    X = rng.normal(size=(n, 3))
    p = 1.0 / (1.0 + np.exp(-(0.8 * X[:, 0] - 0.5 * X[:, 1])))
    d = (rng.random(n) < p).astype(float)
    model = LogisticLasso(seed=9).fit(X, d)
    assert model.coef_[0] > 0.3
    assert model.coef_[1] < -0.1


def test_logistic_single_class_rejected():
    X = np.random.default_rng(23).normal(size=(20, 2))
    with pytest.raises(ValueError, match="single class"):
        LogisticLasso().fit(X, np.ones(20))


def test_sklearn_params_roundtrip():
    model = WeightedLasso(n_lambdas=17, tol=1e-6)
    params = model.get_params()
    assert params["n_lambdas"] == 17
    clone = WeightedLasso(**params)
    assert clone.get_params() == params
