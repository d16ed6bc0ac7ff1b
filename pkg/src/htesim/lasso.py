"""Weighted Lasso (least squares and logistic) with cross-validated penalty.

Coordinate descent on the objective

    (1 / (2 * sum w)) * sum_i w_i * (y_i - b0 - x_i' b)^2  +  lambda * ||b||_1

with an unpenalized intercept. The penalty is selected on a descending
log-spaced grid from lambda_max (the smallest penalty with all slopes zero)
down to ``lambda_min_ratio * lambda_max`` by k-fold cross-validation on the
weighted deviance, taking the minimizing grid point. When ``standardize`` is
on, columns are scaled to unit weighted variance internally and coefficients
are reported on the original scale. The outcome is likewise scaled by its
weighted standard deviation internally, which makes the whole fit exactly
equivariant to positive power-of-two rescalings of the outcome.

The logistic variant runs iteratively reweighted coordinate descent and
clamps predicted probabilities to [0.01, 0.99].
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from ._lasso_kernels import cd_logistic_inner, cd_path
from ._rng import derive_seed
from .data import make_folds
from .validation import check_binary, check_both_arms, check_matrix, check_vector, check_weights

PROB_CLAMP = 0.01
_IRLS_MAX_ITER = 30
_IRLS_PROB_FLOOR = 1e-5


class ConvergenceError(RuntimeError):
    """Coordinate descent did not converge within ``max_iter`` sweeps."""

    def __init__(self, max_iter: int, last_change: float):
        self.last_change = last_change
        super().__init__(
            f"coordinate descent did not converge in {max_iter} sweeps "
            f"(last max coefficient change {last_change:.3e})"
        )


def lasso_objective(X, y, w, beta, intercept, lam) -> float:
    """The penalized weighted objective; used as an independent check."""
    X = np.asarray(X, dtype=np.float64)
    r = np.asarray(y, dtype=np.float64) - intercept - X @ np.asarray(beta, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    return float((w * r * r).sum() / (2.0 * w.sum()) + lam * np.abs(beta).sum())


def _lambda_grid(lambda_max: float, n_lambdas: int, min_ratio: float) -> np.ndarray:
    if lambda_max <= 0:
        return np.array([0.0])
    # tiny headroom so the top of the grid dominates the kernel's own inner
    # products regardless of float summation order
    return (lambda_max * (1.0 + 1e-10)) * np.power(10.0, np.linspace(0.0, np.log10(min_ratio), n_lambdas))


class _Prep:
    """Centering/scaling info of one design so fits can be undone later."""

    __slots__ = ("Xs", "x_mean", "x_scale", "y_mean", "y_scale", "W")

    def __init__(self, X, y, w, standardize, fit_intercept):
        W = w.sum()
        self.W = W
        if fit_intercept:
            self.x_mean = (w[:, None] * X).sum(axis=0) / W
            self.y_mean = float((w * y).sum() / W)
        else:
            self.x_mean = np.zeros(X.shape[1])
            self.y_mean = 0.0
        Xc = X - self.x_mean
        if standardize:
            var = (w[:, None] * Xc * Xc).sum(axis=0) / W
            self.x_scale = np.sqrt(var)
            self.x_scale[self.x_scale == 0.0] = 1.0
        else:
            self.x_scale = np.ones(X.shape[1])
        self.Xs = np.ascontiguousarray(Xc / self.x_scale)
        yc = y - self.y_mean
        self.y_scale = float(np.sqrt((w * yc * yc).sum() / W))

    def denom(self, w) -> np.ndarray:
        d = (w[:, None] * self.Xs * self.Xs).sum(axis=0) / self.W
        d[d == 0.0] = 1.0
        return np.ascontiguousarray(d)

    def lambda_max(self, y, w) -> float:
        yc = y - self.y_mean
        return float(np.abs((w[:, None] * self.Xs * yc[:, None]).sum(axis=0) / self.W).max())

    def to_original(self, beta_std: np.ndarray) -> tuple[float, np.ndarray]:
        coef = beta_std * self.y_scale / self.x_scale
        intercept = self.y_mean - float(coef @ self.x_mean)
        return intercept, coef


def _fit_gaussian_path(X, y, w, lambdas, *, standardize, fit_intercept, max_iter, tol):
    """Fit the whole path; returns (intercepts, coefs) on the original scale."""
    prep = _Prep(X, y, w, standardize, fit_intercept)
    n_lam = lambdas.shape[0]
    p = X.shape[1]
    if prep.y_scale == 0.0:
        coefs = np.zeros((n_lam, p))
        intercepts = np.full(n_lam, prep.y_mean)
        return intercepts, coefs, np.zeros(n_lam)
    yw = np.ascontiguousarray((y - prep.y_mean) / prep.y_scale)
    lam_int = np.ascontiguousarray(lambdas / prep.y_scale)
    betas, sweeps, last_change = cd_path(prep.Xs, yw, w, prep.W, prep.denom(w), lam_int, max_iter, tol)
    bad = sweeps >= max_iter
    if bad.any() and (last_change[bad] >= tol).any():
        raise ConvergenceError(max_iter, float(last_change[bad].max()))
    intercepts = np.empty(n_lam)
    coefs = np.empty((n_lam, p))
    for li in range(n_lam):
        intercepts[li], coefs[li] = prep.to_original(betas[li])
    return intercepts, coefs, last_change


class WeightedLasso(BaseEstimator):
    """L1-penalized weighted least squares with CV penalty choice.

    Parameters follow the conventions above; ``lambda_grid`` overrides the
    automatic grid (must be non-negative and descending; a single value skips
    cross-validation). ``tol`` is the convergence threshold on the maximum
    per-sweep coefficient change, measured on the standardized scale.
    """

    def __init__(
        self,
        lambda_grid=None,
        n_lambdas: int = 100,
        lambda_min_ratio: float = 1e-3,
        n_folds: int = 10,
        max_iter: int = 1000,
        tol: float = 1e-7,
        standardize: bool = True,
        fit_intercept: bool = True,
        seed: int = 0,
    ):
        self.lambda_grid = lambda_grid
        self.n_lambdas = n_lambdas
        self.lambda_min_ratio = lambda_min_ratio
        self.n_folds = n_folds
        self.max_iter = max_iter
        self.tol = tol
        self.standardize = standardize
        self.fit_intercept = fit_intercept
        self.seed = seed

    family = "gaussian"

    def _grid(self, lambda_max: float) -> np.ndarray:
        if self.lambda_grid is not None:
            grid = np.ascontiguousarray(self.lambda_grid, dtype=np.float64).ravel()
            if grid.size == 0 or (grid < 0).any():
                raise ValueError("lambda_grid must be non-empty and non-negative")
            if grid.size > 1 and not (np.diff(grid) < 0).all():
                raise ValueError("lambda_grid must be strictly descending")
            return grid
        return _lambda_grid(lambda_max, self.n_lambdas, self.lambda_min_ratio)

    def fit(self, X, y, sample_weight=None):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        X = check_matrix(X)
        n, p = X.shape
        y = check_vector(y, n)
        w = np.ones(n) if sample_weight is None else check_weights(sample_weight, n)

        prep = _Prep(X, y, w, self.standardize, self.fit_intercept)
        self.lambda_max_ = prep.lambda_max(y, w)
        lambdas = self._grid(self.lambda_max_)

        sel = 0
        self.cv_losses_ = None
        if lambdas.size > 1:
            folds = make_folds(n, min(self.n_folds, n), derive_seed(self.seed, "lasso-cv"))
            sse = np.zeros(lambdas.size)
            for f in range(folds.n_folds):
                held = folds.fold_assignments == f
                tr = ~held
                icepts, coefs, _ = _fit_gaussian_path(
                    X[tr], y[tr], w[tr], lambdas,
                    standardize=self.standardize, fit_intercept=self.fit_intercept,
                    max_iter=self.max_iter, tol=self.tol,
                )
                pred = icepts[None, :] + X[held] @ coefs.T
                resid = y[held, None] - pred
                sse += (w[held, None] * resid * resid).sum(axis=0)
            self.cv_losses_ = sse / w.sum()
            sel = int(np.argmin(self.cv_losses_))

        self.lambdas_ = lambdas
        icepts, coefs, _ = _fit_gaussian_path(
            X, y, w, lambdas,
            standardize=self.standardize, fit_intercept=self.fit_intercept,
            max_iter=self.max_iter, tol=self.tol,
        )
        self.intercept_path_ = icepts
        self.coef_path_ = coefs
        self.lambda_selected_ = float(lambdas[sel])
        self.intercept_ = float(icepts[sel])
        self.coef_ = coefs[sel].copy()
        return self

    def predict(self, X):
        X = check_matrix(X)
        if X.shape[1] != self.coef_.shape[0]:
            raise ValueError(f"X has {X.shape[1]} columns, model expects {self.coef_.shape[0]}")
        return self.intercept_ + X @ self.coef_


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _binomial_deviance(y, prob, w) -> float:
    prob = np.clip(prob, 1e-10, 1.0 - 1e-10)
    return float(-2.0 * (w * (y * np.log(prob) + (1.0 - y) * np.log(1.0 - prob))).sum())


def _fit_logistic_path(X, y, w, lambdas, *, standardize, max_iter, tol):
    """IRLS over the path with warm starts; intercept-only start at logit(mean)."""
    prep = _Prep(X, y, w, standardize, fit_intercept=True)
    Xs = prep.Xs
    n, p = X.shape
    W = w.sum()
    pbar = float((w * y).sum() / W)
    pbar = min(max(pbar, _IRLS_PROB_FLOOR), 1.0 - _IRLS_PROB_FLOOR)
    beta = np.zeros(p)
    beta0 = float(np.log(pbar / (1.0 - pbar)))
    n_lam = lambdas.shape[0]
    intercepts = np.empty(n_lam)
    coefs = np.empty((n_lam, p))
    for li in range(n_lam):
        lam = float(lambdas[li])
        for _ in range(_IRLS_MAX_ITER):
            eta = beta0 + Xs @ beta
            prob = np.clip(_sigmoid(eta), _IRLS_PROB_FLOOR, 1.0 - _IRLS_PROB_FLOOR)
            w_work = np.ascontiguousarray(w * prob * (1.0 - prob))
            z = np.ascontiguousarray(eta + (y - prob) / (prob * (1.0 - prob)))
            old0, old = beta0, beta.copy()
            beta0, sweeps, last_change = cd_logistic_inner(
                Xs, z, w_work, lam, beta, beta0, max_iter, tol
            )
            if sweeps >= max_iter and last_change >= tol:
                raise ConvergenceError(max_iter, float(last_change))
            outer_change = max(abs(beta0 - old0), float(np.abs(beta - old).max(initial=0.0)))
            if outer_change < max(tol, 1e-9):
                break
        coefs[li] = beta / prep.x_scale
        intercepts[li] = beta0 - float(coefs[li] @ prep.x_mean)
    return intercepts, coefs


class LogisticLasso(BaseEstimator):
    """L1-penalized logistic regression for binary treatment/propensity fits.

    Same path and CV machinery as :class:`WeightedLasso` but on the binomial
    deviance. Predicted probabilities are clamped to [0.01, 0.99] so inverse
    propensity denominators stay bounded; the unclamped linear predictor is
    available through :meth:`decision_function`.
    """

    def __init__(
        self,
        lambda_grid=None,
        n_lambdas: int = 100,
        lambda_min_ratio: float = 1e-3,
        n_folds: int = 10,
        max_iter: int = 1000,
        tol: float = 1e-7,
        standardize: bool = True,
        seed: int = 0,
    ):
        self.lambda_grid = lambda_grid
        self.n_lambdas = n_lambdas
        self.lambda_min_ratio = lambda_min_ratio
        self.n_folds = n_folds
        self.max_iter = max_iter
        self.tol = tol
        self.standardize = standardize
        self.seed = seed

    family = "binomial"

    _grid = WeightedLasso._grid

    def fit(self, X, y, sample_weight=None):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        X = check_matrix(X)
        n, p = X.shape
        y = check_binary(y, n)
        check_both_arms(y)
        w = np.ones(n) if sample_weight is None else check_weights(sample_weight, n)

        prep = _Prep(X, y, w, self.standardize, fit_intercept=False)
        pbar = float((w * y).sum() / w.sum())
        self.lambda_max_ = float(
            np.abs((w[:, None] * prep.Xs * (y - pbar)[:, None]).sum(axis=0) / w.sum()).max()
        )
        lambdas = self._grid(self.lambda_max_)

        sel = 0
        self.cv_losses_ = None
        if lambdas.size > 1:
            folds = make_folds(n, min(self.n_folds, n), derive_seed(self.seed, "lasso-cv"))
            dev = np.zeros(lambdas.size)
            for f in range(folds.n_folds):
                held = folds.fold_assignments == f
                tr = ~held
                if y[tr].min() == y[tr].max():
                    raise ValueError("a CV training fold contains a single class; use fewer folds or more data")
                icepts, coefs = _fit_logistic_path(
                    X[tr], y[tr], w[tr], lambdas,
                    standardize=self.standardize, max_iter=self.max_iter, tol=self.tol,
                )
                for li in range(lambdas.size):
                    prob = _sigmoid(icepts[li] + X[held] @ coefs[li])
                    dev[li] += _binomial_deviance(y[held], prob, w[held])
            self.cv_losses_ = dev / w.sum()
            sel = int(np.argmin(self.cv_losses_))

        self.lambdas_ = lambdas
        icepts, coefs = _fit_logistic_path(
            X, y, w, lambdas, standardize=self.standardize, max_iter=self.max_iter, tol=self.tol
        )
        self.intercept_path_ = icepts
        self.coef_path_ = coefs
        self.lambda_selected_ = float(lambdas[sel])
        self.intercept_ = float(icepts[sel])
        self.coef_ = coefs[sel].copy()
        return self

    def decision_function(self, X):
        X = check_matrix(X)
        if X.shape[1] != self.coef_.shape[0]:
            raise ValueError(f"X has {X.shape[1]} columns, model expects {self.coef_.shape[0]}")
        return self.intercept_ + X @ self.coef_

    def predict_proba(self, X):
        return np.clip(_sigmoid(self.decision_function(X)), PROB_CLAMP, 1.0 - PROB_CLAMP)
