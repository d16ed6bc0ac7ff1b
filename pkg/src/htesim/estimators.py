"""The treatment-effect estimator battery and IATE aggregation.

Eleven estimators arise from crossing the generic approaches with the two
base learners (plus the infeasible benchmark that regresses the true unit
effects on covariates):

    method      learners        cross-fitting
    infeasible  forest, lasso   no
    cmr         forest, lasso   no   (per-arm regressions, full sample)
    mom_ipw     forest, lasso   yes
    mom_dr      forest, lasso   yes
    mcm         lasso           yes
    mcm_ea      lasso           yes
    rlearn      lasso           yes
    cf          forest          no
    cf_lc       forest          yes  (cross-fitted centering)

Cross-fitted methods follow the 50:50 two-fold scheme: nuisances for each
half come from models fitted on the other half, the IATE model is fitted on
each half with its own-half pseudo-outcomes, and the final prediction is the
average of the two half-models evaluated on the validation data.

Lasso-based fits operate on the expanded feature set (built once from the
training covariates); forest-based fits use the raw covariates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ._rng import derive_seed
from .data import Dataset, Sample, SplitPlan
from .features import expand_features
from .forest import CausalForest, HonestRegressionForest
from .lasso import WeightedLasso
from .nuisance import Nuisances, estimate_nuisances
from .transforms import transform_mcm, transform_mom_dr, transform_mom_ipw, transform_rlearn
from .validation import check_both_arms, check_matrix, check_vector

METHODS = ("infeasible", "cmr", "mom_ipw", "mom_dr", "mcm", "mcm_ea", "rlearn", "cf", "cf_lc")
LEARNERS = ("forest", "lasso")
_LASSO_ONLY = ("mcm", "mcm_ea", "rlearn")
_FOREST_ONLY = ("cf", "cf_lc")
_CROSS_FIT = ("mom_ipw", "mom_dr", "mcm", "mcm_ea", "rlearn", "cf_lc")
_NUISANCE_NEEDS = {
    "mom_ipw": ("p",),
    "mom_dr": ("p", "mu1", "mu0"),
    "mcm": ("p",),
    "mcm_ea": ("p", "mu"),
    "rlearn": ("p", "mu"),
    "cf_lc": ("p", "mu"),
}


@dataclass(frozen=True)
class EstimatorSpec:
    """Which method/learner combination to run."""

    method: str
    learner: str

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.learner not in LEARNERS:
            raise ValueError(f"unknown learner {self.learner!r}; expected one of {LEARNERS}")
        if self.method in _LASSO_ONLY and self.learner != "lasso":
            raise ValueError(f"{self.method} solves a weighted minimization and requires the lasso learner")
        if self.method in _FOREST_ONLY and self.learner != "forest":
            raise ValueError(f"{self.method} is a forest modification and requires the forest learner")

    @property
    def cross_fit(self) -> bool:
        return self.method in _CROSS_FIT

    @property
    def nuisance_needs(self) -> tuple[str, ...]:
        return _NUISANCE_NEEDS.get(self.method, ())

    @property
    def estimator_id(self) -> str:
        return f"{self.method}_{self.learner}"


def parse_estimator_id(text: str) -> EstimatorSpec:
    """Parse ``method:learner`` (or a bare forest-only method name)."""
    text = text.strip()
    if ":" in text:
        method, learner = (part.strip() for part in text.split(":", 1))
    elif text in _FOREST_ONLY:
        method, learner = text, "forest"
    elif text in _LASSO_ONLY:
        method, learner = text, "lasso"
    else:
        raise ValueError(f"estimator {text!r} needs an explicit learner, e.g. {text}:forest")
    return EstimatorSpec(method, learner)


THE_ELEVEN = tuple(
    parse_estimator_id(s)
    for s in (
        "cmr:forest", "cmr:lasso", "mom_ipw:forest", "mom_ipw:lasso",
        "mom_dr:forest", "mom_dr:lasso", "mcm:lasso", "mcm_ea:lasso",
        "rlearn:lasso", "cf:forest", "cf_lc:forest",
    )
)
INFEASIBLE_BENCHMARKS = (EstimatorSpec("infeasible", "forest"), EstimatorSpec("infeasible", "lasso"))


def as_dataset(X, names=None) -> Dataset:
    """Wrap a raw matrix in a Dataset, inferring binary/continuous kinds."""
    if isinstance(X, Dataset):
        return X
    X = check_matrix(X)
    if names is None:
        names = tuple(f"x{j + 1}" for j in range(X.shape[1]))
    kinds = tuple(
        "binary" if np.isin(X[:, j], (0.0, 1.0)).all() else "continuous" for j in range(X.shape[1])
    )
    return Dataset(X, kinds, names)


class TreatmentEffectEstimator(BaseEstimator):
    """Fits one estimator from the battery and predicts unit-level effects.

    ``forest_params`` / ``lasso_params`` are keyword dictionaries forwarded to
    the underlying learners (seeds are derived internally from ``seed``).
    ``fit`` accepts a Dataset or a plain matrix for the covariates; with a
    plain matrix, column kinds for the feature expansion are inferred.
    """

    def __init__(self, method="mom_dr", learner="forest", seed=0,
                 forest_params=None, lasso_params=None):
        self.method = method
        self.learner = learner
        self.seed = seed
        self.forest_params = forest_params
        self.lasso_params = lasso_params

    @classmethod
    def from_spec(cls, spec: EstimatorSpec, seed=0, forest_params=None, lasso_params=None):
        return cls(spec.method, spec.learner, seed, forest_params, lasso_params)

    # -- learner construction -------------------------------------------------

    def _regression_learner(self, fit_seed):
        if self.learner == "forest":
            return HonestRegressionForest(seed=fit_seed, **(self.forest_params or {}))
        return WeightedLasso(seed=fit_seed, **(self.lasso_params or {}))

    def _design(self, X_raw):
        return self._expansion_.apply_matrix(X_raw) if self.learner == "lasso" else X_raw

    # -- fitting ---------------------------------------------------------------

    def fit(self, X, y, d, true_ite=None, nuisances: Nuisances | None = None,
            split: SplitPlan | None = None, half_seeds: tuple[int, int] | None = None):
        spec = EstimatorSpec(self.method, self.learner)
        ds = as_dataset(X)
        n = ds.n
        y = check_vector(y, n, "y")
        d = check_vector(d, n, "d")
        if spec.method != "infeasible":
            check_both_arms(d)
        self._columns_ = ds.column_names
        self._k_ = ds.k

        if self.learner == "lasso":
            _, self._expansion_ = expand_features(ds)
        else:
            self._expansion_ = None
        X_fit = self._design(ds.covariates)

        if half_seeds is None:
            half_seeds = (derive_seed(self.seed, "iate-half", 0), derive_seed(self.seed, "iate-half", 1))
        self._half_seeds_ = half_seeds

        needs = spec.nuisance_needs
        if needs:
            if nuisances is None:
                nuisances = estimate_nuisances(
                    Sample(ds, d, y), self.learner, needs,
                    seed=derive_seed(self.seed, "nuisances"), split=split,
                    forest_params=self.forest_params, lasso_params=self.lasso_params,
                    expansion=self._expansion_,
                )
            nuisances.require(*needs)
            if nuisances.split.n != n:
                raise ValueError("nuisances were computed for a different sample size")
        self.nuisances_ = nuisances

        method = spec.method
        if method == "infeasible":
            if true_ite is None:
                raise ValueError("the infeasible benchmark needs the true unit effects (simulated data only)")
            true_ite = check_vector(true_ite, n, "true_ite")
            model = self._regression_learner(derive_seed(self.seed, "iate-fit"))
            model.fit(X_fit, true_ite)
            self._models_ = [model]
            self._combine_ = "single"
        elif method == "cmr":
            models = []
            for arm in (1.0, 0.0):
                rows = np.flatnonzero(d == arm)
                model = self._regression_learner(derive_seed(self.seed, "iate-arm", int(arm)))
                model.fit(X_fit[rows], y[rows])
                models.append(model)
            self._models_ = models
            self._combine_ = "diff"
        elif method in ("mom_ipw", "mom_dr", "mcm", "mcm_ea", "rlearn"):
            self._models_ = self._fit_halves(method, X_fit, y, d, nuisances, half_seeds)
            self._combine_ = "mean"
        elif method == "cf":
            model = CausalForest(seed=derive_seed(self.seed, "iate-fit"), centering="none",
                                 **(self.forest_params or {}))
            model.fit(ds.covariates, y, d)
            self._models_ = [model]
            self._combine_ = "causal"
        else:  # cf_lc
            model = CausalForest(seed=derive_seed(self.seed, "iate-fit"), centering="local",
                                 **(self.forest_params or {}))
            model.fit(ds.covariates, y, d, p_hat=nuisances.p_hat, mu_hat=nuisances.mu_hat)
            self._models_ = [model]
            self._combine_ = "causal"
        return self

    def _fit_halves(self, method, X_fit, y, d, nuisances, half_seeds):
        models = []
        for h in (0, 1):
            rows = nuisances.split.fold(h)
            yh, dh = y[rows], d[rows]
            p = nuisances.p_hat[rows]
            if method == "mom_ipw":
                tp = transform_mom_ipw(yh, dh, p)
            elif method == "mom_dr":
                tp = transform_mom_dr(yh, dh, p, nuisances.mu1_hat[rows], nuisances.mu0_hat[rows])
            elif method == "mcm":
                tp = transform_mcm(yh, dh, p)
            elif method == "mcm_ea":
                tp = transform_mcm(yh, dh, p, efficiency_augment=True, mu_hat=nuisances.mu_hat[rows])
            else:
                tp = transform_rlearn(yh, dh, p, nuisances.mu_hat[rows])
            model = self._regression_learner(half_seeds[h])
            if method in ("mcm", "mcm_ea", "rlearn"):
                model.fit(X_fit[rows], tp.pseudo_outcome, sample_weight=tp.weights)
            else:
                model.fit(X_fit[rows], tp.pseudo_outcome)
            models.append(model)
        return models

    # -- prediction --------------------------------------------------------------

    def predict(self, X):
        ds = as_dataset(X, names=self._columns_)
        if ds.k != self._k_:
            raise ValueError(f"X has {ds.k} columns, model was fitted with {self._k_}")
        if self._combine_ == "causal":
            return self._models_[0].predict(ds.covariates, on_missing_arm="raise")
        Xp = self._design(ds.covariates)
        if self._combine_ == "single":
            return self._models_[0].predict(Xp)
        if self._combine_ == "diff":
            return self._models_[0].predict(Xp) - self._models_[1].predict(Xp)
        return 0.5 * (self._models_[0].predict(Xp) + self._models_[1].predict(Xp))


def estimate_iate(spec: EstimatorSpec, train: Sample, validation: Dataset, seed: int = 0,
                  nuisances: Nuisances | None = None, split: SplitPlan | None = None,
                  forest_params=None, lasso_params=None,
                  half_seeds=None) -> np.ndarray:
    """Fit one estimator on a training sample and predict validation IATEs."""
    est = TreatmentEffectEstimator.from_spec(spec, seed, forest_params, lasso_params)
    est.fit(train.data, train.outcome, train.treatment, true_ite=train.true_ite,
            nuisances=nuisances, split=split, half_seeds=half_seeds)
    return est.predict(validation)


def aggregate(iate, groups) -> tuple[np.ndarray, float]:
    """Average IATEs to group effects and the overall mean effect.

    Group labels must be integers 0..G-1 with every group non-empty.
    """
    iate = check_vector(iate, None, "iate")
    groups = np.ascontiguousarray(groups, dtype=np.int64).ravel()
    if groups.shape[0] != iate.shape[0]:
        raise ValueError("groups must label every unit")
    if groups.min() < 0:
        raise ValueError("group labels must be nonnegative")
    n_groups = int(groups.max()) + 1
    counts = np.bincount(groups, minlength=n_groups)
    if (counts == 0).any():
        empty = int(np.flatnonzero(counts == 0)[0])
        raise ValueError(f"group {empty} is empty")
    sums = np.bincount(groups, weights=iate, minlength=n_groups)
    return sums / counts, float(iate.mean())
