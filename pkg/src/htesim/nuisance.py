"""Cross-fitted nuisance estimation (50:50 sample splitting).

Models for p(x), mu(x), and the per-arm mu(d, x) are fitted on one half of
the sample and used to predict the other half, so no unit's nuisance value
ever comes from a model that saw its own fold. Per-arm regressions use only
that arm's units within the training half.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._rng import derive_seed
from .data import Dataset, Sample, SplitPlan, split_half
from .features import FeatureExpansion, expand_features
from .forest import HonestProbabilityForest, HonestRegressionForest
from .lasso import PROB_CLAMP, LogisticLasso, WeightedLasso

NUISANCE_NAMES = ("p", "mu", "mu1", "mu0")


@dataclass(frozen=True)
class Nuisances:
    """Cross-fitted nuisance predictions for every unit of a sample.

    ``split`` records the provenance: a unit in fold f was predicted by
    models fitted on fold 1 - f.
    """

    split: SplitPlan
    p_hat: np.ndarray | None = None
    mu_hat: np.ndarray | None = None
    mu1_hat: np.ndarray | None = None
    mu0_hat: np.ndarray | None = None
    half_seeds: tuple[int, int] = field(default=(0, 0))

    def require(self, *names: str) -> None:
        for name in names:
            if getattr(self, f"{name}_hat" if name != "p" else "p_hat") is None:
                raise ValueError(f"nuisance {name!r} was not estimated")

    def mirrored(self) -> "Nuisances":
        """The same predictions with the fold labels (and seeds) exchanged."""
        return Nuisances(
            self.split.swapped(), self.p_hat, self.mu_hat, self.mu1_hat, self.mu0_hat,
            (self.half_seeds[1], self.half_seeds[0]),
        )


def _fit_regression(learner, X_train, y_train, X_pred, seed, forest_params, lasso_params):
    if learner == "forest":
        model = HonestRegressionForest(seed=seed, **forest_params)
        model.fit(X_train, y_train)
    else:
        model = WeightedLasso(seed=seed, **lasso_params)
        model.fit(X_train, y_train)
    return model.predict(X_pred)


def _fit_propensity(learner, X_train, d_train, X_pred, seed, forest_params, lasso_params):
    if learner == "forest":
        model = HonestProbabilityForest(seed=seed, **forest_params)
        model.fit(X_train, d_train)
        return model.predict(X_pred)
    model = LogisticLasso(seed=seed, **lasso_params)
    model.fit(X_train, d_train)
    return model.predict_proba(X_pred)


def estimate_nuisances(
    sample: Sample,
    learner: str,
    which=("p", "mu", "mu1", "mu0"),
    seed: int = 0,
    split: SplitPlan | None = None,
    forest_params: dict | None = None,
    lasso_params: dict | None = None,
    expansion: FeatureExpansion | None = None,
) -> Nuisances:
    """Fit the requested nuisances with 50:50 cross-fitting.

    Forest learners see the raw covariates; Lasso learners see the expanded
    feature set (built from this sample's covariates unless an expansion map
    is supplied).
    """
    if learner not in ("forest", "lasso"):
        raise ValueError(f"unknown learner {learner!r}")
    unknown = set(which) - set(NUISANCE_NAMES)
    if unknown:
        raise ValueError(f"unknown nuisance name(s) {sorted(unknown)}")
    forest_params = forest_params or {}
    lasso_params = lasso_params or {}
    n = sample.n
    if split is None:
        split = split_half(n, derive_seed(seed, "nuisance-split"))
    if split.n != n or split.n_folds != 2:
        raise ValueError("split must be a two-fold plan over the sample")

    if learner == "lasso":
        if expansion is None:
            _, expansion = expand_features(sample.data)
        X_all = expansion.apply(sample.data).covariates
    else:
        X_all = sample.data.covariates

    y = sample.outcome
    d = sample.treatment
    vectors = {name: np.full(n, np.nan) for name in which}
    half_seeds = (derive_seed(seed, "nuisance-half", 0), derive_seed(seed, "nuisance-half", 1))
    for h in (0, 1):
        train = split.fold(h)
        pred = split.fold(1 - h)
        hs = half_seeds[h]
        X_tr, X_pr = X_all[train], X_all[pred]
        if "p" in which:
            if d[train].min() == d[train].max():
                raise ValueError("a cross-fitting half contains a single treatment arm; increase the sample size")
            p = _fit_propensity(learner, X_tr, d[train], X_pr,
                                derive_seed(hs, "nuisance-p"), forest_params, lasso_params)
            vectors["p"][pred] = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
        if "mu" in which:
            vectors["mu"][pred] = _fit_regression(learner, X_tr, y[train], X_pr,
                                                  derive_seed(hs, "nuisance-mu"), forest_params, lasso_params)
        for name, arm in (("mu1", 1.0), ("mu0", 0.0)):
            if name in which:
                rows = train[d[train] == arm]
                if rows.size == 0:
                    raise ValueError(
                        f"no units with treatment={int(arm)} in one cross-fitting half; increase the sample size"
                    )
                vectors[name][pred] = _fit_regression(
                    learner, X_all[rows], y[rows], X_pr,
                    derive_seed(hs, f"nuisance-{name}"), forest_params, lasso_params,
                )
    return Nuisances(
        split=split,
        p_hat=vectors.get("p"),
        mu_hat=vectors.get("mu"),
        mu1_hat=vectors.get("mu1"),
        mu0_hat=vectors.get("mu0"),
        half_seeds=half_seeds,
    )
