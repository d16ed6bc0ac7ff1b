"""Outcome/weight transforms that turn IATE estimation into weighted regression.

Each transform produces a (weights, pseudo-outcome) pair whose weighted
least-squares fit against covariates targets the treatment effect surface:

    MOM-IPW:   w = 1,                          Y* = y (d - p) / (p (1-p))
    MOM-DR:    w = 1,                          Y* = mu1 - mu0 + d (y - mu1) / p
                                                    - (1-d)(y - mu0) / (1-p)
    MCM:       w = T (d - p) / (4 p (1-p)),    Y* = 2 T y          (T = 2d - 1)
    MCM-EA:    same weights,                   Y* = 2 T (y - mu)
    R-learn:   w = (d - p)^2,                  Y* = (y - mu) / (d - p)

MCM weights are strictly positive for p in (0, 1): they reduce to 1/(4p) for
treated and 1/(4(1-p)) for controls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import check_binary, check_vector


@dataclass(frozen=True)
class TransformedProblem:
    weights: np.ndarray
    pseudo_outcome: np.ndarray
    covariate_mode: str  # raw | mcm_modified | rl_modified

    def __post_init__(self):
        if self.weights.shape != self.pseudo_outcome.shape:
            raise ValueError("weights and pseudo_outcome must have the same length")
        if (self.weights < 0).any():
            raise ValueError("transform produced negative weights")


def _check_inputs(y, d, p_hat, *named):
    y = check_vector(y, None, "y")
    n = y.shape[0]
    d = check_binary(d, n, "d")
    p = check_vector(p_hat, n, "p_hat")
    if (p <= 0).any() or (p >= 1).any():
        raise ValueError("p_hat must lie strictly inside (0, 1); clamp it first")
    out = [y, d, p]
    for name, v in named:
        out.append(check_vector(v, n, name))
    return out


def transform_mom_ipw(y, d, p_hat) -> TransformedProblem:
    y, d, p = _check_inputs(y, d, p_hat)
    pseudo = y * (d - p) / (p * (1.0 - p))
    return TransformedProblem(np.ones_like(y), pseudo, "raw")


def transform_mom_dr(y, d, p_hat, mu1_hat, mu0_hat) -> TransformedProblem:
    y, d, p, mu1, mu0 = _check_inputs(y, d, p_hat, ("mu1_hat", mu1_hat), ("mu0_hat", mu0_hat))
    pseudo = mu1 - mu0 + d * (y - mu1) / p - (1.0 - d) * (y - mu0) / (1.0 - p)
    return TransformedProblem(np.ones_like(y), pseudo, "raw")


def transform_mcm(y, d, p_hat, efficiency_augment: bool = False, mu_hat=None) -> TransformedProblem:
    if efficiency_augment and mu_hat is None:
        raise ValueError("efficiency augmentation requires mu_hat")
    named = [("mu_hat", mu_hat)] if efficiency_augment else []
    parts = _check_inputs(y, d, p_hat, *named)
    y, d, p = parts[:3]
    t = 2.0 * d - 1.0
    weights = t * (d - p) / (4.0 * p * (1.0 - p))
    outcome = y - parts[3] if efficiency_augment else y
    return TransformedProblem(weights, 2.0 * t * outcome, "mcm_modified")


def transform_rlearn(y, d, p_hat, mu_hat) -> TransformedProblem:
    y, d, p, mu = _check_inputs(y, d, p_hat, ("mu_hat", mu_hat))
    resid_d = d - p
    weights = resid_d * resid_d
    pseudo = (y - mu) / resid_d
    return TransformedProblem(weights, pseudo, "rl_modified")
