"""Numba kernels for weighted coordinate descent."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def cd_path(Xs, y, w, W, denom, lambdas, max_iter, tol):
    """Cyclic coordinate descent along a descending penalty path.

    Minimizes (1/(2W)) * sum_i w_i (y_i - Xs_i beta)^2 + lam * sum_j |beta_j|
    with warm starts between consecutive path points. ``denom`` holds
    (1/W) * sum_i w_i Xs_ij^2 (with zero-variance columns forced to 1 so they
    stay at coefficient zero). Returns per-path coefficients, sweep counts,
    and the final max coefficient change of each fit.
    """
    n, p = Xs.shape
    n_lam = lambdas.shape[0]
    betas = np.zeros((n_lam, p))
    sweeps = np.zeros(n_lam, dtype=np.int64)
    last_change = np.zeros(n_lam)
    beta = np.zeros(p)
    r = y.copy()
    for li in range(n_lam):
        lam = lambdas[li]
        it = 0
        chg = tol + 1.0
        while it < max_iter:
            chg = 0.0
            for j in range(p):
                bj = beta[j]
                s = 0.0
                for i in range(n):
                    s += w[i] * Xs[i, j] * r[i]
                z = s / W + denom[j] * bj
                if z > lam:
                    bn = (z - lam) / denom[j]
                elif z < -lam:
                    bn = (z + lam) / denom[j]
                else:
                    bn = 0.0
                if bn != bj:
                    delta = bn - bj
                    for i in range(n):
                        r[i] -= delta * Xs[i, j]
                    beta[j] = bn
                    if abs(delta) > chg:
                        chg = abs(delta)
            it += 1
            if chg < tol:
                break
        betas[li] = beta
        sweeps[li] = it
        last_change[li] = chg
    return betas, sweeps, last_change


@njit(cache=True)
def cd_logistic_inner(Xs, z, w_work, lam, beta, beta0, max_iter, tol):
    """One penalized weighted least-squares solve on an IRLS working response.

    The intercept is an unpenalized coordinate. ``beta`` is updated in place;
    returns (new_beta0, sweeps, last max change).
    """
    n, p = Xs.shape
    W = 0.0
    for i in range(n):
        W += w_work[i]
    r = np.empty(n)
    for i in range(n):
        acc = z[i] - beta0
        for j in range(p):
            if beta[j] != 0.0:
                acc -= Xs[i, j] * beta[j]
        r[i] = acc
    denom = np.empty(p)
    for j in range(p):
        s = 0.0
        for i in range(n):
            s += w_work[i] * Xs[i, j] * Xs[i, j]
        denom[j] = s / W if s > 0.0 else 1.0
    it = 0
    chg = tol + 1.0
    while it < max_iter:
        chg = 0.0
        s0 = 0.0
        for i in range(n):
            s0 += w_work[i] * r[i]
        d0 = s0 / W
        if d0 != 0.0:
            beta0 += d0
            for i in range(n):
                r[i] -= d0
            if abs(d0) > chg:
                chg = abs(d0)
        for j in range(p):
            bj = beta[j]
            s = 0.0
            for i in range(n):
                s += w_work[i] * Xs[i, j] * r[i]
            zj = s / W + denom[j] * bj
            if zj > lam:
                bn = (zj - lam) / denom[j]
            elif zj < -lam:
                bn = (zj + lam) / denom[j]
            else:
                bn = 0.0
            if bn != bj:
                delta = bn - bj
                for i in range(n):
                    r[i] -= delta * Xs[i, j]
                beta[j] = bn
                if abs(delta) > chg:
                    chg = abs(delta)
        it += 1
        if chg < tol:
            break
    return beta0, it, chg
