"""Numba kernels for honest tree growing, traversal, and weight queries.

Trees are grown on a build subsample and populated with a disjoint
estimation subsample. A split is admissible only if both children receive at
least ``min_leaf`` build units and ``min_leaf`` estimation units. Candidate
thresholds are midpoints between consecutive distinct sorted values of the
candidate variable in the build subsample; ties in the split criterion are
broken by the lowest variable index, then the lowest threshold.

Per-node feature subsets are drawn without replacement from a splitmix64
stream seeded per tree, so growing is bit-reproducible and independent of
scheduling.
"""

from __future__ import annotations

import numpy as np
from numba import njit

SPLIT_REGRESSION = 0
SPLIT_CAUSAL = 1


@njit(cache=True, inline="always")
def _splitmix64(state):
    state = (state + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = state
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    return state, z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _rand_below(state, bound):
    # rejection-free modulo; bias is negligible for bounds << 2^64
    state, z = _splitmix64(state)
    return state, z % np.uint64(bound)


@njit(cache=True)
def grow_tree(
    X,            # (n, k) full training matrix
    z,            # (n,) split outcome: y for regression trees, y_centered for causal
    d,            # (n,) treatment (centered for causal splitting); unused for regression
    build_idx,    # int64 row ids of the build subsample
    est_idx,      # int64 row ids of the estimation subsample
    split_mode,   # SPLIT_REGRESSION or SPLIT_CAUSAL
    mtry,
    min_leaf,
    tree_seed,    # uint64 stream seed for per-node feature draws
    feature,      # out: int32 (max_nodes,)
    threshold,    # out: float64
    left,         # out: int32
    right,        # out: int32
):
    """Grow one honest tree; returns (n_nodes, est_leaf) with the leaf id of
    every estimation unit."""
    n_build = build_idx.shape[0]
    n_est = est_idx.shape[0]
    k = X.shape[1]
    state = tree_seed

    bidx = build_idx.copy()
    eidx = est_idx.copy()
    est_leaf = np.empty(n_est, dtype=np.int32)

    # node stack: ranges into bidx / eidx
    max_nodes = feature.shape[0]
    stack_node = np.empty(max_nodes, dtype=np.int32)
    stack_bs = np.empty(max_nodes, dtype=np.int32)
    stack_be = np.empty(max_nodes, dtype=np.int32)
    stack_es = np.empty(max_nodes, dtype=np.int32)
    stack_ee = np.empty(max_nodes, dtype=np.int32)

    feats = np.empty(k, dtype=np.int32)
    rho = np.empty(n_build)
    vals = np.empty(n_build)
    evals = np.empty(n_est)

    n_nodes = 1
    top = 0
    stack_node[0] = 0
    stack_bs[0] = 0
    stack_be[0] = n_build
    stack_es[0] = 0
    stack_ee[0] = n_est

    while top >= 0:
        node = stack_node[top]
        bs, be = stack_bs[top], stack_be[top]
        es, ee = stack_es[top], stack_ee[top]
        top -= 1
        m = be - bs
        me = ee - es

        feature[node] = -1
        threshold[node] = 0.0
        left[node] = -1
        right[node] = -1

        can_split = m >= 2 * min_leaf and me >= 2 * min_leaf
        if can_split and split_mode == SPLIT_CAUSAL:
            # pseudo-outcome for the parent: slope of z on d, recomputed here
            sd = 0.0
            sz = 0.0
            for i in range(bs, be):
                sd += d[bidx[i]]
                sz += z[bidx[i]]
            dbar = sd / m
            zbar = sz / m
            sdd = 0.0
            sdz = 0.0
            for i in range(bs, be):
                dd = d[bidx[i]] - dbar
                sdd += dd * dd
                sdz += dd * (z[bidx[i]] - zbar)
            if sdd <= 0.0:
                can_split = False  # no treatment variation: becomes a leaf
            else:
                beta = sdz / sdd
                var_d = sdd / m
                for i in range(bs, be):
                    dd = d[bidx[i]] - dbar
                    rho[i - bs] = dd * (z[bidx[i]] - zbar - dd * beta) / var_d

        best_gain = 0.0
        best_feat = -1
        best_thr = 0.0
        if can_split:
            n_feats = mtry if mtry < k else k
            for j in range(k):
                feats[j] = j
            # partial Fisher-Yates draw of n_feats distinct features
            for j in range(n_feats):
                state, r = _rand_below(state, np.uint64(k - j))
                pick = j + np.int64(r)
                tmp = feats[j]
                feats[j] = feats[pick]
                feats[pick] = tmp

            for fi in range(n_feats):
                f = feats[fi]
                for i in range(m):
                    row = bidx[bs + i]
                    vals[i] = X[row, f]
                order = np.argsort(vals[:m], kind="mergesort")
                for i in range(me):
                    evals[i] = X[eidx[es + i], f]
                ev = np.sort(evals[:me])

                total = 0.0
                if split_mode == SPLIT_CAUSAL:
                    for i in range(m):
                        total += rho[order[i]]
                else:
                    for i in range(m):
                        total += z[bidx[bs + order[i]]]

                run = 0.0
                e_ptr = 0
                for i in range(m - 1):
                    if split_mode == SPLIT_CAUSAL:
                        run += rho[order[i]]
                    else:
                        run += z[bidx[bs + order[i]]]
                    v_lo = vals[order[i]]
                    v_hi = vals[order[i + 1]]
                    if v_lo == v_hi:
                        continue
                    thr = 0.5 * (v_lo + v_hi)
                    n_l = i + 1
                    n_r = m - n_l
                    if n_l < min_leaf or n_r < min_leaf:
                        continue
                    while e_ptr < me and ev[e_ptr] <= thr:
                        e_ptr += 1
                    if e_ptr < min_leaf or me - e_ptr < min_leaf:
                        continue
                    diff = run / n_l - (total - run) / n_r
                    gain = n_l * n_r * diff * diff
                    if gain > best_gain or (
                        gain == best_gain
                        and best_feat >= 0
                        and (f < best_feat or (f == best_feat and thr < best_thr))
                    ):
                        best_gain = gain
                        best_feat = f
                        best_thr = thr

        if best_feat < 0 or best_gain <= 0.0:
            # leaf: positions es..ee of eidx are final once the node stops splitting
            for i in range(es, ee):
                est_leaf[i] = node
            continue

        feature[node] = best_feat
        threshold[node] = best_thr

        # partition build rows
        lo, hi = bs, be - 1
        while lo <= hi:
            if X[bidx[lo], best_feat] <= best_thr:
                lo += 1
            else:
                tmp = bidx[lo]
                bidx[lo] = bidx[hi]
                bidx[hi] = tmp
                hi -= 1
        b_mid = lo
        # partition estimation rows
        lo, hi = es, ee - 1
        while lo <= hi:
            if X[eidx[lo], best_feat] <= best_thr:
                lo += 1
            else:
                tmp = eidx[lo]
                eidx[lo] = eidx[hi]
                eidx[hi] = tmp
                hi -= 1
        e_mid = lo

        left_id = n_nodes
        right_id = n_nodes + 1
        n_nodes += 2
        left[node] = left_id
        right[node] = right_id

        top += 1
        stack_node[top] = left_id
        stack_bs[top] = bs
        stack_be[top] = b_mid
        stack_es[top] = es
        stack_ee[top] = e_mid
        top += 1
        stack_node[top] = right_id
        stack_bs[top] = b_mid
        stack_be[top] = be
        stack_es[top] = e_mid
        stack_ee[top] = ee

    # est_leaf above was written against permuted eidx positions; emit pairs
    out_rows = eidx
    return n_nodes, out_rows, est_leaf


@njit(cache=True)
def tree_leaf_ids(feature, threshold, left, right, Xq):
    """Leaf node id for every query row."""
    nq = Xq.shape[0]
    out = np.empty(nq, dtype=np.int32)
    for q in range(nq):
        node = 0
        while feature[node] >= 0:
            if Xq[q, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[q] = node
    return out


@njit(cache=True)
def forest_predict_regression(
    tree_offsets, feature, threshold, left, right, leaf_value, Xq
):
    """Average per-tree leaf means (flat node arrays with per-tree offsets)."""
    n_trees = tree_offsets.shape[0] - 1
    nq = Xq.shape[0]
    out = np.zeros(nq)
    for t in range(n_trees):
        base = tree_offsets[t]
        for q in range(nq):
            node = base
            while feature[node] >= 0:
                if Xq[q, feature[node]] <= threshold[node]:
                    node = base + left[node]
                else:
                    node = base + right[node]
            out[q] += leaf_value[node]
    return out / n_trees


@njit(cache=True)
def forest_predict_causal(
    tree_offsets, feature, threshold, left, right,
    leaf_mean1, leaf_count1, leaf_mean0, leaf_count0, Xq
):
    """Difference of per-arm leaf means, each averaged over the trees whose
    leaf contains that arm; queries where one arm never appears give NaN."""
    n_trees = tree_offsets.shape[0] - 1
    nq = Xq.shape[0]
    sum1 = np.zeros(nq)
    sum0 = np.zeros(nq)
    cnt1 = np.zeros(nq, dtype=np.int64)
    cnt0 = np.zeros(nq, dtype=np.int64)
    for t in range(n_trees):
        base = tree_offsets[t]
        for q in range(nq):
            node = base
            while feature[node] >= 0:
                if Xq[q, feature[node]] <= threshold[node]:
                    node = base + left[node]
                else:
                    node = base + right[node]
            if leaf_count1[node] > 0:
                sum1[q] += leaf_mean1[node]
                cnt1[q] += 1
            if leaf_count0[node] > 0:
                sum0[q] += leaf_mean0[node]
                cnt0[q] += 1
    out = np.empty(nq)
    for q in range(nq):
        if cnt1[q] == 0 or cnt0[q] == 0:
            out[q] = np.nan
        else:
            out[q] = sum1[q] / cnt1[q] - sum0[q] / cnt0[q]
    return out


@njit(cache=True)
def forest_weights_regression(
    tree_offsets, feature, threshold, left, right,
    est_offsets, est_rows, est_leaf, node_est_count, Xq, n_train
):
    """Training-row weight vectors: average over trees of within-leaf uniform
    weights on the estimation units. Rows sum to 1."""
    n_trees = tree_offsets.shape[0] - 1
    nq = Xq.shape[0]
    out = np.zeros((nq, n_train))
    for t in range(n_trees):
        base = tree_offsets[t]
        e0, e1 = est_offsets[t], est_offsets[t + 1]
        for q in range(nq):
            node = base
            while feature[node] >= 0:
                if Xq[q, feature[node]] <= threshold[node]:
                    node = base + left[node]
                else:
                    node = base + right[node]
            cnt = node_est_count[node]
            wgt = 1.0 / (cnt * n_trees)
            for e in range(e0, e1):
                if est_leaf[e] == node:
                    out[q, est_rows[e]] += wgt
    return out


@njit(cache=True)
def forest_weights_causal(
    tree_offsets, feature, threshold, left, right,
    est_offsets, est_rows, est_leaf, node_count1, node_count0,
    d, Xq, n_train
):
    """Per-arm weight vectors normalized within arm across contributing trees."""
    n_trees = tree_offsets.shape[0] - 1
    nq = Xq.shape[0]
    w1 = np.zeros((nq, n_train))
    w0 = np.zeros((nq, n_train))
    trees1 = np.zeros(nq, dtype=np.int64)
    trees0 = np.zeros(nq, dtype=np.int64)
    leaf_of_q = np.empty((n_trees, nq), dtype=np.int32)
    for t in range(n_trees):
        base = tree_offsets[t]
        for q in range(nq):
            node = base
            while feature[node] >= 0:
                if Xq[q, feature[node]] <= threshold[node]:
                    node = base + left[node]
                else:
                    node = base + right[node]
            leaf_of_q[t, q] = node
            if node_count1[node] > 0:
                trees1[q] += 1
            if node_count0[node] > 0:
                trees0[q] += 1
    for t in range(n_trees):
        e0, e1 = est_offsets[t], est_offsets[t + 1]
        for q in range(nq):
            node = leaf_of_q[t, q]
            c1 = node_count1[node]
            c0 = node_count0[node]
            for e in range(e0, e1):
                if est_leaf[e] == node:
                    row = est_rows[e]
                    if d[row] > 0.5:
                        if c1 > 0:
                            w1[q, row] += 1.0 / (c1 * trees1[q])
                    else:
                        if c0 > 0:
                            w0[q, row] += 1.0 / (c0 * trees0[q])
    return w1, w0
