"""Compiled per-sample kernels.

All kernels take the flat forest as separate arrays (``fidx``, ``th``,
``right``, ``roots``, ``leaves``) and a ``roots`` array already permuted into
execution order. Scores accumulate in int32.
"""
import os

import numpy as np
from numba import config, njit, prange

if "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ and "NUMBA_THREADING_LAYER" not in os.environ:
    # an outdated system TBB only produces a warning before numba falls back
    config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

# keep in sync with kernels/__init__.py
KIND_FULL = 0
KIND_AGG_MAX = 1
KIND_AGG_SM = 2
KIND_LAST_SM = 3
KIND_QWYC = 4

OK = 0
BAD_NODE = 1
BAD_FEATURE = 2
BAD_LEAF = 3
CYCLE = 4


@njit(cache=True, inline="always")
def _walk_one(fidx, th, right, n_leaves, root, x):
    """Return ``(leaf_row, nodes_visited, status)`` for one tree."""
    n_nodes = fidx.shape[0]
    i = root
    visited = 0
    while True:
        if i < 0 or i >= n_nodes:
            return -1, visited, BAD_NODE
        visited += 1
        if visited > n_nodes:
            return -1, visited, CYCLE
        f = fidx[i]
        if f == -1:
            row = np.int64(right[i])
            if row >= n_leaves:
                return -1, visited, BAD_LEAF
            return row, visited, OK
        if f < 0 or f >= x.shape[0]:
            return -1, visited, BAD_FEATURE
        if x[f] > th[i]:
            i = np.int64(right[i])
        else:
            i = i + 1


@njit(cache=True, inline="always")
def _top2(s):
    m = s.shape[0]
    a = s[0]
    b = s[1] if m > 1 else s[0]
    if b > a:
        a, b = b, a
    for j in range(2, m):
        v = s[j]
        if v > a:
            b = a
            a = v
        elif v > b:
            b = v
    return a, b


@njit(cache=True, inline="always")
def _argmax(s):
    best = 0
    for j in range(1, s.shape[0]):
        if s[j] > s[best]:
            best = j
    return best


@njit(cache=True, parallel=True)
def walk(fidx, th, right, roots, n_leaves, X, leaf_ids, path_len):
    """Fill ``leaf_ids[n, t]`` and ``path_len[n, t]`` for every sample and tree."""
    n, n_trees = leaf_ids.shape
    status = np.zeros(n + 1, dtype=np.int64)  # spare slot keeps max() defined for n == 0
    for s in prange(n):
        for t in range(n_trees):
            row, visited, st = _walk_one(fidx, th, right, n_leaves, np.int64(roots[t]), X[s])
            if st != OK:
                status[s] = st
                break
            leaf_ids[s, t] = row
            path_len[s, t] = visited
    return status.max()


@njit(cache=True, inline="always")
def _decide(kind, scores, row, t, leaf_one, alpha_q, eps_lo, eps_hi):
    """Return -1 to continue, or the class to stop with."""
    if kind == KIND_AGG_MAX:
        a, b = _top2(scores)
        return _argmax(scores) if a > alpha_q else -1
    if kind == KIND_AGG_SM:
        a, b = _top2(scores)
        return _argmax(scores) if a - b > alpha_q else -1
    if kind == KIND_LAST_SM:
        a, b = _top2(row)
        return _argmax(scores) if a - b > alpha_q else -1
    if kind == KIND_QWYC:
        denom = float(t) * leaf_one
        if scores[1] < eps_lo * denom:
            return 0
        if scores[1] > eps_hi * denom:
            return 1
    return -1


@njit(cache=True, parallel=True)
def infer(fidx, th, right, roots, leaves, X, kind, alpha_q, eps_lo, eps_hi, batch, leaf_one,
          pred, trees, nodes, evals, scores):
    """Adaptive inference that stops walking trees as soon as the policy fires."""
    n = X.shape[0]
    n_trees = roots.shape[0]
    n_leaves = leaves.shape[0]
    m = leaves.shape[1]
    status = np.zeros(n + 1, dtype=np.int64)
    for s in prange(n):
        acc = scores[s]
        acc[:] = 0
        x = X[s]
        visited_total = 0
        n_eval = 0
        decided = -1
        t = 0
        row = 0
        while t < n_trees:
            row, visited, st = _walk_one(fidx, th, right, n_leaves, np.int64(roots[t]), x)
            visited_total += visited
            if st != OK:
                status[s] = st
                break
            for j in range(m):
                acc[j] += leaves[row, j]
            t += 1
            if kind != KIND_FULL and t < n_trees and t % batch == 0:
                n_eval += 1
                decided = _decide(kind, acc, leaves[row], t, leaf_one, alpha_q, eps_lo, eps_hi)
                if decided >= 0:
                    break
        pred[s] = decided if decided >= 0 else _argmax(acc)
        trees[s] = t
        nodes[s] = visited_total
        evals[s] = n_eval
    return status.max()


@njit(cache=True, parallel=True)
def replay(leaves, leaf_ids, path_len, kind, alpha_q, eps_lo, eps_hi, batch, leaf_one,
           pred, trees, nodes, evals, scores):
    """Same decisions as :func:`infer`, from precomputed leaf ids."""
    n, n_trees = leaf_ids.shape
    m = leaves.shape[1]
    for s in prange(n):
        acc = scores[s]
        acc[:] = 0
        visited_total = 0
        n_eval = 0
        decided = -1
        t = 0
        while t < n_trees:
            row = leaf_ids[s, t]
            visited_total += path_len[s, t]
            for j in range(m):
                acc[j] += leaves[row, j]
            t += 1
            if kind != KIND_FULL and t < n_trees and t % batch == 0:
                n_eval += 1
                decided = _decide(kind, acc, leaves[row], t, leaf_one, alpha_q, eps_lo, eps_hi)
                if decided >= 0:
                    break
        pred[s] = decided if decided >= 0 else _argmax(acc)
        trees[s] = t
        nodes[s] = visited_total
        evals[s] = n_eval
