"""Vectorized fallback kernels; signatures mirror ``_numba``."""
import numpy as np

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


def walk(fidx, th, right, roots, n_leaves, X, leaf_ids, path_len):
    """Level-synchronous walk of every (sample, tree) pair at once."""
    n, n_trees = leaf_ids.shape
    n_nodes = fidx.shape[0]
    if n == 0 or n_trees == 0:
        return OK
    node = np.broadcast_to(roots.astype(np.int64), (n, n_trees)).copy()
    steps = np.zeros((n, n_trees), dtype=np.int64)
    done = np.zeros((n, n_trees), dtype=bool)
    rows = np.arange(n)[:, None]
    while True:
        if np.any((node < 0) | (node >= n_nodes)):
            return BAD_NODE
        steps += ~done
        if steps.max() > n_nodes:
            return CYCLE
        f = fidx[node].astype(np.int64)
        done |= f == -1
        if done.all():
            break
        if np.any(~done & ((f < 0) | (f >= X.shape[1]))):
            return BAD_FEATURE
        go_right = X[rows, np.where(done, 0, f)] > th[node]
        nxt = np.where(go_right, right[node].astype(np.int64), node + 1)
        node = np.where(done, node, nxt)
    ids = right[node].astype(np.int64)
    if np.any(ids >= n_leaves):
        return BAD_LEAF
    leaf_ids[:] = ids
    path_len[:] = steps
    return OK


def _top2(s):
    """Largest and second-largest along the last axis."""
    if s.shape[-1] == 1:
        return s[..., 0], s[..., 0]
    part = np.partition(s, s.shape[-1] - 2, axis=-1)
    return part[..., -1], part[..., -2]


def replay(leaves, leaf_ids, path_len, kind, alpha_q, eps_lo, eps_hi, batch, leaf_one,
           pred, trees, nodes, evals, scores):
    n, n_trees = leaf_ids.shape
    rows = leaves.astype(np.int64)[leaf_ids]  # [n, T, M]
    cum = np.cumsum(rows, axis=1)
    t_count = np.arange(1, n_trees + 1)
    boundary = (t_count % batch == 0) & (t_count < n_trees) & (kind != KIND_FULL)

    fire = np.zeros((n, n_trees), dtype=bool)
    forced = np.full((n, n_trees), -1, dtype=np.int64)
    if kind == KIND_AGG_MAX:
        fire = cum.max(axis=-1) > alpha_q
    elif kind == KIND_AGG_SM:
        a, b = _top2(cum)
        fire = a - b > alpha_q
    elif kind == KIND_LAST_SM:
        a, b = _top2(rows)
        fire = a - b > alpha_q
    elif kind == KIND_QWYC:
        denom = t_count.astype(np.float64) * leaf_one
        low = cum[..., 1] < eps_lo * denom
        high = cum[..., 1] > eps_hi * denom
        fire = low | high
        forced = np.where(low, 0, np.where(high, 1, -1))
    fire &= boundary

    stopped = fire.any(axis=1)
    stop_idx = np.where(stopped, fire.argmax(axis=1), n_trees - 1)
    idx = np.arange(n)
    final = cum[idx, stop_idx]
    decided = forced[idx, stop_idx]
    pred[:] = np.where(stopped & (decided >= 0), decided, final.argmax(axis=1))
    trees[:] = stop_idx + 1
    executed = np.arange(n_trees)[None, :] <= stop_idx[:, None]
    nodes[:] = np.where(executed, path_len, 0).sum(axis=1)
    evals[:] = np.where(executed, boundary[None, :], False).sum(axis=1)
    scores[:] = final


def infer(fidx, th, right, roots, leaves, X, kind, alpha_q, eps_lo, eps_hi, batch, leaf_one,
          pred, trees, nodes, evals, scores):
    n = X.shape[0]
    leaf_ids = np.empty((n, roots.shape[0]), dtype=np.int64)
    path_len = np.empty((n, roots.shape[0]), dtype=np.int64)
    status = walk(fidx, th, right, roots, leaves.shape[0], X, leaf_ids, path_len)
    if status != OK:
        return status
    replay(leaves, leaf_ids, path_len, kind, alpha_q, eps_lo, eps_hi, batch, leaf_one,
           pred, trees, nodes, evals, scores)
    return OK
