"""Random forest growth: bagging, per-split feature subsampling, Gini splits.

Randomness comes from numpy's PCG64 bit generator. Tree ``k`` draws from the
stream seeded by ``SeedSequence([seed, k])``, so trees can be grown in any
order or in parallel and still reproduce bit for bit.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .forest import Dataset, Forest, TreeNode

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class TrainConfig:
    num_trees: int = 10
    max_depth: int = 6
    features_per_split: int | None = None  # None: floor(sqrt(n_features))
    bootstrap: bool = True
    rng_seed: int = 0
    min_samples_leaf: int = 1
    n_jobs: int = 1

    def resolved_features_per_split(self, n_features: int) -> int:
        k = self.features_per_split
        if k is None:
            k = max(1, math.isqrt(n_features))
        return k

    def validate(self, n_features: int) -> None:
        if self.num_trees < 1:
            raise ValueError(f"num_trees must be >= 1, got {self.num_trees}")
        if self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.min_samples_leaf < 1:
            raise ValueError(f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}")
        k = self.resolved_features_per_split(n_features)
        if not 1 <= k <= n_features:
            raise ValueError(f"features_per_split must be in [1, {n_features}], got {k}")


def tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed & _SEED_MASK, tree_index])))


def best_split(X, y, num_classes, features, min_samples_leaf=1):
    """Best Gini split of ``(X, y)`` over the candidate ``features``.

    Minimizing weighted Gini impurity is the same as maximizing
    ``sum(c_left**2)/n_left + sum(c_right**2)/n_right`` over class counts,
    which is what gets scored. Candidate thresholds are midpoints between
    consecutive distinct sorted values. Ties go to the lowest feature index,
    then the lowest threshold.

    Returns ``(feature, threshold, score)`` or ``None`` when no candidate
    leaves ``min_samples_leaf`` samples on both sides.
    """
    n = len(y)
    if n < 2 * min_samples_leaf:
        return None
    tol = 1e-12 * max(n, 1)
    onehot = np.zeros((n, num_classes))
    best = None
    for f in sorted(int(f) for f in features):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        onehot[:] = 0.0
        onehot[np.arange(n), y[order]] = 1.0
        left = np.cumsum(onehot, axis=0)[:-1]
        right = left[-1] + onehot[-1] - left
        n_left = np.arange(1, n, dtype=np.float64)
        n_right = n - n_left
        valid = (xs[:-1] < xs[1:]) & (n_left >= min_samples_leaf) & (n_right >= min_samples_leaf)
        if not valid.any():
            continue
        score = (left * left).sum(axis=1) / n_left + (right * right).sum(axis=1) / n_right
        score = np.where(valid, score, -np.inf)
        top = score.max()
        i = int(np.flatnonzero(score >= top - tol)[0])
        if best is None or top > best[2] + tol:
            lo, hi = xs[i], xs[i + 1]
            th = lo + (hi - lo) / 2.0
            if not lo <= th < hi:
                th = lo
            best = (f, float(th), float(top))
    return best


def gini(counts) -> float:
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.sum()
    return 0.0 if n == 0 else 1.0 - float(np.sum((counts / n) ** 2))


def _grow(X, y, num_classes, depth, cfg: TrainConfig, k, rng) -> TreeNode:
    counts = np.bincount(y, minlength=num_classes)
    n = len(y)
    pure = np.count_nonzero(counts) <= 1
    if depth >= cfg.max_depth or pure or n < 2 * cfg.min_samples_leaf:
        return TreeNode.leaf(counts / n)
    features = rng.choice(X.shape[1], size=k, replace=False)
    split = best_split(X, y, num_classes, features, cfg.min_samples_leaf)
    if split is None:
        return TreeNode.leaf(counts / n)
    f, th, _ = split
    go_right = X[:, f] > th
    return TreeNode.split(
        f,
        th,
        _grow(X[~go_right], y[~go_right], num_classes, depth + 1, cfg, k, rng),
        _grow(X[go_right], y[go_right], num_classes, depth + 1, cfg, k, rng),
    )


def train_tree(data: Dataset, cfg: TrainConfig, tree_index: int) -> TreeNode:
    rng = tree_rng(cfg.rng_seed, tree_index)
    n = data.n_samples
    if cfg.bootstrap:
        idx = rng.integers(0, n, size=n)
        X, y = data.features[idx], data.labels[idx]
    else:
        X, y = data.features, data.labels
    k = cfg.resolved_features_per_split(data.n_features)
    return _grow(X, y, data.num_classes, 0, cfg, k, rng)


def train_forest(data: Dataset, cfg: TrainConfig) -> Forest:
    if data.n_samples == 0:
        raise ValueError("cannot train on an empty dataset")
    cfg.validate(data.n_features)
    if cfg.n_jobs > 1:
        with ThreadPoolExecutor(cfg.n_jobs) as pool:
            trees = list(pool.map(lambda k: train_tree(data, cfg, k), range(cfg.num_trees)))
    else:
        trees = [train_tree(data, cfg, k) for k in range(cfg.num_trees)]
    return Forest(
        trees=tuple(trees),
        num_classes=data.num_classes,
        max_depth=cfg.max_depth,
        num_features=data.n_features,
        class_names=data.class_names,
    )


def _largest_remainder(quotas: np.ndarray, total: int) -> np.ndarray:
    base = np.floor(quotas).astype(np.int64)
    short = total - int(base.sum())
    if short > 0:
        # stable sort keeps the lowest class id first among equal remainders
        order = np.argsort(-(quotas - base), kind="stable")
        base[order[:short]] += 1
    return base


def train_test_split(data: Dataset, test_fraction: float, rng_seed: int = 0) -> tuple[Dataset, Dataset]:
    """Seeded stratified split; both parts keep the original sample order."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = data.n_samples
    if n < 2:
        raise ValueError("need at least two samples to split")
    n_test = min(max(int(math.floor(n * test_fraction + 0.5)), 1), n - 1)
    counts = np.bincount(data.labels, minlength=data.num_classes)
    per_class = _largest_remainder(counts * (n_test / n), n_test)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([rng_seed & _SEED_MASK])))
    test_idx = []
    for c in range(data.num_classes):
        members = np.flatnonzero(data.labels == c)
        if per_class[c]:
            test_idx.append(rng.permutation(members)[: per_class[c]])
    test_mask = np.zeros(n, dtype=bool)
    if test_idx:
        test_mask[np.concatenate(test_idx)] = True
    return data.subset(np.flatnonzero(~test_mask)), data.subset(np.flatnonzero(test_mask))
