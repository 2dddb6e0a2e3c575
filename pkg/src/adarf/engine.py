"""Static and adaptive inference over a :class:`QuantizedForest`.

Confidence thresholds are in probability-sum units: after ``t`` trees the
aggregated scores sum to ``t``, so a meaningful ``alpha`` lies in ``[0, N]``.
The hot loop compares integers against ``round(alpha * leaf_one)``.

The stopping rule is checked after each complete batch of ``B`` trees, and
never after the last tree (there is nothing left to skip). A trailing partial
batch therefore runs straight into the final argmax.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels
from .forest import Dataset
from .quantize import QuantizedForest, StructuralError

_INT64_MAX = np.iinfo(np.int64).max


class Policy(str, Enum):
    FULL = "full"
    AGG_MAX = "agg-max"
    AGG_SM = "agg-sm"
    LAST_SM = "last-sm"
    QWYC = "qwyc"

    @property
    def kernel_kind(self) -> int:
        return _KERNEL_KIND[self]


_KERNEL_KIND = {
    Policy.FULL: kernels.KIND_FULL,
    Policy.AGG_MAX: kernels.KIND_AGG_MAX,
    Policy.AGG_SM: kernels.KIND_AGG_SM,
    Policy.LAST_SM: kernels.KIND_LAST_SM,
    Policy.QWYC: kernels.KIND_QWYC,
}


@dataclass(frozen=True)
class PolicyConfig:
    kind: Policy = Policy.AGG_SM
    alpha: float = math.inf
    eps_minus: float = 0.0
    eps_plus: float = 1.0
    batch: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", Policy(self.kind))
        if self.kind not in (Policy.AGG_MAX, Policy.AGG_SM):
            object.__setattr__(self, "batch", 1)
        if math.isnan(self.alpha) or self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.batch < 1:
            raise ValueError(f"batch must be >= 1, got {self.batch}")
        if self.kind is Policy.QWYC and not 0.0 <= self.eps_minus <= self.eps_plus <= 1.0:
            raise ValueError(f"need 0 <= eps_minus <= eps_plus <= 1, got {self.eps_minus}, {self.eps_plus}")

    @classmethod
    def full(cls) -> "PolicyConfig":
        return cls(Policy.FULL)

    def validate_for(self, qf: QuantizedForest) -> None:
        if self.batch > qf.num_trees:
            raise ValueError(f"batch {self.batch} exceeds the forest's {qf.num_trees} trees")
        if self.kind in (Policy.AGG_SM, Policy.LAST_SM) and qf.num_classes < 2:
            raise ValueError("score margin needs at least two classes")
        if self.kind is Policy.QWYC and qf.num_classes != 2:
            raise ValueError(f"QWYC supports binary forests only, got {qf.num_classes} classes")

    def alpha_q(self, leaf_one: int) -> int:
        if math.isinf(self.alpha):
            return int(_INT64_MAX)
        return int(min(math.floor(self.alpha * leaf_one + 0.5), _INT64_MAX))

    def describe(self) -> str:
        if self.kind is Policy.QWYC:
            return f"qwyc(eps-={self.eps_minus:g}, eps+={self.eps_plus:g})"
        if self.kind is Policy.FULL:
            return "full"
        return f"{self.kind.value}(alpha={self.alpha:g}, B={self.batch})"


@dataclass(frozen=True)
class InferenceTrace:
    trees_executed: int
    nodes_visited: int
    score_accumulations: int
    policy_evaluations: int
    stopped_early: bool
    predicted_class: int
    policy: Policy = Policy.FULL
    scores: tuple[int, ...] = ()


@dataclass(frozen=True, eq=False)
class BatchResult:
    """Per-sample outcome arrays of a batched inference run."""

    pred: np.ndarray
    trees: np.ndarray
    nodes: np.ndarray
    evals: np.ndarray
    scores: np.ndarray  # int32 [n, M] aggregated scores at stop time
    num_trees: int
    policy: Policy

    @property
    def num_classes(self) -> int:
        return self.scores.shape[1]

    @property
    def accumulations(self) -> np.ndarray:
        return self.trees * self.num_classes

    @property
    def stopped_early(self) -> np.ndarray:
        return self.trees < self.num_trees

    def __len__(self) -> int:
        return len(self.pred)

    def trace(self, i: int) -> InferenceTrace:
        return InferenceTrace(
            trees_executed=int(self.trees[i]),
            nodes_visited=int(self.nodes[i]),
            score_accumulations=int(self.trees[i]) * self.num_classes,
            policy_evaluations=int(self.evals[i]),
            stopped_early=bool(self.trees[i] < self.num_trees),
            predicted_class=int(self.pred[i]),
            policy=self.policy,
            scores=tuple(int(v) for v in self.scores[i]),
        )


@dataclass(frozen=True, eq=False)
class LeafTable:
    """Leaf row and path length of every (sample, tree) pair, in execution order."""

    leaf_ids: np.ndarray
    path_len: np.ndarray
    order: np.ndarray

    def reordered(self, permutation) -> "LeafTable":
        """Table for executing trees in ``permutation`` (original indexes) order."""
        position = np.argsort(self.order)
        cols = position[np.asarray(permutation, dtype=np.int64)]
        return LeafTable(
            np.ascontiguousarray(self.leaf_ids[:, cols]),
            np.ascontiguousarray(self.path_len[:, cols]),
            self.order[cols],
        )

    def prefix(self, n_trees: int) -> "LeafTable":
        return LeafTable(
            np.ascontiguousarray(self.leaf_ids[:, :n_trees]),
            np.ascontiguousarray(self.path_len[:, :n_trees]),
            self.order[:n_trees],
        )


def _order(qf: QuantizedForest, order) -> np.ndarray:
    if order is None:
        return np.arange(qf.num_trees)
    order = np.asarray(order, dtype=np.int64)
    if sorted(order.tolist()) != list(range(qf.num_trees)):
        raise ValueError("tree order must be a permutation of range(num_trees)")
    return order


def _as_codes(qf: QuantizedForest, Xq) -> np.ndarray:
    Xq = np.asarray(Xq)
    if Xq.dtype != np.int16:
        raise TypeError("inputs must be int16 codes from quantize_input")
    if Xq.ndim == 1:
        Xq = Xq[None, :]
    if Xq.shape[1] != qf.num_features:
        raise ValueError(f"expected {qf.num_features} features, got {Xq.shape[1]}")
    return np.ascontiguousarray(Xq)


def _raise_status(status: int) -> None:
    if status != kernels.OK:
        raise StructuralError(kernels.STATUS_TEXT.get(int(status), f"kernel status {status}"))


def _outputs(n: int, m: int):
    return (
        np.empty(n, dtype=np.int64),
        np.empty(n, dtype=np.int64),
        np.empty(n, dtype=np.int64),
        np.empty(n, dtype=np.int64),
        np.empty((n, m), dtype=np.int32),
    )


def run_batch(qf: QuantizedForest, Xq, policy: PolicyConfig | None = None, order=None, backend=None) -> BatchResult:
    """Run ``policy`` on every row of ``Xq`` (int16 codes)."""
    policy = policy or PolicyConfig.full()
    policy.validate_for(qf)
    Xq = _as_codes(qf, Xq)
    roots = np.ascontiguousarray(qf.roots[_order(qf, order)])
    out = _outputs(len(Xq), qf.num_classes)
    status = kernels.get(backend).infer(
        qf.fidx, qf.th, qf.right, roots, qf.leaves, Xq,
        policy.kind.kernel_kind, policy.alpha_q(qf.leaf_one), float(policy.eps_minus), float(policy.eps_plus),
        policy.batch, qf.leaf_one, *out,
    )
    _raise_status(status)
    return BatchResult(*out, num_trees=qf.num_trees, policy=policy.kind)


def leaf_table(qf: QuantizedForest, Xq, order=None, backend=None) -> LeafTable:
    """Walk every tree once for every input; feed the result to :func:`replay`."""
    Xq = _as_codes(qf, Xq)
    order = _order(qf, order)
    roots = np.ascontiguousarray(qf.roots[order])
    leaf_ids = np.empty((len(Xq), qf.num_trees), dtype=np.int64)
    path_len = np.empty((len(Xq), qf.num_trees), dtype=np.int64)
    status = kernels.get(backend).walk(qf.fidx, qf.th, qf.right, roots, qf.n_leaves, Xq, leaf_ids, path_len)
    _raise_status(status)
    return LeafTable(leaf_ids, path_len, order)


def replay(qf: QuantizedForest, table: LeafTable, policy: PolicyConfig | None = None, backend=None) -> BatchResult:
    """Policy decisions from a precomputed :class:`LeafTable`; same output as :func:`run_batch`.

    A table holding only the first ``k`` trees behaves like a ``k``-tree forest.
    """
    policy = policy or PolicyConfig.full()
    policy.validate_for(qf)
    out = _outputs(table.leaf_ids.shape[0], qf.num_classes)
    kernels.get(backend).replay(
        qf.leaves, table.leaf_ids, table.path_len,
        policy.kind.kernel_kind, policy.alpha_q(qf.leaf_one), float(policy.eps_minus), float(policy.eps_plus),
        policy.batch, qf.leaf_one, *out,
    )
    return BatchResult(*out, num_trees=table.leaf_ids.shape[1], policy=policy.kind)


def predict(qf: QuantizedForest, Xq, backend=None) -> np.ndarray:
    return run_batch(qf, Xq, backend=backend).pred


# single-input API


def tree_infer(qf: QuantizedForest, tree_idx: int, xq) -> tuple[np.ndarray, int]:
    """Leaf row reached by ``xq`` in tree ``tree_idx`` and the number of nodes visited."""
    if not 0 <= tree_idx < qf.num_trees:
        raise IndexError(f"tree index {tree_idx} out of range [0, {qf.num_trees})")
    xq = np.asarray(xq)
    i = int(qf.roots[tree_idx])
    visited = 0
    while True:
        if not 0 <= i < qf.n_nodes:
            raise StructuralError(f"node index {i} escapes the FOREST array")
        visited += 1
        if visited > qf.n_nodes:
            raise StructuralError("walk exceeded the node count (cyclic links)")
        f = int(qf.fidx[i])
        if f == -1:
            row = int(qf.right[i])
            if row >= qf.n_leaves:
                raise StructuralError(f"leaf row {row} escapes the LEAVES array")
            return qf.leaves[row], visited
        if not 0 <= f < len(xq):
            raise StructuralError(f"feature index {f} outside the input vector")
        i = int(qf.right[i]) if xq[f] > qf.th[i] else i + 1


def full_infer(qf: QuantizedForest, xq, backend=None) -> tuple[int, InferenceTrace]:
    res = run_batch(qf, xq, PolicyConfig.full(), backend=backend)
    return int(res.pred[0]), res.trace(0)


def adaptive_infer(qf: QuantizedForest, xq, policy: PolicyConfig, order=None, backend=None) -> tuple[int, InferenceTrace]:
    res = run_batch(qf, xq, policy, order=order, backend=backend)
    return int(res.pred[0]), res.trace(0)


def qwyc_infer(qf: QuantizedForest, permutation, xq, eps_minus: float, eps_plus: float, backend=None):
    """Binary early exit on the running mean positive-class probability.

    After each tree (in ``permutation`` order) the mean probability of class 1
    so far is compared with the two thresholds: below ``eps_minus`` stops with
    class 0, above ``eps_plus`` stops with class 1.
    """
    policy = PolicyConfig(Policy.QWYC, eps_minus=eps_minus, eps_plus=eps_plus)
    return adaptive_infer(qf, xq, policy, order=permutation, backend=backend)


# confidence measures, in probability-sum units


def _scores(scores) -> np.ndarray:
    s = np.asarray(scores)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("scores must be a non-empty vector")
    return s


def conf_agg_max(scores, leaf_one: int = 1) -> float:
    """Largest aggregated score."""
    s = _scores(scores)
    return float(s.max()) / leaf_one


def conf_agg_sm(scores, leaf_one: int = 1) -> float:
    """Gap between the two largest aggregated scores."""
    s = _scores(scores)
    if s.size < 2:
        raise ValueError("score margin needs at least two classes")
    top = np.partition(s, s.size - 2)
    return float(top[-1] - top[-2]) / leaf_one


def conf_last_sm(last_row, leaf_one: int = 1) -> float:
    """Score margin of the most recent tree's leaf row alone."""
    return conf_agg_sm(last_row, leaf_one)


def qwyc_order_trees(qf: QuantizedForest, calibration, eps_minus: float, eps_plus: float, backend=None) -> np.ndarray:
    """Greedy static tree order for :func:`qwyc_infer`.

    Step ``t`` appends the unplaced tree that makes the most still-running
    calibration inputs exit at ``t``. Ties go to the lowest original index.
    """
    if qf.num_classes != 2:
        raise ValueError(f"QWYC supports binary forests only, got {qf.num_classes} classes")
    if not 0.0 <= eps_minus <= eps_plus <= 1.0:
        raise ValueError(f"need 0 <= eps_minus <= eps_plus <= 1, got {eps_minus}, {eps_plus}")
    if isinstance(calibration, Dataset):
        Xq = qf.quantize_input(calibration.features)
    else:
        Xq = calibration
    table = leaf_table(qf, Xq, backend=backend)
    pos = qf.leaves[:, 1].astype(np.int64)[table.leaf_ids]  # [n, T]
    n, n_trees = pos.shape
    running = np.zeros(n, dtype=np.int64)
    active = np.ones(n, dtype=bool)
    free = np.ones(n_trees, dtype=bool)
    order = []
    for t in range(1, n_trees + 1):
        cand = np.flatnonzero(free)
        trial = running[:, None] + pos[:, cand]
        denom = float(t) * qf.leaf_one
        exits = active[:, None] & ((trial < eps_minus * denom) | (trial > eps_plus * denom))
        best = int(cand[int(np.argmax(exits.sum(axis=0)))])
        order.append(best)
        free[best] = False
        running += pos[:, best]
        active &= ~((running < eps_minus * denom) | (running > eps_plus * denom))
    return np.asarray(order, dtype=np.int64)
