"""16-bit flat-array forest layout and the matching input quantizer.

Layout: trees are flattened in pre-order into one node table. A node at
index ``i`` keeps its left child at ``i + 1`` and stores only the right
child's index. Leaves are marked ``fidx == -1`` and their ``right`` field
points at a row of the LEAVES matrix instead.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .forest import Dataset, Forest, TreeNode

INT16_MAX = 32767
MAX_NODES = 1 << 16
DEFAULT_LEAF_ONE = 1 << 14

NODE_DTYPE = np.dtype([("fidx", np.int16), ("th", np.int16), ("right", np.uint16)])


class StructuralError(ValueError):
    """Raised when a flat forest's indexes escape their arrays."""


def round_half_away(v):
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.floor(np.abs(v) + 0.5)


def feature_ranges(X) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature ``(offset, scale)`` mapping ``[min, max]`` onto ``[-32767, 32767]``.

    A constant feature gets ``scale = 1`` and ``offset = value``.
    """
    X = np.asarray(X, dtype=np.float64)
    lo, hi = X.min(axis=0), X.max(axis=0)
    half = (hi - lo) / 2.0
    const = half <= 0
    offset = np.where(const, lo, lo + half)
    scale = np.where(const, 1.0, INT16_MAX / np.where(const, 1.0, half))
    return offset, scale


def quantize_values(X, offset, scale) -> np.ndarray:
    q = round_half_away((np.asarray(X, dtype=np.float64) - offset) * scale)
    return np.clip(q, -INT16_MAX, INT16_MAX).astype(np.int16)


def dequantize_values(Q, offset, scale) -> np.ndarray:
    return np.asarray(Q, dtype=np.float64) / scale + offset


def quantize_leaf_row(probs, leaf_one: int = DEFAULT_LEAF_ONE) -> np.ndarray:
    """Fixed-point leaf row that sums to exactly ``leaf_one``.

    The rounding residual lands on the largest entry, so argmax survives.
    """
    row = round_half_away(np.asarray(probs, dtype=np.float64) * leaf_one).astype(np.int64)
    row[int(np.argmax(row))] += leaf_one - int(row.sum())
    return row.astype(np.int16)


@dataclass(frozen=True, eq=False)
class QuantizedForest:
    fidx: np.ndarray  # int16, -1 marks a leaf
    th: np.ndarray  # int16
    right: np.ndarray  # uint16: right child, or LEAVES row for leaves
    roots: np.ndarray  # uint16, one per tree
    leaves: np.ndarray  # int16 [n_leaves, num_classes]
    feature_offset: np.ndarray
    feature_scale: np.ndarray
    leaf_one: int
    num_classes: int
    max_depth: int
    class_names: tuple[str, ...] | None = None

    def __post_init__(self):
        for name in ("fidx", "th", "right", "roots", "leaves", "feature_offset", "feature_scale"):
            getattr(self, name).flags.writeable = False

    @property
    def num_trees(self) -> int:
        return len(self.roots)

    @property
    def num_features(self) -> int:
        return len(self.feature_offset)

    @property
    def n_nodes(self) -> int:
        return len(self.fidx)

    @property
    def n_leaves(self) -> int:
        return self.leaves.shape[0]

    @property
    def forest_nodes(self) -> np.ndarray:
        """Node table as records ``(fidx, th, right)``, the FOREST array."""
        out = np.empty(self.n_nodes, dtype=NODE_DTYPE)
        out["fidx"], out["th"], out["right"] = self.fidx, self.th, self.right
        return out

    def tree_span(self, k: int) -> tuple[int, int]:
        start = int(self.roots[k])
        end = int(self.roots[k + 1]) if k + 1 < self.num_trees else self.n_nodes
        return start, end

    def quantize_input(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.num_features:
            raise ValueError(f"expected {self.num_features} features, got {X.shape[-1]}")
        return quantize_values(X, self.feature_offset, self.feature_scale)

    def dequantized_thresholds(self) -> np.ndarray:
        th = np.zeros(self.n_nodes)
        split = self.fidx >= 0
        f = self.fidx[split].astype(np.intp)
        th[split] = dequantize_values(self.th[split], self.feature_offset[f], self.feature_scale[f])
        return th

    def dequantize(self) -> Forest:
        """Float forest with dequantized thresholds and ``LEAVES / leaf_one`` leaf scores."""
        th = self.dequantized_thresholds()

        def build(i: int) -> TreeNode:
            if self.fidx[i] < 0:
                return TreeNode.leaf(self.leaves[self.right[i]] / self.leaf_one)
            return TreeNode.split(int(self.fidx[i]), float(th[i]), build(i + 1), build(int(self.right[i])))

        return Forest(
            trees=tuple(build(int(r)) for r in self.roots),
            num_classes=self.num_classes,
            max_depth=self.max_depth,
            num_features=self.num_features,
            class_names=self.class_names,
        )

    def check_structure(self) -> None:
        """Walk every tree in pre-order and verify the layout invariants."""
        if self.n_nodes > MAX_NODES:
            raise StructuralError(f"{self.n_nodes} nodes exceed the {MAX_NODES}-node limit")
        rows_sum = self.leaves.astype(np.int64).sum(axis=1)
        if np.any(rows_sum != self.leaf_one):
            raise StructuralError("a LEAVES row does not sum to leaf_one")
        seen = np.zeros(self.n_nodes, dtype=bool)
        for k in range(self.num_trees):
            start, end = self.tree_span(k)
            stack = [start]
            while stack:
                i = stack.pop()
                if not start <= i < end:
                    raise StructuralError(f"tree {k}: node index {i} escapes [{start}, {end})")
                if seen[i]:
                    raise StructuralError(f"tree {k}: node {i} reached twice")
                seen[i] = True
                if self.fidx[i] == -1:
                    if self.right[i] >= self.n_leaves:
                        raise StructuralError(f"node {i}: LEAVES row {self.right[i]} out of range")
                elif 0 <= self.fidx[i] < self.num_features:
                    stack.append(int(self.right[i]))
                    stack.append(i + 1)
                else:
                    raise StructuralError(f"node {i}: invalid feature index {self.fidx[i]}")
            if not seen[start:end].all():
                raise StructuralError(f"tree {k}: unreachable nodes in [{start}, {end})")

    # JSON interchange

    def to_dict(self) -> dict:
        d = {
            "format": "adarf-quantized-forest",
            "leaf_one": self.leaf_one,
            "num_classes": self.num_classes,
            "num_features": self.num_features,
            "num_trees": self.num_trees,
            "max_depth": self.max_depth,
            "forest": [[int(f), int(t), int(r)] for f, t, r in zip(self.fidx, self.th, self.right)],
            "root": self.roots.tolist(),
            "leaves": self.leaves.tolist(),
            "feature_offset": self.feature_offset.tolist(),
            "feature_scale": self.feature_scale.tolist(),
        }
        if self.class_names is not None:
            d["class_names"] = list(self.class_names)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":")) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "QuantizedForest":
        nodes = np.asarray(d["forest"], dtype=np.int64).reshape(-1, 3)
        names = d.get("class_names")
        qf = cls(
            fidx=nodes[:, 0].astype(np.int16),
            th=nodes[:, 1].astype(np.int16),
            right=nodes[:, 2].astype(np.uint16),
            roots=np.asarray(d["root"], dtype=np.uint16),
            leaves=np.asarray(d["leaves"], dtype=np.int16).reshape(-1, int(d["num_classes"])),
            feature_offset=np.asarray(d["feature_offset"], dtype=np.float64),
            feature_scale=np.asarray(d["feature_scale"], dtype=np.float64),
            leaf_one=int(d["leaf_one"]),
            num_classes=int(d["num_classes"]),
            max_depth=int(d["max_depth"]),
            class_names=tuple(names) if names is not None else None,
        )
        qf.check_structure()
        return qf

    @classmethod
    def from_json(cls, text: str) -> "QuantizedForest":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "QuantizedForest":
        with open(path) as fh:
            return cls.from_json(fh.read())


def quantize_forest(forest: Forest, calibration, leaf_one: int = DEFAULT_LEAF_ONE) -> QuantizedForest:
    """Flatten ``forest`` to int16 arrays, calibrating feature ranges on ``calibration``.

    ``calibration`` is a :class:`Dataset` or a feature matrix.
    """
    X = calibration.features if isinstance(calibration, Dataset) else np.asarray(calibration, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != forest.num_features or X.shape[0] == 0:
        raise ValueError(f"calibration data must be a non-empty [n, {forest.num_features}] matrix")
    if not 1 <= leaf_one <= INT16_MAX:
        raise ValueError(f"leaf_one must fit in int16, got {leaf_one}")
    if forest.n_trees * leaf_one >= 2**31:
        raise ValueError("num_trees * leaf_one overflows the 32-bit score accumulator")
    if forest.num_features > INT16_MAX:
        raise ValueError("feature indexes must fit in int16")
    n_nodes = forest.n_nodes()
    if n_nodes > MAX_NODES:
        raise ValueError(f"forest has {n_nodes} nodes; the 16-bit layout holds at most {MAX_NODES}")

    offset, scale = feature_ranges(X)
    fidx = np.empty(n_nodes, dtype=np.int16)
    th = np.zeros(n_nodes, dtype=np.int16)
    right = np.zeros(n_nodes, dtype=np.uint16)
    roots = np.empty(forest.n_trees, dtype=np.uint16)
    leaf_rows = []

    def emit(node: TreeNode, i: int) -> int:
        """Write ``node``'s subtree starting at index ``i``; return the next free index."""
        if node.is_leaf:
            if len(leaf_rows) >= MAX_NODES:
                raise ValueError(f"more than {MAX_NODES} leaves")
            fidx[i] = -1
            right[i] = len(leaf_rows)
            leaf_rows.append(quantize_leaf_row(node.leaf_scores, leaf_one))
            return i + 1
        f = node.feature_index
        fidx[i] = f
        th[i] = quantize_values(node.threshold, offset[f], scale[f])
        nxt = emit(node.left, i + 1)
        right[i] = nxt
        return emit(node.right, nxt)

    i = 0
    for k, tree in enumerate(forest.trees):
        roots[k] = i
        i = emit(tree, i)

    return QuantizedForest(
        fidx=fidx,
        th=th,
        right=right,
        roots=roots,
        leaves=np.vstack(leaf_rows).astype(np.int16),
        feature_offset=offset,
        feature_scale=scale,
        leaf_one=leaf_one,
        num_classes=forest.num_classes,
        max_depth=forest.max_depth,
        class_names=forest.class_names,
    )


def quantize_input(x, qf: QuantizedForest) -> np.ndarray:
    """int16 codes for one feature vector (or a batch) under ``qf``'s feature map."""
    return qf.quantize_input(x)


@dataclass(frozen=True)
class ConsistencyReport:
    n_samples: int
    n_disagree: int
    disagreement: float
    indices: tuple[int, ...]


def comparison_consistency_check(forest: Forest, qf: QuantizedForest, samples) -> ConsistencyReport:
    """Fraction of samples whose float and quantized predicted classes differ."""
    from .engine import predict  # engine imports this module

    X = samples.features if isinstance(samples, Dataset) else np.asarray(samples, dtype=np.float64)
    float_pred = forest.predict(X)
    quant_pred = predict(qf, qf.quantize_input(X))
    bad = np.flatnonzero(float_pred != quant_pred)
    n = len(X)
    return ConsistencyReport(n, len(bad), len(bad) / n if n else 0.0, tuple(int(i) for i in bad))
