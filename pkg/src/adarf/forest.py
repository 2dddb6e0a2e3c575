"""Float-domain forest representation, datasets and JSON interchange."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

LEAF = -1
PROB_SUM_TOL = 1e-6


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    class_names: tuple[str, ...] | None = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if X.ndim != 2:
            raise ValueError(f"features must be a 2-D matrix, got shape {X.shape}")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ValueError(f"labels must have length {X.shape[0]}, got shape {y.shape}")
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        if not np.all(np.isfinite(X)):
            r, c = np.argwhere(~np.isfinite(X))[0]
            raise ValueError(f"missing or non-finite feature at row {r}, column {c}")
        if y.size and (y.min() < 0 or y.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes - 1}]")
        if self.class_names is not None and len(self.class_names) != self.num_classes:
            raise ValueError("class_names length must equal num_classes")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx], self.num_classes, self.class_names)


@dataclass(frozen=True)
class TreeNode:
    """A split node (``feature_index >= 0``) or a leaf (``feature_index == LEAF``).

    Inputs with ``x[feature_index] > threshold`` go right, everything else left.
    """

    feature_index: int = LEAF
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    leaf_scores: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.is_leaf:
            if self.left is not None or self.right is not None:
                raise ValueError("leaf nodes have no children")
            if self.leaf_scores is None:
                raise ValueError("leaf nodes need leaf_scores")
            p = np.asarray(self.leaf_scores, dtype=np.float64)
            if np.any(p < 0) or abs(p.sum() - 1.0) > PROB_SUM_TOL:
                raise ValueError(f"leaf_scores must be a probability vector, got {self.leaf_scores}")
            object.__setattr__(self, "leaf_scores", tuple(float(v) for v in p))
        else:
            if self.left is None or self.right is None:
                raise ValueError("internal nodes need exactly two children")
            if self.leaf_scores is not None:
                raise ValueError("internal nodes carry no leaf_scores")

    @classmethod
    def leaf(cls, scores: Sequence[float]) -> "TreeNode":
        return cls(leaf_scores=tuple(scores))

    @classmethod
    def split(cls, feature: int, threshold: float, left: "TreeNode", right: "TreeNode") -> "TreeNode":
        return cls(feature_index=int(feature), threshold=float(threshold), left=left, right=right)

    @property
    def is_leaf(self) -> bool:
        return self.feature_index == LEAF

    def depth(self) -> int:
        """Number of edges on the longest root-to-leaf path."""
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def n_nodes(self) -> int:
        if self.is_leaf:
            return 1
        return 1 + self.left.n_nodes() + self.right.n_nodes()

    def preorder(self) -> Iterator["TreeNode"]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            if not node.is_leaf:
                stack.append(node.right)
                stack.append(node.left)

    def predict_leaf(self, x) -> "TreeNode":
        node = self
        while not node.is_leaf:
            node = node.right if x[node.feature_index] > node.threshold else node.left
        return node


@dataclass(frozen=True)
class Forest:
    trees: tuple[TreeNode, ...]
    num_classes: int
    max_depth: int
    num_features: int
    class_names: tuple[str, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        if not self.trees:
            raise ValueError("a forest needs at least one tree")
        for k, tree in enumerate(self.trees):
            d = tree.depth()
            if d > self.max_depth:
                raise ValueError(f"tree {k} has depth {d} > max_depth {self.max_depth}")
            for node in tree.preorder():
                if node.is_leaf:
                    if len(node.leaf_scores) != self.num_classes:
                        raise ValueError(f"tree {k}: leaf_scores length != num_classes")
                elif not 0 <= node.feature_index < self.num_features:
                    raise ValueError(f"tree {k}: feature index {node.feature_index} out of range")

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def n_nodes(self) -> int:
        return sum(t.n_nodes() for t in self.trees)

    def class_scores(self, x, n_trees: int | None = None) -> np.ndarray:
        """Sum of leaf probability vectors over the first ``n_trees`` trees."""
        out = np.zeros(self.num_classes)
        for tree in self.trees[:n_trees]:
            out += tree.predict_leaf(x).leaf_scores
        return out

    def predict_one(self, x) -> int:
        return argmax_class(self.class_scores(x))

    def predict(self, X) -> np.ndarray:
        return np.array([self.predict_one(x) for x in np.asarray(X, dtype=np.float64)], dtype=np.int64)

    def take(self, n_trees: int) -> "Forest":
        return Forest(self.trees[:n_trees], self.num_classes, self.max_depth, self.num_features, self.class_names)

    # JSON interchange

    def to_dict(self) -> dict:
        d = {
            "num_classes": self.num_classes,
            "num_features": self.num_features,
            "max_depth": self.max_depth,
            "trees": [_node_to_dict(t) for t in self.trees],
        }
        if self.class_names is not None:
            d["class_names"] = list(self.class_names)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":")) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "Forest":
        names = d.get("class_names")
        return cls(
            trees=tuple(_node_from_dict(t) for t in d["trees"]),
            num_classes=int(d["num_classes"]),
            max_depth=int(d["max_depth"]),
            num_features=int(d["num_features"]),
            class_names=tuple(names) if names is not None else None,
        )

    @classmethod
    def from_json(cls, text: str) -> "Forest":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "Forest":
        with open(path) as fh:
            return cls.from_json(fh.read())


def _node_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"leaf": list(node.leaf_scores)}
    return {
        "f": node.feature_index,
        "th": node.threshold,
        "l": _node_to_dict(node.left),
        "r": _node_to_dict(node.right),
    }


def _node_from_dict(d: dict) -> TreeNode:
    if "leaf" in d:
        return TreeNode.leaf(d["leaf"])
    return TreeNode.split(d["f"], d["th"], _node_from_dict(d["l"]), _node_from_dict(d["r"]))


def argmax_class(scores) -> int:
    """Index of the largest score; ties resolve to the lowest class index."""
    s = np.asarray(scores)
    if s.size == 0:
        raise ValueError("argmax of an empty score vector")
    return int(np.argmax(s))  # numpy returns the first maximal index


def accuracy(y_true, y_pred) -> float:
    y_true = np.asarray(y_true)
    if y_true.size == 0:
        return 0.0
    return float(np.mean(y_true == np.asarray(y_pred)))


def macro_accuracy(y_true, y_pred, num_classes: int) -> float:
    """Unweighted mean of per-class recalls over the classes present in ``y_true``."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    recalls = []
    for c in range(num_classes):
        mask = y_true == c
        if mask.any():
            recalls.append(np.mean(y_pred[mask] == c))
    return float(np.mean(recalls)) if recalls else 0.0
