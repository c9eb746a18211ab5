"""Exact greedy regression trees with squared-error splits."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import kernels
from .errors import DimensionError, DomainError


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int = 1
    min_node: int = 5
    min_split_improvement: float = 0.0

    def __post_init__(self):
        if int(self.max_depth) < 1:
            raise DomainError("max_depth must be >= 1")
        if int(self.min_node) < 1:
            raise DomainError("min_node must be >= 1")
        if not self.min_split_improvement >= 0:
            raise DomainError("min_split_improvement must be >= 0")


@dataclass(frozen=True)
class Leaf:
    value: float
    count: int


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Leaf, Split]


@dataclass(eq=False)
class Tree:
    """A fitted tree stored as flat node arrays (node 0 is the root).

    ``feature[k] == -1`` marks a leaf; otherwise rows with
    ``x[feature[k]] <= threshold[k]`` go to ``left[k]``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    count: np.ndarray
    n_features: int
    train_sse: float = float("nan")
    train_fitted: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature < 0

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, np.int64)
        for k in range(self.n_nodes):
            if self.feature[k] >= 0:
                depth[self.left[k]] = depth[self.right[k]] = depth[k] + 1
        return int(depth.max())

    def used_features(self) -> np.ndarray:
        return np.unique(self.feature[self.feature >= 0])

    def root(self) -> TreeNode:
        """Nested node view of the tree."""

        def build(k):
            if self.feature[k] < 0:
                return Leaf(float(self.value[k]), int(self.count[k]))
            return Split(
                int(self.feature[k]),
                float(self.threshold[k]),
                build(self.left[k]),
                build(self.right[k]),
            )

        return build(0)

    def remap_features(self, mapping: np.ndarray, n_features: int) -> "Tree":
        """Copy with column indices renumbered through ``mapping``."""
        feat = self.feature.copy()
        internal = feat >= 0
        feat[internal] = np.asarray(mapping)[feat[internal]]
        return Tree(feat, self.threshold, self.left, self.right, self.value,
                    self.count, n_features, self.train_sse, self.train_fitted)

    def negate_feature(self, j: int) -> "Tree":
        """Tree computing the same function of ``x`` with column ``j`` negated.

        Splits on ``j`` get threshold ``-t`` and swapped children.  The two
        trees agree everywhere except on the measure-zero set ``x_j == t``.
        """
        thr = self.threshold.copy()
        left = self.left.copy()
        right = self.right.copy()
        on_j = self.feature == j
        thr[on_j] = -thr[on_j]
        left[on_j], right[on_j] = self.right[on_j], self.left[on_j]
        return Tree(self.feature.copy(), thr, left, right, self.value.copy(),
                    self.count.copy(), self.n_features, self.train_sse, self.train_fitted)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "count": self.count.tolist(),
            "n_features": int(self.n_features),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Tree":
        tree = cls(
            feature=np.asarray(doc["feature"], dtype=np.int64),
            threshold=np.asarray(doc["threshold"], dtype=np.float64),
            left=np.asarray(doc["left"], dtype=np.int64),
            right=np.asarray(doc["right"], dtype=np.int64),
            value=np.asarray(doc["value"], dtype=np.float64),
            count=np.asarray(doc["count"], dtype=np.int64),
            n_features=int(doc["n_features"]),
        )
        sizes = {a.size for a in (tree.feature, tree.threshold, tree.left,
                                  tree.right, tree.value, tree.count)}
        if len(sizes) != 1 or tree.n_nodes == 0:
            raise DimensionError("tree node arrays have inconsistent lengths")
        internal = tree.feature >= 0
        for child in (tree.left[internal], tree.right[internal]):
            if child.size and (child.min() <= 0 or child.max() >= tree.n_nodes):
                raise DimensionError("tree child index out of range")
        if internal.any() and tree.feature.max() >= tree.n_features:
            raise DimensionError("tree feature index out of range")
        return tree


def _as_features(features) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DimensionError("features must be a 2-d array")
    return np.ascontiguousarray(X)


def fit_tree(features, response, cfg: TreeConfig = TreeConfig(), backend=None) -> Tree:
    """Grow a regression tree by exhaustive greedy search over all midpoints."""
    X = _as_features(features)
    y = np.ascontiguousarray(np.asarray(response, dtype=np.float64).ravel())
    n, p = X.shape
    if n == 0 or p == 0:
        raise DomainError("cannot fit a tree on empty input")
    if y.size != n:
        raise DimensionError(f"{y.size} responses for {n} rows")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DomainError("tree inputs must be finite")
    be = backend or kernels.backend
    order = kernels.presort(X)
    feat, thr, left, right, value, count, leaf_of = be.build_tree(
        X, order, y, int(cfg.max_depth), int(cfg.min_node),
        float(cfg.min_split_improvement), kernels.TIE_TOL,
    )
    fitted = value[leaf_of]
    resid = y - fitted
    return Tree(feat, thr, left, right, value, count, p, float(resid @ resid), fitted)


def predict_tree(tree: Tree, features, backend=None) -> np.ndarray:
    X = _as_features(features)
    if X.shape[1] != tree.n_features:
        raise DimensionError(f"tree expects {tree.n_features} features, got {X.shape[1]}")
    be = backend or kernels.backend
    return be.predict_tree(tree.feature, tree.threshold, tree.left, tree.right, tree.value, X)
