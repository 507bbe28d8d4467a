"""Flat array representation of binary decision trees, shared by GBC stage trees and RSF survival trees."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np
from sklearn.tree import DecisionTreeRegressor

LEAF = -1


@dataclass(frozen=True, eq=False)
class TreeArrays:
    """Node i splits on ``feature[i] <= threshold[i]``; leaves have ``feature == LEAF`` and a ``leaf`` slot."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf: np.ndarray

    @property
    def node_count(self) -> int:
        return int(self.feature.size)

    @property
    def depth(self) -> int:
        depths = np.zeros(self.node_count, dtype=int)
        for node in range(self.node_count):
            if self.feature[node] != LEAF:
                depths[self.left[node]] = depths[self.right[node]] = depths[node] + 1
        return int(depths.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf slot reached by every row of X."""
        node = np.zeros(X.shape[0], dtype=int)
        active = self.feature[node] != LEAF
        while active.any():
            rows = np.flatnonzero(active)
            current = node[rows]
            go_left = X[rows, self.feature[current]] <= self.threshold[current]
            node[rows] = np.where(go_left, self.left[current], self.right[current])
            active = self.feature[node] != LEAF
        return self.leaf[node]

    def to_dict(self) -> dict[str, Any]:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "leaf": self.leaf.tolist(),
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> TreeArrays:
        return cls(
            feature=np.asarray(raw["feature"], dtype=int),
            threshold=np.asarray(raw["threshold"], dtype=float),
            left=np.asarray(raw["left"], dtype=int),
            right=np.asarray(raw["right"], dtype=int),
            leaf=np.asarray(raw["leaf"], dtype=int),
        )


def from_sklearn(tree: DecisionTreeRegressor) -> tuple[TreeArrays, np.ndarray]:
    """Convert a fitted scikit-learn regression tree into TreeArrays plus its leaf values."""
    inner = tree.tree_
    is_leaf = inner.children_left == -1
    leaf = np.full(inner.node_count, -1, dtype=int)
    leaf[is_leaf] = np.arange(is_leaf.sum())
    arrays = TreeArrays(
        feature=np.where(is_leaf, LEAF, inner.feature).astype(int),
        threshold=np.where(is_leaf, 0.0, inner.threshold).astype(float),
        left=inner.children_left.astype(int),
        right=inner.children_right.astype(int),
        leaf=leaf,
    )
    return arrays, inner.value[is_leaf, 0, 0].astype(float)
