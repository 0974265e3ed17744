"""Small CART classifier used inside the explanation automaton.

Gini impurity splits on numeric features, depth-limited, with a
min-samples-per-leaf floor. Split ties are broken deterministically by
lowest feature index, then lowest threshold. The root-to-leaf path of a
prediction doubles as its Boolean explanation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Mapping, Sequence

import numpy as np


def _gini(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - (p * p).sum())


@dataclass
class _Node:
    counts: np.ndarray
    feature: int | None = None
    threshold: float | None = None
    left: "_Node | None" = None
    right: "_Node | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def to_dict(self, classes) -> dict:
        out = {"counts": {str(classes[i]): int(c) for i, c in enumerate(self.counts) if c}}
        if not self.is_leaf:
            out["split"] = {"feature": int(self.feature), "threshold": float(self.threshold)}
            out["le"] = self.left.to_dict(classes)
            out["gt"] = self.right.to_dict(classes)
        return out


@dataclass
class DecisionTree:
    """CART over continuous inputs with hashable class labels."""

    max_depth: int | None = 4
    min_samples_leaf: int = 2
    classes_: tuple = field(default_factory=tuple)
    root: _Node | None = None

    def fit(self, X: np.ndarray, y: Sequence[Hashable]) -> "DecisionTree":
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or len(y) != X.shape[0] or X.shape[0] == 0:
            raise ValueError("X must be (n, d) aligned with non-empty y")
        self.classes_ = tuple(sorted(set(y), key=lambda c: (str(type(c)), c)))
        index = {c: i for i, c in enumerate(self.classes_)}
        labels = np.array([index[c] for c in y])
        self.root = self._build(X, labels, depth=0)
        return self

    def _counts(self, labels: np.ndarray) -> np.ndarray:
        return np.bincount(labels, minlength=len(self.classes_))

    def _build(self, X: np.ndarray, labels: np.ndarray, depth: int) -> _Node:
        node = _Node(counts=self._counts(labels))
        if (self.max_depth is not None and depth >= self.max_depth) \
                or len(set(labels.tolist())) <= 1:
            return node
        split = self._best_split(X, labels)
        if split is None:
            return node
        feature, threshold = split
        mask = X[:, feature] <= threshold
        node.feature = feature
        node.threshold = threshold
        node.left = self._build(X[mask], labels[mask], depth + 1)
        node.right = self._build(X[~mask], labels[~mask], depth + 1)
        return node

    def _best_split(self, X: np.ndarray, labels: np.ndarray) -> tuple[int, float] | None:
        n = X.shape[0]
        parent = _gini(self._counts(labels))
        best: tuple[int, float] | None = None
        best_gain = 1e-12  # require strictly positive improvement
        for feature in range(X.shape[1]):
            values = X[:, feature]
            order = np.argsort(values, kind="stable")
            sorted_vals = values[order]
            uniques = np.unique(sorted_vals)
            if uniques.size < 2:
                continue
            for lo, hi in zip(uniques[:-1], uniques[1:]):
                threshold = (lo + hi) / 2.0
                mask = values <= threshold
                n_left = int(mask.sum())
                if n_left < self.min_samples_leaf or n - n_left < self.min_samples_leaf:
                    continue
                g = (n_left * _gini(self._counts(labels[mask]))
                     + (n - n_left) * _gini(self._counts(labels[~mask]))) / n
                gain = parent - g
                if gain > best_gain + 1e-12:  # ties keep lowest feature/threshold
                    best_gain = gain
                    best = (feature, threshold)
        return best

    def _leaf(self, x: np.ndarray) -> tuple[_Node, list[tuple[int, str, float]]]:
        if self.root is None:
            raise RuntimeError("tree is not fitted")
        node = self.root
        path: list[tuple[int, str, float]] = []
        while not node.is_leaf:
            if x[node.feature] <= node.threshold:
                path.append((node.feature, "<=", node.threshold))
                node = node.left
            else:
                path.append((node.feature, ">", node.threshold))
                node = node.right
        return node, path

    def predict(self, x: np.ndarray):
        leaf, _ = self._leaf(np.asarray(x, dtype=float))
        return self.classes_[int(np.argmax(leaf.counts))]

    def predict_with_path(self, x: np.ndarray):
        """(predicted class, ordered class votes, path literals).

        Votes are (class, count) sorted by descending count with class-order
        tie-break; the path literals are (feature index, op, threshold).
        """
        leaf, path = self._leaf(np.asarray(x, dtype=float))
        order = sorted(range(len(self.classes_)),
                       key=lambda i: (-leaf.counts[i], i))
        votes = [(self.classes_[i], int(leaf.counts[i])) for i in order
                 if leaf.counts[i] > 0]
        return votes[0][0], votes, path

    def to_dict(self) -> dict:
        return {
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
            "classes": list(self.classes_),
            "root": self.root.to_dict(self.classes_) if self.root else None,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "DecisionTree":
        tree = cls(max_depth=data["max_depth"], min_samples_leaf=data["min_samples_leaf"])
        tree.classes_ = tuple(data["classes"])
        index = {str(c): i for i, c in enumerate(tree.classes_)}

        def rebuild(nd: Mapping) -> _Node:
            counts = np.zeros(len(tree.classes_))
            for name, c in nd["counts"].items():
                counts[index[name]] = c
            node = _Node(counts=counts)
            if "split" in nd:
                node.feature = int(nd["split"]["feature"])
                node.threshold = float(nd["split"]["threshold"])
                node.left = rebuild(nd["le"])
                node.right = rebuild(nd["gt"])
            return node

        tree.root = rebuild(data["root"]) if data["root"] is not None else None
        return tree
