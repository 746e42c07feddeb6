"""CART decision tree and bagged random forest."""

from __future__ import annotations

import math

import numpy as np

from ._cart import grow_tree
from .base import Classifier


class TreeArrays:
    """Flat node arrays for one fitted tree. Leaves have ``feature == -1``."""

    __slots__ = ("feature", "threshold", "left", "right", "value", "n_samples", "impurity")

    def __init__(self, feature, threshold, left, right, value, n_samples, impurity):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=float)
        self.n_samples = np.asarray(n_samples, dtype=float)
        self.impurity = np.asarray(impurity, dtype=float)

    @property
    def n_nodes(self):
        return int(self.feature.size)

    def depth(self):
        d = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                d[self.left[i]] = d[self.right[i]] = d[i] + 1
        return int(d.max()) if d.size else 0

    def apply(self, X):
        """Leaf index reached by each row."""
        n = X.shape[0]
        node = np.zeros(n, dtype=np.int64)
        rows = np.arange(n)
        active = self.feature[node] >= 0
        while active.any():
            f = self.feature[node]
            go_left = X[rows, np.maximum(f, 0)] <= self.threshold[node]
            nxt = np.where(go_left, self.left[node], self.right[node])
            node = np.where(active, nxt, node)
            active = self.feature[node] >= 0
        return node

    def proba(self, X):
        return self.value[self.apply(X)]

    def impurity_decrease(self, n_features):
        """Sample-weighted Gini decrease summed per split feature."""
        out = np.zeros(n_features)
        for i in np.flatnonzero(self.feature >= 0):
            l, r = self.left[i], self.right[i]
            dec = (self.n_samples[i] * self.impurity[i]
                   - self.n_samples[l] * self.impurity[l]
                   - self.n_samples[r] * self.impurity[r])
            out[self.feature[i]] += max(dec, 0.0)
        return out

    def to_dict(self):
        return {s: getattr(self, s).tolist() for s in self.__slots__}

    @classmethod
    def from_dict(cls, d):
        return cls(**{s: d[s] for s in cls.__slots__})


def presort(X, y):
    """Per-feature argsort plus values and labels in that order, feature-major."""
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))
    sorted_x = np.ascontiguousarray(np.take_along_axis(X, order.T, axis=0).T)
    sorted_y = np.ascontiguousarray(np.asarray(y, dtype=np.int64)[order])
    return order, sorted_x, sorted_y


def _grow(X, presorted, row_counts, n_classes, max_depth, min_leaf, max_features, seed):
    order, sorted_x, sorted_y = presorted
    arrays = grow_tree(X, order, sorted_x, sorted_y, row_counts.astype(np.int64),
                       n_classes, int(max_depth), int(min_leaf), int(max_features), int(seed))
    return TreeArrays(*arrays)


def resolve_max_features(max_features, n_features):
    if max_features in (None, "all"):
        return n_features
    if max_features == "sqrt":
        return max(1, int(math.sqrt(n_features)))
    m = int(max_features)
    if not 1 <= m <= n_features:
        raise ValueError(f"max_features={m} out of range 1..{n_features}")
    return m


class DecisionTree(Classifier):
    """CART with Gini impurity and exhaustive midpoint thresholds."""

    kind = "tree"

    def __init__(self, max_depth=12, min_leaf=5, max_features=None, seed=0):
        super().__init__()
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.max_features = max_features
        self.seed = seed

    def _fit(self, X, y, **_):
        m = resolve_max_features(self.max_features, X.shape[1])
        seed = int(np.random.SeedSequence(self.seed).generate_state(1)[0])
        X = np.ascontiguousarray(X, dtype=np.float64)
        self.tree_ = _grow(X, presort(X, y), np.ones(X.shape[0]), self.n_classes,
                           self.max_depth, self.min_leaf, m, seed)

    def _proba(self, X):
        return self.tree_.proba(X)

    def feature_importances(self):
        dec = self.tree_.impurity_decrease(self.n_features_)
        s = dec.sum()
        return dec / s if s > 0 else dec

    def n_params(self):
        return self.tree_.n_nodes

    def state(self):
        return {"tree": self.tree_.to_dict()}

    def load_state(self, s):
        self.tree_ = TreeArrays.from_dict(s["tree"])


class RandomForest(Classifier):
    """Bootstrap-aggregated CART trees with per-split feature subsampling.

    Tree ``i`` draws its bootstrap rows and split features from the ``i``-th
    child of ``SeedSequence(seed)``, so results do not depend on fitting
    order. Probabilities average the trees' leaf distributions.
    """

    kind = "forest"

    def __init__(self, n_trees=100, max_depth=12, min_leaf=5, max_features="sqrt",
                 bootstrap=True, seed=0):
        super().__init__()
        if n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.seed = seed

    def _fit(self, X, y, **_):
        n = X.shape[0]
        m = resolve_max_features(self.max_features, X.shape[1])
        X = np.ascontiguousarray(X, dtype=np.float64)
        presorted = presort(X, y)
        self.trees_ = []
        if self.n_trees == 1 and not self.bootstrap:
            children = [np.random.SeedSequence(self.seed)]
        else:
            children = np.random.SeedSequence(self.seed).spawn(self.n_trees)
        for child in children:
            rng = np.random.default_rng(child)
            if self.bootstrap:
                row_counts = np.bincount(rng.integers(0, n, size=n), minlength=n)
            else:
                row_counts = np.ones(n)
            seed = int(child.generate_state(1)[0])
            self.trees_.append(_grow(X, presorted, row_counts, self.n_classes, self.max_depth,
                                     self.min_leaf, m, seed))

    def _proba(self, X):
        p = np.zeros((X.shape[0], self.n_classes))
        for t in self.trees_:
            p += t.proba(X)
        return p / len(self.trees_)

    def feature_importances(self):
        return forest_importance(self, self.n_features_)

    def n_params(self):
        return int(sum(t.n_nodes for t in self.trees_))

    def state(self):
        return {"trees": [t.to_dict() for t in self.trees_]}

    def load_state(self, s):
        self.trees_ = [TreeArrays.from_dict(t) for t in s["trees"]]


def forest_importance(forest, n_features: int) -> np.ndarray:
    """Mean decrease in Gini impurity, normalized per tree, averaged, renormalized."""
    trees = forest.trees_ if hasattr(forest, "trees_") else [forest.tree_]
    total = np.zeros(n_features)
    for t in trees:
        dec = t.impurity_decrease(n_features)
        s = dec.sum()
        if s > 0:
            total += dec / s
    s = total.sum()
    return total / s if s > 0 else total
