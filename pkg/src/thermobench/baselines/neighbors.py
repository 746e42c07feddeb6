from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .base import Classifier


class KNN(Classifier):
    """Euclidean k-nearest-neighbour majority vote.

    Vote ties go to the class whose tied neighbours have the smaller summed
    distance, then to the smaller class index. Probabilities are vote
    fractions.
    """

    kind = "knn"

    def __init__(self, k=15, seed=0, chunk=16384):
        super().__init__()
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k
        self.seed = seed
        self.chunk = chunk

    def _fit(self, X, y, **_):
        if self.k > X.shape[0]:
            raise ValueError(f"k={self.k} exceeds the {X.shape[0]} training samples")
        self.X_ = X.copy()
        self.y_ = y.copy()
        self._tree = cKDTree(self.X_)

    def kneighbors(self, X):
        dist, idx = self._tree.query(X, k=self.k)
        if self.k == 1:
            dist, idx = dist[:, None], idx[:, None]
        return dist, idx

    def _vote(self, X):
        dist, idx = self.kneighbors(X)
        labels = self.y_[idx]
        n = X.shape[0]
        votes = np.zeros((n, self.n_classes))
        dsum = np.zeros((n, self.n_classes))
        rows = np.repeat(np.arange(n), self.k)
        np.add.at(votes, (rows, labels.ravel()), 1.0)
        np.add.at(dsum, (rows, labels.ravel()), dist.ravel())
        return votes, dsum

    def _proba(self, X):
        parts = []
        for s in range(0, X.shape[0], self.chunk):
            votes, _ = self._vote(X[s:s + self.chunk])
            parts.append(votes / self.k)
        return np.concatenate(parts) if parts else np.zeros((0, self.n_classes))

    def predict(self, X):
        X = self._check_width(X)
        out = []
        for s in range(0, X.shape[0], self.chunk):
            votes, dsum = self._vote(X[s:s + self.chunk])
            top = votes == votes.max(axis=1, keepdims=True)
            # among top-voted classes, pick the smallest distance sum; argmin keeps lowest index
            out.append(np.argmin(np.where(top, dsum, np.inf), axis=1))
        return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)

    def n_params(self):
        return int(self.X_.size + self.y_.size)

    def state(self):
        return {"k": self.k, "X": self.X_.tolist(), "y": self.y_.tolist()}

    def load_state(self, s):
        self.k = int(s["k"])
        self.X_ = np.asarray(s["X"], dtype=float)
        self.y_ = np.asarray(s["y"], dtype=np.int64)
        self._tree = cKDTree(self.X_)
