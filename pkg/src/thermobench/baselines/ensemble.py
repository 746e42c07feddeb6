from __future__ import annotations

import numpy as np

from .base import Classifier


def soft_vote(member_probas, weights=None):
    """Weighted mean of member probability rows, renormalized; argmax labels."""
    P = [np.asarray(p, dtype=float) for p in member_probas]
    if not P:
        raise ValueError("no members")
    shape = P[0].shape
    for p in P:
        if p.shape != shape:
            raise ValueError(f"member shapes differ: {p.shape} vs {shape}")
    w = np.ones(len(P)) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (len(P),) or np.any(w < 0) or not np.any(w > 0):
        raise ValueError("weights must be nonnegative, one per member, not all zero")
    avg = sum(wi * p for wi, p in zip(w, P)) / w.sum()
    avg = avg / avg.sum(axis=1, keepdims=True)
    return np.argmax(avg, axis=1), avg


class SoftVoteEnsemble(Classifier):
    """Soft-voting ensemble over already constructed member classifiers."""

    kind = "ensemble"

    def __init__(self, members, weights=None, seed=0):
        super().__init__()
        self.members = list(members)
        self.weights = weights
        self.seed = seed

    def _fit(self, X, y, **context):
        for m in self.members:
            m.fit(X, y, **context)

    @classmethod
    def from_fitted(cls, members, weights=None):
        ens = cls(members, weights)
        ens.n_features_ = members[0].n_features_
        ens.classes_ = np.unique(np.concatenate([m.classes_ for m in members]))
        return ens

    def _proba(self, X):
        return soft_vote([m.predict_proba(X) for m in self.members], self.weights)[1]

    def n_params(self):
        return int(sum(m.n_params() for m in self.members))
