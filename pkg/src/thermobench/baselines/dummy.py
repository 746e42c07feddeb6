from __future__ import annotations

import numpy as np

from .base import Classifier


class MajorityBaseline(Classifier):
    """Always predicts the most frequent training class (lowest index on ties)."""

    kind = "majority"

    def __init__(self, seed=0):
        super().__init__()
        self.seed = seed

    def _fit(self, X, y, **_):
        self.label_ = int(np.argmax(np.bincount(y, minlength=self.n_classes)))

    def _proba(self, X):
        p = np.zeros((X.shape[0], self.n_classes))
        p[:, self.label_] = 1.0
        return p

    def n_params(self):
        return 1

    def state(self):
        return {"label": self.label_}

    def load_state(self, s):
        self.label_ = int(s["label"])


class RandomBaseline(Classifier):
    """Uniform random labels; each call replays the same seeded stream."""

    kind = "random"

    def __init__(self, seed=0):
        super().__init__()
        self.seed = seed

    def _fit(self, X, y, **_):
        pass

    def _proba(self, X):
        rng = np.random.default_rng(self.seed)
        labels = rng.integers(0, self.n_classes, size=X.shape[0])
        p = np.zeros((X.shape[0], self.n_classes))
        p[np.arange(X.shape[0]), labels] = 1.0
        return p

    def n_params(self):
        return 0

    def state(self):
        return {"seed": self.seed}

    def load_state(self, s):
        self.seed = int(s["seed"])
