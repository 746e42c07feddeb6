from __future__ import annotations

import numpy as np

from .base import Classifier


class GaussianNB(Classifier):
    """Per-class independent Gaussians with empirical class priors."""

    kind = "gnb"

    def __init__(self, var_floor=1e-9, seed=0):
        super().__init__()
        self.var_floor = var_floor
        self.seed = seed

    def _fit(self, X, y, **_):
        k = self.classes_.size
        self.theta_ = np.zeros((k, X.shape[1]))
        self.var_ = np.zeros((k, X.shape[1]))
        self.prior_ = np.zeros(k)
        for i, c in enumerate(self.classes_):
            Xc = X[y == c]
            self.theta_[i] = Xc.mean(axis=0)
            self.var_[i] = np.maximum(Xc.var(axis=0), self.var_floor)
            self.prior_[i] = Xc.shape[0] / X.shape[0]

    def joint_log_likelihood(self, X):
        X = np.asarray(X, dtype=float)
        out = np.empty((X.shape[0], self.classes_.size))
        for i in range(self.classes_.size):
            ll = -0.5 * np.sum(np.log(2 * np.pi * self.var_[i]))
            ll = ll - 0.5 * np.sum((X - self.theta_[i]) ** 2 / self.var_[i], axis=1)
            out[:, i] = np.log(self.prior_[i]) + ll
        return out

    def _proba(self, X):
        jll = self.joint_log_likelihood(X)
        jll -= jll.max(axis=1, keepdims=True)
        p = np.exp(jll)
        return self._expand(p / p.sum(axis=1, keepdims=True))

    def n_params(self):
        return int(self.theta_.size + self.var_.size + self.prior_.size)

    def state(self):
        return {"theta": self.theta_.tolist(), "var": self.var_.tolist(),
                "prior": self.prior_.tolist()}

    def load_state(self, s):
        self.theta_ = np.asarray(s["theta"], dtype=float)
        self.var_ = np.asarray(s["var"], dtype=float)
        self.prior_ = np.asarray(s["prior"], dtype=float)
