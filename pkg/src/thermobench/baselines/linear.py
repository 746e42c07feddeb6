"""Multinomial logistic regression and a one-vs-rest linear SVM."""

from __future__ import annotations

import numpy as np

from .base import Classifier


def _softmax(z):
    # class-major layout: reductions over a handful of columns are slow row-wise
    e = np.array(z.T, order="C")
    e -= e.max(axis=0)
    np.exp(e, out=e)
    e /= e.sum(axis=0)
    return e.T


class LogisticRegression(Classifier):
    """Softmax regression fitted by full-batch gradient descent with L2.

    The weights start at zero, so the fit is deterministic and ignores the seed.
    """

    kind = "logreg"

    def __init__(self, lr=0.1, epochs=500, l2=1e-4, tol=1e-6, seed=0):
        super().__init__()
        self.lr = lr
        self.epochs = epochs
        self.l2 = l2
        self.tol = tol
        self.seed = seed

    def _fit(self, X, y, **_):
        n, d = X.shape
        k = self.classes_.size
        Y = (y[:, None] == self.classes_[None, :]).astype(float)
        W = np.zeros((d, k))
        b = np.zeros(k)
        grad_norm = np.inf
        self.epochs_run_ = 0
        for _ in range(self.epochs):
            P = _softmax(X @ W + b)
            G = (P - Y) / n
            gW = X.T @ G + self.l2 * W
            gb = G.sum(axis=0)
            W -= self.lr * gW
            b -= self.lr * gb
            self.epochs_run_ += 1
            grad_norm = float(np.sqrt(np.sum(gW**2) + np.sum(gb**2)))
            if grad_norm < self.tol:
                break
        self.coef_ = W
        self.intercept_ = b
        self.grad_norm_ = grad_norm
        self.converged_ = grad_norm < self.tol

    def decision_function(self, X):
        return self._check_width(X) @ self.coef_ + self.intercept_

    def _proba(self, X):
        return self._expand(_softmax(X @ self.coef_ + self.intercept_))

    def feature_weight_norms(self):
        """L2 norm of each feature's class-weight row."""
        return np.sqrt(np.sum(self.coef_**2, axis=1))

    def n_params(self):
        return int(self.coef_.size + self.intercept_.size)

    def state(self):
        return {"coef": self.coef_.tolist(), "intercept": self.intercept_.tolist()}

    def load_state(self, s):
        self.coef_ = np.asarray(s["coef"], dtype=float)
        self.intercept_ = np.asarray(s["intercept"], dtype=float)


class LinearSVM(Classifier):
    """One-vs-rest hinge loss by mini-batch Pegasos subgradient steps.

    Each binary problem minimizes ``lambda/2 ||w||^2 + mean hinge`` with
    ``lambda = 1 / (C n)``; the bias is carried as an extra constant feature.
    Probabilities are a softmax over the margins (an approximation, not a
    calibrated estimate).
    """

    kind = "linsvm"

    def __init__(self, C=1.0, epochs=50, batch_size=64, seed=0):
        super().__init__()
        self.C = C
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed

    def _fit(self, X, y, **_):
        rng = np.random.default_rng(self.seed)
        n, d = X.shape
        Xa = np.hstack([X, np.ones((n, 1))])
        Y = np.where(y[:, None] == self.classes_[None, :], 1.0, -1.0)
        lam = 1.0 / (self.C * n)
        W = np.zeros((d + 1, self.classes_.size))
        radius = 1.0 / np.sqrt(lam)
        t = 0
        for _ in range(self.epochs):
            order = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                idx = order[start:start + self.batch_size]
                t += 1
                eta = 1.0 / (lam * t)
                Xb, Yb = Xa[idx], Y[idx]
                viol = (Yb * (Xb @ W)) < 1.0
                W *= 1.0 - eta * lam
                W += (eta / idx.size) * (Xb.T @ (viol * Yb))
                norms = np.sqrt(np.sum(W**2, axis=0))
                scale = np.minimum(1.0, radius / np.maximum(norms, 1e-300))
                W *= scale
        self.coef_ = W

    def decision_function(self, X):
        X = self._check_width(X)
        return X @ self.coef_[:-1] + self.coef_[-1]

    def _proba(self, X):
        return self._expand(_softmax(X @ self.coef_[:-1] + self.coef_[-1]))

    def n_params(self):
        return int(self.coef_.size)

    def state(self):
        return {"coef": self.coef_.tolist()}

    def load_state(self, s):
        self.coef_ = np.asarray(s["coef"], dtype=float)
