from __future__ import annotations

import numpy as np

from .. import N_CLASSES


class Classifier:
    """Common surface: ``fit`` then ``predict_proba`` over all four classes.

    Subclasses set ``kind`` and implement ``_fit`` / ``_proba``. Columns for
    classes absent from training always carry probability 0.
    """

    kind = "base"
    n_classes = N_CLASSES

    def __init__(self):
        self.n_features_ = None
        self.classes_ = None
        self.train_seconds = None

    def fit(self, X, y, **context):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("empty training set")
        if X.shape[0] != y.shape[0]:
            raise ValueError("X and y have different lengths")
        if y.min() < 0 or y.max() >= self.n_classes:
            raise ValueError(f"labels must lie in 0..{self.n_classes - 1}")
        self.n_features_ = X.shape[1]
        self.classes_ = np.unique(y)
        self._fit(X, y, **context)
        return self

    def _check_width(self, X):
        X = np.asarray(X, dtype=float)
        if self.n_features_ is None:
            raise RuntimeError(f"{self.kind} classifier is not trained")
        if X.ndim != 2 or X.shape[1] != self.n_features_:
            raise ValueError(f"expected {self.n_features_} features, got shape {X.shape}")
        return X

    def predict_proba(self, X) -> np.ndarray:
        return self._proba(self._check_width(X))

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def n_params(self) -> int:
        raise NotImplementedError

    def _expand(self, p_present):
        """Scatter probabilities over present classes into all columns."""
        out = np.zeros((p_present.shape[0], self.n_classes))
        out[:, self.classes_] = p_present
        return out

    # checkpoint support
    def state(self) -> dict:
        raise NotImplementedError

    def load_state(self, state: dict):
        raise NotImplementedError
