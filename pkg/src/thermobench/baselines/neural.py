from __future__ import annotations

import numpy as np

from .. import nn
from ..physics import LossWeights
from .base import Classifier


class MlpClassifier(Classifier):
    """Adapter exposing :mod:`thermobench.nn` through the classifier surface.

    ``fit`` needs validation data for the per-epoch history and, for the
    physics-guided variant, :class:`~thermobench.physics.PhysicsSignals`
    aligned with the training and validation rows.
    """

    kind = "mlp"

    def __init__(self, hidden=(256, 128, 64, 32, 16), dropout=0.3, weight_decay=1e-4,
                 lambda_physics=0.0, lambda_energy=0.0, physics_mode="literal",
                 reduction="mean", aux_head=True, epochs=25, batch_size=256, lr=1e-3,
                 seed=0, kind=None):
        super().__init__()
        if kind is not None:
            self.kind = kind
        self.hidden = tuple(hidden)
        self.dropout = dropout
        self.weight_decay = weight_decay
        self.loss_weights = LossWeights(lambda_physics, lambda_energy)
        self.physics_mode = physics_mode
        self.reduction = reduction
        self.aux_head = aux_head
        self.hyper = nn.TrainHyper(epochs=epochs, batch_size=batch_size, lr=lr, seed=seed)
        self.seed = seed

    def config_for(self, input_dim):
        return nn.MlpConfig(
            input_dim=input_dim, hidden=self.hidden, dropout=self.dropout,
            weight_decay=self.weight_decay, aux_head=self.aux_head,
            weights=self.loss_weights, physics_mode=self.physics_mode,
            reduction=self.reduction,
        )

    def _fit(self, X, y, signals=None, X_val=None, y_val=None, signals_val=None, **_):
        if X_val is None:
            X_val, y_val, signals_val = X, y, signals
        cfg = self.config_for(X.shape[1])
        self.model_, self.history_ = nn.train(cfg, self.hyper, X, y, signals,
                                              X_val, np.asarray(y_val), signals_val)

    def _proba(self, X):
        return nn.predict_proba(self.model_, X)

    def predict_cop(self, X):
        return nn.predict_cop(self.model_, self._check_width(X))

    def n_params(self):
        return nn.param_count(self.model_.config)

    def state(self):
        return {"model": nn.model_blob(self.model_)}

    def load_state(self, s):
        self.model_ = nn.model_from_blob(s["model"])
