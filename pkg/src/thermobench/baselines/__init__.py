"""Classical classifiers, MLP adapters and the soft-voting ensemble.

``train_classifier`` is the uniform entry point: it builds a classifier of
the requested kind, fits it, and records the wall-clock training seconds
used by the efficiency score.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np

from .base import Classifier
from .bayes import GaussianNB
from .dummy import MajorityBaseline, RandomBaseline
from .ensemble import SoftVoteEnsemble, soft_vote
from .linear import LinearSVM, LogisticRegression
from .neighbors import KNN
from .neural import MlpClassifier
from .trees import DecisionTree, RandomForest, TreeArrays, forest_importance

CLASSICAL_KINDS = ("logreg", "gnb", "knn", "tree", "forest", "linsvm")
NEURAL_KINDS = ("mlp", "pg-mlp")
BASELINE_KINDS = ("majority", "random")

# Desk-scale defaults; these are choices of this toolkit, not published values.
DEFAULT_HYPER = {
    "logreg": {"lr": 0.1, "epochs": 500, "l2": 1e-4},
    "gnb": {},
    "knn": {"k": 15},
    "tree": {"max_depth": 12, "min_leaf": 5},
    "forest": {"n_trees": 100, "max_depth": 12, "min_leaf": 5, "max_features": "sqrt"},
    "linsvm": {"C": 1.0, "epochs": 50},
    "mlp": {"lambda_physics": 0.0, "lambda_energy": 0.0},
    "pg-mlp": {"lambda_physics": 0.1, "lambda_energy": 0.05},
    "majority": {},
    "random": {},
}

DEFAULT_ENSEMBLE_MEMBERS = ("logreg", "knn", "forest", "pg-mlp")

_FACTORIES = {
    "logreg": LogisticRegression,
    "gnb": GaussianNB,
    "knn": KNN,
    "tree": DecisionTree,
    "forest": RandomForest,
    "linsvm": LinearSVM,
    "majority": MajorityBaseline,
    "random": RandomBaseline,
}


def make_classifier(kind: str, hyper: dict | None = None, seed: int = 0) -> Classifier:
    params = dict(DEFAULT_HYPER.get(kind, {}))
    params.update(hyper or {})
    if kind in NEURAL_KINDS:
        if "hidden" in params:
            params["hidden"] = tuple(params["hidden"])
        return MlpClassifier(seed=seed, kind=kind, **params)
    if kind not in _FACTORIES:
        raise ValueError(f"unknown classifier kind {kind!r}")
    return _FACTORIES[kind](seed=seed, **params)


def train_classifier(kind, X, y, hyper=None, seed=0, **context) -> Classifier:
    """Fit a classifier and record its training wall-clock seconds.

    ``context`` carries optional ``signals``, ``X_val``, ``y_val`` and
    ``signals_val`` for the neural kinds; other kinds ignore it.
    """
    clf = make_classifier(kind, hyper, seed)
    y = np.asarray(y)
    if np.unique(y).size < 2 and kind not in BASELINE_KINDS:
        raise ValueError("need at least 2 classes in the training labels")
    t0 = time.perf_counter()
    clf.fit(X, y, **context)
    clf.train_seconds = max(time.perf_counter() - t0, 1e-9)
    return clf


def predict_classifier(clf: Classifier, X):
    """Labels and probability rows."""
    return clf.predict(X), clf.predict_proba(X)


def majority_baseline(train_labels, n_features: int = 1) -> MajorityBaseline:
    y = np.asarray(train_labels, dtype=np.int64)
    if y.size == 0:
        raise ValueError("empty training labels")
    return train_classifier("majority", np.zeros((y.size, n_features)), y)


def random_baseline(seed: int = 0, n_features: int = 1) -> RandomBaseline:
    clf = RandomBaseline(seed=seed)
    clf.n_features_ = n_features
    clf.classes_ = np.arange(clf.n_classes)
    clf.train_seconds = 1e-9
    return clf


CHECKPOINT_FORMAT = "thermobench.classifier"


def save_classifier(clf: Classifier, path) -> Path:
    if isinstance(clf, SoftVoteEnsemble):
        raise ValueError("save ensemble members individually")
    blob = {
        "format": CHECKPOINT_FORMAT,
        "version": 1,
        "kind": clf.kind,
        "n_features": clf.n_features_,
        "classes": clf.classes_.tolist(),
        "train_seconds": clf.train_seconds,
        "state": clf.state(),
    }
    path = Path(path)
    path.write_text(json.dumps(blob))
    return path


def load_classifier(path) -> Classifier:
    blob = json.loads(Path(path).read_text())
    if blob.get("format") != CHECKPOINT_FORMAT:
        raise ValueError("not a classifier checkpoint")
    clf = make_classifier(blob["kind"])
    clf.n_features_ = blob["n_features"]
    clf.classes_ = np.asarray(blob["classes"], dtype=np.int64)
    clf.train_seconds = blob["train_seconds"]
    clf.load_state(blob["state"])
    return clf


__all__ = [
    "BASELINE_KINDS", "CLASSICAL_KINDS", "DEFAULT_ENSEMBLE_MEMBERS", "DEFAULT_HYPER",
    "NEURAL_KINDS", "Classifier", "DecisionTree", "GaussianNB", "KNN", "LinearSVM",
    "LogisticRegression", "MajorityBaseline", "MlpClassifier", "RandomBaseline",
    "RandomForest", "SoftVoteEnsemble", "TreeArrays", "forest_importance",
    "load_classifier", "majority_baseline", "make_classifier", "predict_classifier",
    "random_baseline", "save_classifier", "soft_vote", "train_classifier",
]
