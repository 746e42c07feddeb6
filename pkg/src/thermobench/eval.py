"""Accuracy metrics, z-score statistics, confidence intervals and Pareto fronts."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import N_CLASSES

EFFECT_THRESHOLDS = (0.2, 0.5, 0.8)
EFFECT_CATEGORIES = ("negligible", "small", "medium", "large")

RESULTS_COLUMNS = (
    "rank", "model_id", "kind", "category", "val_acc", "val_ci", "test_acc", "test_ci",
    "gen_gap", "train_seconds", "efficiency", "zscore", "effect", "significant",
    "n_params", "n_seeds",
)


@dataclass
class ConfusionMatrix:
    counts: np.ndarray

    @property
    def total(self):
        return int(self.counts.sum())

    def accuracy(self):
        return float(np.trace(self.counts) / self.total) if self.total else 0.0

    def precision(self):
        col = self.counts.sum(axis=0)
        return np.divide(np.diag(self.counts), col, out=np.zeros(len(col)), where=col > 0)

    def recall(self):
        row = self.counts.sum(axis=1)
        return np.divide(np.diag(self.counts), row, out=np.zeros(len(row)), where=row > 0)

    def to_list(self):
        return self.counts.astype(int).tolist()


def confusion_and_accuracy(true, pred, n_classes: int = N_CLASSES):
    """Confusion matrix (rows = true class), accuracy, per-class precision and recall."""
    t = np.asarray(true, dtype=np.int64)
    p = np.asarray(pred, dtype=np.int64)
    if t.shape != p.shape or t.size == 0:
        raise ValueError("need equal-length, nonempty label vectors")
    counts = np.bincount(t * n_classes + p, minlength=n_classes**2).reshape(n_classes, n_classes)
    cm = ConfusionMatrix(counts)
    return cm, cm.accuracy(), cm.precision(), cm.recall()


def generalization_gap(val_pct: float, test_pct: float) -> float:
    """Validation minus test accuracy, in percentage points."""
    for v in (val_pct, test_pct):
        if not 0.0 <= v <= 100.0:
            raise ValueError("accuracies must be percentages in [0, 100]")
    return val_pct - test_pct


def efficiency_score(test_pct: float, seconds: float) -> float:
    """Test accuracy percent per training second."""
    if not seconds > 0:
        raise ValueError("training seconds must be > 0")
    return test_pct / seconds


def zscores(values) -> np.ndarray:
    """Standardize against the population mean and population std."""
    a = np.asarray(values, dtype=float)
    if a.size < 2:
        raise ValueError("need at least 2 values")
    sd = a.std()
    if not sd > 0:
        raise ValueError("zero spread")
    return (a - a.mean()) / sd


def effect_category(z: float) -> str:
    """Cohen-style bucket of ``|z|``; a value on a threshold takes the upper bucket."""
    if not math.isfinite(z):
        raise ValueError("z must be finite")
    m = abs(z)
    for cat, thr in zip(EFFECT_CATEGORIES, EFFECT_THRESHOLDS):
        if m < thr:
            return cat
    return EFFECT_CATEGORIES[-1]


def confidence_interval(values, level: float = 0.95):
    """Normal-approximation interval ``mean +/- z * s / sqrt(n)`` with sample std."""
    a = np.asarray(values, dtype=float)
    if a.size < 2:
        raise ValueError("need at least 2 values")
    if level != 0.95:
        from scipy.stats import norm

        zcrit = float(norm.ppf(0.5 + level / 2))
    else:
        zcrit = 1.96
    return float(a.mean()), float(zcrit * a.std(ddof=1) / math.sqrt(a.size))


def dominates(a, b) -> bool:
    """True when ``a`` is >= ``b`` everywhere and > somewhere (maximize all)."""
    return bool(np.all(a >= b) and np.any(a > b))


def pareto_front(points, maximize=None) -> list:
    """Indices of non-dominated points.

    ``maximize`` holds one flag per objective (default: maximize all);
    minimized objectives are negated before comparison.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P.reshape(-1, 1)
    if P.shape[0] == 0:
        raise ValueError("need at least one point")
    d = P.shape[1]
    flags = np.ones(d, dtype=bool) if maximize is None else np.asarray(maximize, dtype=bool)
    if flags.shape != (d,):
        raise ValueError("one maximize flag per objective")
    Q = np.where(flags, P, -P)
    keep = []
    for i in range(Q.shape[0]):
        ge = np.all(Q >= Q[i], axis=1)
        gt = np.any(Q > Q[i], axis=1)
        if not np.any(ge & gt):
            keep.append(i)
    return keep


@dataclass
class EvalRecord:
    model_id: str
    kind: str
    category: str
    val_acc: float
    test_acc: float
    gen_gap: float
    train_seconds: float
    efficiency: float
    zscore: float = 0.0
    effect: str = "negligible"
    significant: bool = False
    rank: int = 0
    val_ci: float = 0.0
    test_ci: float = 0.0
    n_params: int = 0
    n_seeds: int = 1

    def to_dict(self):
        return asdict(self)


def build_records(entries, significance_threshold: float = 1.96) -> list:
    """Turn per-model aggregates into ranked :class:`EvalRecord` rows.

    Each entry is a dict with ``model_id``, ``kind``, ``category``,
    ``val_accs`` and ``test_accs`` (fractions, one per seed),
    ``train_seconds`` (one per seed) and ``n_params``. Percentages are
    means across seeds; the efficiency score divides mean test accuracy by
    mean training seconds.
    """
    records = []
    for e in entries:
        val = 100.0 * np.asarray(e["val_accs"], dtype=float)
        test = 100.0 * np.asarray(e["test_accs"], dtype=float)
        secs = np.asarray(e["train_seconds"], dtype=float)
        v, t = float(val.mean()), float(test.mean())
        records.append(EvalRecord(
            model_id=e["model_id"], kind=e["kind"], category=e["category"],
            val_acc=v, test_acc=t, gen_gap=generalization_gap(v, t),
            train_seconds=float(secs.mean()),
            efficiency=efficiency_score(t, float(secs.mean())),
            val_ci=confidence_interval(val)[1] if val.size > 1 else 0.0,
            test_ci=confidence_interval(test)[1] if test.size > 1 else 0.0,
            n_params=int(e.get("n_params", 0)), n_seeds=int(test.size),
        ))
    accs = np.array([r.test_acc for r in records])
    if len(records) >= 2 and accs.std() > 0:
        z = zscores(accs)
    else:
        z = np.zeros(len(records))
    for r, zi in zip(records, z):
        r.zscore = float(zi)
        r.effect = effect_category(float(zi))
        r.significant = bool(abs(zi) >= significance_threshold)
    order = sorted(range(len(records)), key=lambda i: (-records[i].test_acc, records[i].model_id))
    for rank, i in enumerate(order, start=1):
        records[i].rank = rank
    return [records[i] for i in order]


def write_results_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULTS_COLUMNS)
        for r in records:
            d = r.to_dict()
            w.writerow([d[c] for c in RESULTS_COLUMNS])
