"""Temporal splits, z-score normalization, IQR filtering and stress labels.

Every quantile in this module uses linear interpolation at fractional rank
``p * (n - 1)`` over the sorted sample, i.e. numpy's ``"linear"`` method.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import TimeSeriesTable


class SplitError(ValueError):
    pass


def quantile(values, p):
    """Interpolated quantile at fractional rank ``p * (n - 1)``."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("quantile of empty series")
    return np.quantile(v, p, method="linear")


@dataclass(frozen=True)
class SplitSpec:
    train: tuple[int, int] = (2008, 2018)
    val: tuple[int, int] = (2019, 2020)
    test: tuple[int, int] = (2021, 2022)

    def __post_init__(self):
        for name in ("train", "val", "test"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} year range is reversed: {lo}-{hi}")
            object.__setattr__(self, name, (int(lo), int(hi)))
        if not (self.train[1] < self.val[0] and self.val[1] < self.test[0]):
            raise ValueError("split ranges must be ordered train < val < test and disjoint")

    @classmethod
    def consecutive(cls, start: int, n_train: int, n_val: int = 1, n_test: int = 1):
        """Contiguous year blocks starting at ``start``."""
        a = start + n_train - 1
        b = a + n_val
        return cls((start, a), (a + 1, b), (b + 1, b + n_test))

    def to_dict(self):
        return {"train": list(self.train), "val": list(self.val), "test": list(self.test)}


def temporal_split(table_or_years, spec: SplitSpec):
    """Partition row indices by calendar year.

    Accepts a :class:`TimeSeriesTable` or an integer array of years. Rows
    outside all three ranges are excluded. Returns ``(train, val, test)``
    index arrays, each in original row order.
    """
    if isinstance(table_or_years, TimeSeriesTable):
        years = table_or_years.years()
    else:
        years = np.asarray(table_or_years, dtype=int)
    out = []
    for name in ("train", "val", "test"):
        lo, hi = getattr(spec, name)
        idx = np.flatnonzero((years >= lo) & (years <= hi))
        if idx.size == 0:
            raise SplitError(f"empty split: no rows in {name} years {lo}-{hi}")
        out.append(idx)
    return tuple(out)


@dataclass
class NormStats:
    mean: np.ndarray
    std: np.ndarray
    kept: np.ndarray
    dropped: list = field(default_factory=list)
    names: list | None = None

    def to_dict(self):
        return {
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "kept": self.kept.tolist(),
            "dropped": list(self.dropped),
            "names": None if self.names is None else list(self.names),
        }

    @property
    def kept_names(self):
        if self.names is None:
            return None
        return [self.names[i] for i in self.kept]


def fit_normalizer(rows, names=None, rtol: float = 1e-12) -> NormStats:
    """Per-column mean and population std of the training rows.

    Columns whose std is zero (relative to ``rtol * (1 + |mean|)``) are
    dropped and listed in ``dropped`` (by name when ``names`` is given,
    else by index).
    """
    X = np.asarray(rows, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.shape[0] < 2:
        raise ValueError("need at least 2 training rows to fit a normalizer")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    ok = std > rtol * (1.0 + np.abs(mean))
    kept = np.flatnonzero(ok)
    dropped_idx = np.flatnonzero(~ok)
    dropped = [names[i] for i in dropped_idx] if names is not None else dropped_idx.tolist()
    return NormStats(mean=mean[kept], std=std[kept], kept=kept, dropped=dropped,
                     names=list(names) if names is not None else None)


def apply_normalizer(stats: NormStats, rows) -> np.ndarray:
    X = np.asarray(rows, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    return (X[:, stats.kept] - stats.mean) / stats.std


def iqr_fences(values, factor: float = 1.5) -> tuple[float, float]:
    q1, q3 = quantile(values, [0.25, 0.75])
    iqr = q3 - q1
    return float(q1 - factor * iqr), float(q3 + factor * iqr)


def iqr_filter(values, factor: float = 1.5) -> np.ndarray:
    """Indices of values inside ``[Q1 - factor*IQR, Q3 + factor*IQR]``."""
    v = np.asarray(values, dtype=float)
    if v.size < 4:
        raise ValueError("IQR filtering needs at least 4 values")
    lo, hi = iqr_fences(v, factor)
    return np.flatnonzero((v >= lo) & (v <= hi))


@dataclass(frozen=True)
class StressThresholds:
    q25: float
    q50: float
    q75: float

    def __post_init__(self):
        if not (self.q25 <= self.q50 <= self.q75):
            raise ValueError(f"thresholds not ordered: {self.q25}, {self.q50}, {self.q75}")

    def as_array(self):
        return np.array([self.q25, self.q50, self.q75])

    def to_dict(self):
        return {"q25": self.q25, "q50": self.q50, "q75": self.q75}


def compute_stress_thresholds(values) -> StressThresholds:
    v = np.asarray(values, dtype=float)
    if v.size < 4:
        raise ValueError("need at least 4 values to fit stress thresholds")
    q = quantile(v, [0.25, 0.5, 0.75])
    return StressThresholds(float(q[0]), float(q[1]), float(q[2]))


def assign_stress_labels(values, thr: StressThresholds) -> np.ndarray:
    """Map heat demand to classes 0..3; values on a threshold go to the lower class."""
    v = np.asarray(values, dtype=float)
    return np.searchsorted(thr.as_array(), v, side="left").astype(np.int64)
