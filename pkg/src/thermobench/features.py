"""Feature engineering and three-way feature selection.

One sample is one timestamp of the wide table. The heat demand of a target
country is the labeling signal, so that column, and the target's power
input (which equals demand / COP), never enter the feature matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .baselines import LogisticRegression, RandomForest, forest_importance
from .dataset import TimeSeriesTable, day_of_year, hour_of_day, split_country
from .physics import PhysicsSignals

PROVENANCE = ("raw", "differential", "degradation", "temporal", "geographic")


@dataclass(frozen=True)
class ColumnRoles:
    """Which table columns play which physical role for the labeling target."""

    heat_demand: str
    t_sink: str | None = None
    t_source: str | None = None
    cop: str | None = None
    power_input: str | None = None
    exclude: tuple = ()

    @classmethod
    def for_country(cls, table: TimeSeriesTable, country: str) -> "ColumnRoles":
        """Roles from the ``<COUNTRY>_<variable>`` naming convention."""
        def pick(var):
            name = f"{country}_{var}"
            return name if name in table else None

        demand = pick("heat_demand")
        if demand is None:
            raise KeyError(f"no {country}_heat_demand column")
        return cls(demand, pick("t_sink"), pick("t_source"), pick("cop"), pick("power_input"))

    @property
    def country(self):
        return split_country(self.heat_demand)[0]

    def to_dict(self):
        return {"heat_demand": self.heat_demand, "t_sink": self.t_sink,
                "t_source": self.t_source, "cop": self.cop,
                "power_input": self.power_input, "exclude": list(self.exclude)}


@dataclass
class FeatureMatrix:
    names: list
    data: np.ndarray
    provenance: list

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2 or self.data.shape[1] != len(self.names):
            raise ValueError("column count does not match name count")
        if len(set(self.names)) != len(self.names):
            raise ValueError("feature names must be unique")
        if len(self.provenance) != len(self.names):
            raise ValueError("one provenance tag per feature")
        for p in self.provenance:
            if p not in PROVENANCE:
                raise ValueError(f"unknown provenance {p!r}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("feature matrix contains NaN or inf")

    @property
    def n_rows(self):
        return self.data.shape[0]

    def rows(self, idx) -> "FeatureMatrix":
        return FeatureMatrix(list(self.names), self.data[idx], list(self.provenance))

    def columns(self, idx) -> "FeatureMatrix":
        idx = list(idx)
        return FeatureMatrix([self.names[i] for i in idx], self.data[:, idx],
                             [self.provenance[i] for i in idx])


def _thermal_groups(table: TimeSeriesTable, roles: ColumnRoles):
    """(label, t_sink, t_source, cop) per country, target roles first."""
    groups = []
    seen = set()
    if roles.t_sink and roles.t_source:
        label = roles.country or "target"
        groups.append((label, roles.t_sink, roles.t_source, roles.cop))
        seen.add(label)
    for cc in table.country_tags():
        if cc in seen:
            continue
        sink, source, cop = f"{cc}_t_sink", f"{cc}_t_source", f"{cc}_cop"
        if sink in table and source in table:
            groups.append((cc, sink, source, cop if cop in table else None))
            seen.add(cc)
    return groups


def engineer_features(table: TimeSeriesTable, roles: ColumnRoles,
                      degradation: bool = True) -> FeatureMatrix:
    """Raw columns plus temperature differentials, COP degradation ratios,
    hour/day-of-year harmonics and per-country indicators.

    The geographic indicator for country ``c`` is 1 when ``c`` is the
    labeling target; within a single-target table it is constant.
    """
    if roles.heat_demand not in table:
        raise KeyError(f"heat demand column {roles.heat_demand!r} not in table")
    names, cols, prov = [], [], []

    def add(name, values, tag):
        names.append(name)
        cols.append(np.asarray(values, dtype=float))
        prov.append(tag)

    banned = {roles.heat_demand, roles.power_input, *roles.exclude}
    for name in table.names:
        if name not in banned:
            add(name, table.column(name), "raw")

    for label, sink, source, cop in _thermal_groups(table, roles):
        ts, tq = table.column(sink), table.column(source)
        add(f"{label}_temp_diff", ts - tq, "differential")
        if degradation and cop is not None:
            if np.any(ts == tq):
                raise ValueError(f"{label}: t_sink equals t_source, Carnot COP undefined")
            add(f"{label}_cop_degradation", table.column(cop) / (ts / (ts - tq)), "degradation")

    hour = hour_of_day(table.timestamps)
    doy = day_of_year(table.timestamps)
    add("hour_sin", np.sin(2 * np.pi * hour / 24.0), "temporal")
    add("hour_cos", np.cos(2 * np.pi * hour / 24.0), "temporal")
    add("doy_sin", np.sin(2 * np.pi * doy / 365.25), "temporal")
    add("doy_cos", np.cos(2 * np.pi * doy / 365.25), "temporal")

    target = roles.country
    for cc in table.country_tags():
        add(f"geo_{cc}", np.full(table.n_rows, 1.0 if cc == target else 0.0), "geographic")

    data = np.column_stack(cols) if cols else np.empty((table.n_rows, 0))
    return FeatureMatrix(names, data, prov)


def physics_signals_from_table(table: TimeSeriesTable, roles: ColumnRoles) -> PhysicsSignals:
    """Per-row physics context for the target; power is ``heat / cop`` when absent."""
    if roles.t_sink is None or roles.t_source is None:
        raise ValueError("physics signals need t_sink and t_source columns")
    heat = table.column(roles.heat_demand)
    power = table.column(roles.power_input) if roles.power_input else None
    cop = table.column(roles.cop) if roles.cop else None
    return PhysicsSignals.build(table.column(roles.t_sink), table.column(roles.t_source),
                                heat, power_input=power, cop=cop)


def mutual_information(feature, labels, bins: int = 16) -> float:
    """Plug-in MI in bits from an equal-width histogram of the feature."""
    x = np.asarray(feature, dtype=float)
    y = np.asarray(labels, dtype=np.int64)
    if x.shape != y.shape:
        raise ValueError("feature and labels must have equal length")
    if bins < 2:
        raise ValueError("bins must be >= 2")
    if x.size == 0:
        return 0.0
    lo, hi = x.min(), x.max()
    if not hi > lo:
        return 0.0
    b = np.floor((x - lo) / (hi - lo) * bins).astype(np.int64)
    np.clip(b, 0, bins - 1, out=b)
    k = int(y.max()) + 1
    joint = np.bincount(b * k + y, minlength=bins * k).reshape(bins, k) / x.size
    px = joint.sum(axis=1, keepdims=True)
    py = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    mi = float(np.sum(joint[nz] * np.log2(joint[nz] / (px @ py)[nz])))
    return max(mi, 0.0)


def ranks_from_scores(scores) -> np.ndarray:
    """Rank 1 for the highest score; ties go to the lower feature index."""
    s = np.asarray(scores, dtype=float)
    order = np.lexsort((np.arange(s.size), -s))
    ranks = np.empty(s.size, dtype=np.int64)
    ranks[order] = np.arange(1, s.size + 1)
    return ranks


class RfeResult(NamedTuple):
    ranks: np.ndarray
    n_fits: int
    unconverged: int


def recursive_elimination(X, y, step: int = 1, hyper: dict | None = None) -> RfeResult:
    """Backward elimination driven by multinomial logistic weight norms.

    Each round refits the logistic baseline on the surviving features and
    drops the ``step`` features whose class-weight rows have the smallest
    L2 norm. Ranks follow elimination order; the last survivor is rank 1.
    Fits that exhaust their epoch budget are used as-is and counted in
    ``unconverged``.
    """
    X = np.asarray(X, dtype=float)
    F = X.shape[1]
    if F < 2:
        raise ValueError("recursive elimination needs at least 2 features")
    if step < 1:
        raise ValueError("step must be >= 1")
    hyper = dict(hyper or {})
    remaining = list(range(F))
    ranks = np.zeros(F, dtype=np.int64)
    next_rank = F
    fits = unconverged = 0
    while len(remaining) > 1:
        clf = LogisticRegression(**hyper).fit(X[:, remaining], y)
        fits += 1
        unconverged += not clf.converged_
        norms = clf.feature_weight_norms()
        n_remove = min(step, len(remaining) - 1)
        order = np.lexsort((np.arange(len(remaining)), norms))[:n_remove]
        for j in order:
            ranks[remaining[j]] = next_rank
            next_rank -= 1
        drop = set(order.tolist())
        remaining = [r for i, r in enumerate(remaining) if i not in drop]
    ranks[remaining[0]] = 1
    return RfeResult(ranks, fits, unconverged)


@dataclass
class SelectionResult:
    mi_ranks: np.ndarray
    forest_ranks: np.ndarray
    rfe_ranks: np.ndarray
    aggregate: np.ndarray
    selected: np.ndarray
    names: list | None = None
    scores: dict = field(default_factory=dict)

    def selected_names(self):
        return None if self.names is None else [self.names[i] for i in self.selected]

    def to_dict(self):
        return {
            "names": self.names,
            "mutual_information_ranks": self.mi_ranks.tolist(),
            "forest_importance_ranks": self.forest_ranks.tolist(),
            "recursive_elimination_ranks": self.rfe_ranks.tolist(),
            "aggregate_rank": self.aggregate.tolist(),
            "selected": self.selected.tolist(),
            "selected_names": self.selected_names(),
            "scores": {k: np.asarray(v).tolist() for k, v in self.scores.items()},
        }


def aggregate_selection(ranks, k: int, names=None) -> SelectionResult:
    """Mean (Borda) rank of the three methods; top ``k``, ties to the lower index."""
    mi, fo, rfe = (np.asarray(r, dtype=np.int64) for r in ranks)
    F = mi.size
    if fo.size != F or rfe.size != F:
        raise ValueError("rank vectors must have equal length")
    if not 1 <= k <= F:
        raise ValueError(f"k must be in 1..{F}")
    agg = (mi + fo + rfe) / 3.0
    order = np.lexsort((np.arange(F), agg))
    selected = np.sort(order[:k])
    return SelectionResult(mi, fo, rfe, agg, selected, names)


def select_features(X, y, k: int = 64, names=None, bins: int = 16, forest_hyper=None,
                    rfe_hyper=None, rfe_step: int = 1, seed: int = 0,
                    max_rows: int | None = None) -> SelectionResult:
    """Score features three ways on (normalized) training rows and keep the top ``k``.

    ``k`` is clamped to the feature count. ``max_rows`` caps the rows used,
    taking an evenly strided subset so the result stays deterministic.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if max_rows is not None and X.shape[0] > max_rows:
        idx = np.linspace(0, X.shape[0] - 1, max_rows).round().astype(np.int64)
        X, y = X[idx], y[idx]
    F = X.shape[1]
    mi = np.array([mutual_information(X[:, j], y, bins) for j in range(F)])
    forest = RandomForest(seed=seed, **(forest_hyper or {})).fit(X, y)
    imp = forest_importance(forest, F)
    if F >= 2:
        rfe = recursive_elimination(X, y, rfe_step, rfe_hyper)
        rfe_ranks = rfe.ranks
    else:
        rfe, rfe_ranks = None, np.ones(1, dtype=np.int64)
    result = aggregate_selection((ranks_from_scores(mi), ranks_from_scores(imp), rfe_ranks),
                                 min(k, F), names)
    result.scores = {"mutual_information": mi, "forest_importance": imp}
    if rfe is not None:
        result.scores["rfe_fits"] = np.array([rfe.n_fits])
        result.scores["rfe_unconverged"] = np.array([rfe.unconverged])
    return result


__all__ = [
    "ColumnRoles", "FeatureMatrix", "RfeResult", "SelectionResult", "aggregate_selection",
    "engineer_features", "forest_importance", "mutual_information",
    "physics_signals_from_table", "ranks_from_scores", "recursive_elimination",
    "select_features",
]
