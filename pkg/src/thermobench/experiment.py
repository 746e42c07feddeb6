"""Config-driven pipeline: data, labels, features, model roster, evaluation, plot data.

The pipeline is split into stages (``generate``, ``prepare``, ``train``,
``evaluate``, ``report``) that communicate through files in the output
directory, so the CLI can run them one at a time. ``run_experiment`` chains
them in memory and writes the same files.

Timing-dependent values live only under keys listed in ``TIMING_KEYS``;
everything else in ``results.json`` is a deterministic function of the
config.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import tempfile
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import N_CLASSES, __version__
from .baselines import NEURAL_KINDS, save_classifier, soft_vote, train_classifier
from .config import ExperimentConfig
from .dataset import LoadReport, SyntheticConfig, generate_synthetic, load_table, write_table
from .eval import (EvalRecord, RESULTS_COLUMNS, build_records, confusion_and_accuracy,
                   pareto_front)
from .features import (ColumnRoles, engineer_features, physics_signals_from_table,
                       select_features)
from .physics import PhysicsSignals, physics_loss
from .preprocess import (SplitSpec, apply_normalizer, assign_stress_labels,
                         compute_stress_thresholds, fit_normalizer, iqr_fences, temporal_split)

log = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")
TIMING_KEYS = frozenset({"train_seconds", "efficiency", "seconds", "wall_seconds"})
FAILED_MARKER = "FAILED"

CATEGORIES = {
    "majority": "baseline", "random": "baseline",
    "logreg": "traditional", "gnb": "traditional", "knn": "traditional",
    "tree": "traditional", "forest": "traditional", "linsvm": "traditional",
    "mlp": "deep", "pg-mlp": "physics", "ensemble": "ensemble",
}

PLOT_KINDS = ("efficiency_vs_accuracy", "category_bars", "training_time", "gen_gap",
              "loss_curves", "pareto")

# objective name -> maximize?
PARETO_OBJECTIVES = {"test_acc": True, "efficiency": True, "train_seconds": False,
                     "n_params": False}

_SIGNAL_FIELDS = ("t_sink", "t_source", "heat_output", "power_input", "cop_carnot",
                  "cop_lo", "cop_hi")


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it and ``__cause__`` holds the error."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage!r} failed: {message}")
        self.stage = stage


# -- file helpers --------------------------------------------------------------------------

def atomic_write(path, data: bytes | str) -> Path:
    """Write via a temp file in the same directory and rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path, obj) -> Path:
    return atomic_write(path, json.dumps(obj, indent=2, sort_keys=False) + "\n")


def _write_csv(path, header, rows) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return atomic_write(path, buf.getvalue())


def strip_timing(obj):
    """Copy of a JSON-like object with every timing key removed."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in TIMING_KEYS}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


class _Stage:
    """Context manager that turns failures into a ``FAILED`` marker plus StageError."""

    def __init__(self, name, out_dir):
        self.name = name
        self.out_dir = Path(out_dir)

    def __enter__(self):
        log.info("stage %s", self.name)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is None or isinstance(exc, StageError):
            return False
        write_json(self.out_dir / FAILED_MARKER, {
            "stage": self.name, "error": f"{exc_type.__name__}: {exc}",
            "traceback": traceback.format_exception(exc_type, exc, tb),
        })
        raise StageError(self.name, f"{exc_type.__name__}: {exc}") from exc


# -- data ----------------------------------------------------------------------------------

def synthetic_config(cfg: ExperimentConfig) -> SyntheticConfig:
    return SyntheticConfig(**vars(cfg.data.synthetic))


def load_data(cfg: ExperimentConfig):
    """Table plus load report (``None`` for synthetic data generated in memory)."""
    d = cfg.data
    if d.source == "synthetic":
        return generate_synthetic(synthetic_config(cfg)), None
    table, report = load_table(d.path, delimiter=d.delimiter,
                               timestamp_column=d.timestamp_column, missing=d.missing,
                               allow_gaps=d.allow_gaps)
    return table, report


def resolve_roles(cfg: ExperimentConfig, table) -> ColumnRoles:
    r = cfg.roles
    if r.heat_demand:
        return ColumnRoles(r.heat_demand, r.t_sink, r.t_source, r.cop, r.power_input,
                           tuple(r.exclude))
    tags = table.country_tags()
    target = r.target_country or (tags[0] if tags else None)
    if target is None:
        raise ValueError("no country-tagged columns; set roles.heat_demand explicitly")
    base = ColumnRoles.for_country(table, target)
    return ColumnRoles(base.heat_demand, r.t_sink or base.t_sink, r.t_source or base.t_source,
                       r.cop or base.cop, r.power_input or base.power_input, tuple(r.exclude))


# -- prepare -------------------------------------------------------------------------------

@dataclass
class PreparedData:
    X: dict
    y: dict
    signals: dict            # split -> PhysicsSignals or None
    feature_names: list
    meta: dict = field(default_factory=dict)

    @property
    def n_features(self):
        return self.X["train"].shape[1]

    def save(self, out_dir) -> None:
        out_dir = Path(out_dir)
        arrays = {}
        for s in SPLITS:
            arrays[f"X_{s}"] = self.X[s]
            arrays[f"y_{s}"] = self.y[s]
            if self.signals[s] is not None:
                for f in _SIGNAL_FIELDS:
                    arrays[f"signals_{s}_{f}"] = getattr(self.signals[s], f)
        buf = io.BytesIO()
        np.savez(buf, **arrays)
        atomic_write(out_dir / "prepared.npz", buf.getvalue())
        write_json(out_dir / "prepared.json", {"feature_names": self.feature_names,
                                               "meta": self.meta})

    @classmethod
    def load(cls, out_dir) -> "PreparedData":
        out_dir = Path(out_dir)
        info = json.loads((out_dir / "prepared.json").read_text())
        with np.load(out_dir / "prepared.npz") as z:
            X = {s: z[f"X_{s}"] for s in SPLITS}
            y = {s: z[f"y_{s}"] for s in SPLITS}
            signals = {}
            for s in SPLITS:
                if f"signals_{s}_t_sink" in z:
                    signals[s] = PhysicsSignals(*(z[f"signals_{s}_{f}"] for f in _SIGNAL_FIELDS))
                else:
                    signals[s] = None
        return cls(X, y, signals, info["feature_names"], info["meta"])


def prepare_data(cfg: ExperimentConfig, table, load_report: LoadReport | None = None
                 ) -> PreparedData:
    """Split, filter, label, engineer, normalize and select features.

    IQR fences and (in ``train-fit`` mode) quartile thresholds come from the
    training years only and are applied unchanged to validation and test.
    """
    roles = resolve_roles(cfg, table)
    spec = SplitSpec(tuple(cfg.split.train), tuple(cfg.split.val), tuple(cfg.split.test))
    idx = dict(zip(SPLITS, temporal_split(table, spec)))
    demand = table.column(roles.heat_demand)

    rows_before = {s: int(idx[s].size) for s in SPLITS}
    fences = None
    if cfg.labeling.iqr_factor is not None:
        fences = iqr_fences(demand[idx["train"]], cfg.labeling.iqr_factor)
        for s in SPLITS:
            v = demand[idx[s]]
            idx[s] = idx[s][(v >= fences[0]) & (v <= fences[1])]
            if idx[s].size == 0:
                raise ValueError(f"IQR filtering removed every {s} row")

    if cfg.labeling.mode == "train-fit":
        thr = compute_stress_thresholds(demand[idx["train"]])
    else:
        thr = compute_stress_thresholds(demand[np.concatenate([idx[s] for s in SPLITS])])
    y = {s: assign_stress_labels(demand[idx[s]], thr) for s in SPLITS}

    fm = engineer_features(table, roles)
    raw_train = fm.data[idx["train"]]
    stats = fit_normalizer(raw_train, fm.names)
    Xn = {s: apply_normalizer(stats, fm.data[idx[s]]) for s in SPLITS}
    kept_names = stats.kept_names

    sel_cfg = cfg.selection
    selection = select_features(
        Xn["train"], y["train"], k=sel_cfg.k, names=kept_names, bins=sel_cfg.bins,
        forest_hyper=sel_cfg.forest, rfe_hyper=sel_cfg.rfe, rfe_step=sel_cfg.rfe_step,
        seed=0, max_rows=sel_cfg.max_rows,
    )
    cols = selection.selected
    X = {s: np.ascontiguousarray(Xn[s][:, cols]) for s in SPLITS}
    names = [kept_names[i] for i in cols]

    signals = {s: None for s in SPLITS}
    scale = 1.0
    if roles.t_sink and roles.t_source and (roles.cop or roles.power_input):
        full = physics_signals_from_table(table, roles)
        es = cfg.physics.energy_scale
        if es == "train-mean":
            scale = float(np.mean(demand[idx["train"]]))
        elif es in (None, "none"):
            scale = 1.0
        else:
            scale = float(es)
        if not scale > 0:
            raise ValueError("energy scale must be > 0")
        signals = {s: full.take(idx[s]).scaled(scale) for s in SPLITS}

    counts = np.array([np.bincount(y[s], minlength=N_CLASSES) for s in SPLITS])
    meta = {
        "roles": roles.to_dict(),
        "split": spec.to_dict(),
        "rows": {s: {"before_iqr": rows_before[s], "after_iqr": int(idx[s].size)}
                 for s in SPLITS},
        "iqr_fences": None if fences is None else list(fences),
        "thresholds": thr.to_dict(),
        "label_counts": {s: counts[i].tolist() for i, s in enumerate(SPLITS)},
        "normalization": stats.to_dict(),
        "selection": selection.to_dict(),
        "feature_counts": {
            "raw_columns": len(table.names),
            "engineered": len(fm.names),
            "after_normalization": len(kept_names),
            "selected": len(names),
            "by_provenance": {p: fm.provenance.count(p) for p in sorted(set(fm.provenance))},
        },
        "energy_scale": scale,
        "load_report": None if load_report is None else load_report.to_dict(),
    }
    return PreparedData(X, y, signals, names, meta)


# -- train ---------------------------------------------------------------------------------

def model_hyper(cfg: ExperimentConfig, kind: str) -> dict:
    hyper = dict(cfg.models.hyper.get(kind) or {})
    if kind in NEURAL_KINDS:
        hyper.setdefault("physics_mode", cfg.physics.mode)
        hyper.setdefault("reduction", cfg.physics.reduction)
        if kind == "pg-mlp":
            hyper.setdefault("lambda_physics", cfg.physics.lambda_physics)
            hyper.setdefault("lambda_energy", cfg.physics.lambda_energy)
    return hyper


def _accuracy(y, pred):
    return float(np.mean(np.asarray(y) == np.asarray(pred)))


def fit_job(data: PreparedData, kind: str, hyper: dict, seed: int,
            checkpoint_dir=None) -> dict:
    """Train one (kind, seed) pair and score it on validation and test."""
    ctx = {}
    if kind in NEURAL_KINDS:
        ctx = {"signals": data.signals["train"], "X_val": data.X["val"],
               "y_val": data.y["val"], "signals_val": data.signals["val"]}
    clf = train_classifier(kind, data.X["train"], data.y["train"], hyper, seed, **ctx)
    p_val = clf.predict_proba(data.X["val"])
    p_test = clf.predict_proba(data.X["test"])
    pred_test = clf.predict(data.X["test"])
    cm = confusion_and_accuracy(data.y["test"], pred_test)[0]
    out = {
        "model_id": kind, "kind": kind, "seed": int(seed),
        "val_acc": _accuracy(data.y["val"], clf.predict(data.X["val"])),
        "test_acc": _accuracy(data.y["test"], pred_test),
        "train_seconds": float(clf.train_seconds),
        "n_params": int(clf.n_params()),
        "confusion": cm.to_list(),
        "history": None,
        "physics_penalty": None,
    }
    if kind in NEURAL_KINDS:
        out["history"] = clf.history_.epochs
        if data.signals["test"] is not None:
            cop = clf.predict_cop(data.X["test"])
            out["physics_penalty"] = physics_loss(cop, data.signals["test"], mode="hinge")
    if checkpoint_dir is not None:
        save_classifier(clf, Path(checkpoint_dir) / f"{kind}_seed{seed}.json")
    out["_probas"] = (p_val, p_test)
    return out


_WORKER_DATA: PreparedData | None = None


def _init_worker(data):
    global _WORKER_DATA
    _WORKER_DATA = data


def _worker_job(args):
    kind, hyper, seed, ckpt = args
    return fit_job(_WORKER_DATA, kind, hyper, seed, ckpt)


def _ensemble_job(cfg, data, seed, member_results) -> dict:
    members = cfg.models.ensemble.members
    p_val = [member_results[m]["_probas"][0] for m in members]
    p_test = [member_results[m]["_probas"][1] for m in members]
    weights = cfg.models.ensemble.weights
    _, avg_val = soft_vote(p_val, weights)
    pred_test, _ = soft_vote(p_test, weights)
    cm = confusion_and_accuracy(data.y["test"], pred_test)[0]
    return {
        "model_id": "ensemble", "kind": "ensemble", "seed": int(seed),
        "val_acc": _accuracy(data.y["val"], np.argmax(avg_val, axis=1)),
        "test_acc": _accuracy(data.y["test"], pred_test),
        "train_seconds": float(sum(member_results[m]["train_seconds"] for m in members)),
        "n_params": int(sum(member_results[m]["n_params"] for m in members)),
        "confusion": cm.to_list(), "history": None, "physics_penalty": None,
        "members": list(members),
    }


def train_roster(cfg: ExperimentConfig, data: PreparedData, out_dir=None) -> list:
    """Per-seed raw results for every roster entry, in roster-then-seed order."""
    roster = list(cfg.models.roster)
    if len(set(roster)) != len(roster):
        raise ValueError("roster entries must be unique")
    want_ensemble = "ensemble" in roster
    kinds = [k for k in roster if k != "ensemble"]
    members = list(cfg.models.ensemble.members) if want_ensemble else []
    if want_ensemble and not members:
        raise ValueError("ensemble needs at least one member")
    if "ensemble" in members:
        raise ValueError("ensemble cannot be its own member")
    extra = [m for m in members if m not in kinds]
    job_kinds = kinds + extra
    ckpt = None
    if cfg.output.checkpoints and out_dir is not None:
        ckpt = Path(out_dir) / "checkpoints"
        ckpt.mkdir(parents=True, exist_ok=True)

    jobs = [(k, model_hyper(cfg, k), s, ckpt) for k in job_kinds for s in cfg.seeds]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(cfg.workers, initializer=_init_worker,
                                 initargs=(data,)) as ex:
            results = list(ex.map(_worker_job, jobs))
    else:
        results = [fit_job(data, *j) for j in jobs]
    by_key = {(r["kind"], r["seed"]): r for r in results}

    out = []
    for k in roster:
        for s in cfg.seeds:
            if k == "ensemble":
                r = _ensemble_job(cfg, data, s, {m: by_key[(m, s)] for m in members})
            else:
                r = by_key[(k, s)]
            out.append({key: v for key, v in r.items() if key != "_probas"})
    return out


# -- evaluate ------------------------------------------------------------------------------

@dataclass
class ReportBundle:
    """Everything a finished run reports; ``to_json`` is the results.json document."""

    records: list
    raw: list
    confusion: dict
    histories: dict
    prepare: dict
    config: dict
    manifest: list = field(default_factory=list)

    def record(self, model_id) -> EvalRecord:
        for r in self.records:
            if r.model_id == model_id:
                return r
        raise KeyError(model_id)

    def to_json(self):
        return {
            "version": __version__,
            "config": self.config,
            "records": [r.to_dict() for r in self.records],
            "results_columns": list(RESULTS_COLUMNS),
            "confusion_matrices": self.confusion,
            "thresholds": self.prepare.get("thresholds"),
            "normalization": self.prepare.get("normalization"),
            "selection": self.prepare.get("selection"),
            "preparation": {k: v for k, v in self.prepare.items()
                            if k not in ("thresholds", "normalization", "selection")},
            "raw_metrics": [{k: v for k, v in r.items() if k != "history"} for r in self.raw],
            "histories": self.histories,
            "manifest": self.manifest,
        }

    @classmethod
    def from_json(cls, d) -> "ReportBundle":
        prepare = dict(d.get("preparation") or {})
        for k in ("thresholds", "normalization", "selection"):
            prepare[k] = d.get(k)
        histories = d.get("histories") or {}
        raw = []
        for r in d["raw_metrics"]:
            r = dict(r)
            r["history"] = histories.get(r["model_id"], {}).get(str(r["seed"]))
            raw.append(r)
        return cls([EvalRecord(**r) for r in d["records"]], raw, d["confusion_matrices"],
                   histories, prepare, d["config"], list(d.get("manifest") or []))


def evaluate_raw(cfg: ExperimentConfig, raw: list, prepare_meta: dict) -> ReportBundle:
    grouped = {}
    for r in raw:
        grouped.setdefault(r["model_id"], []).append(r)
    for mid, rows in grouped.items():
        if sorted(x["seed"] for x in rows) != sorted(cfg.seeds):
            raise ValueError(f"{mid}: expected one raw entry per seed")
    entries, confusion, histories = [], {}, {}
    for mid, rows in grouped.items():
        entries.append({
            "model_id": mid, "kind": rows[0]["kind"],
            "category": CATEGORIES.get(rows[0]["kind"], "other"),
            "val_accs": [x["val_acc"] for x in rows],
            "test_accs": [x["test_acc"] for x in rows],
            "train_seconds": [x["train_seconds"] for x in rows],
            "n_params": int(round(np.mean([x["n_params"] for x in rows]))),
        })
        confusion[mid] = np.sum([np.asarray(x["confusion"]) for x in rows], axis=0).tolist()
        hs = {str(x["seed"]): x["history"] for x in rows if x.get("history")}
        if hs:
            histories[mid] = hs
    records = build_records(entries, cfg.evaluation.significance_threshold)
    return ReportBundle(records, raw, confusion, histories, prepare_meta, cfg.to_dict())


def write_results(bundle: ReportBundle, out_dir) -> list:
    out_dir = Path(out_dir)
    rows = [[r.to_dict()[c] for c in RESULTS_COLUMNS] for r in bundle.records]
    _write_csv(out_dir / "results.csv", RESULTS_COLUMNS, rows)
    write_json(out_dir / "results.json", bundle.to_json())
    return [out_dir / "results.csv", out_dir / "results.json"]


# -- plot data -----------------------------------------------------------------------------

def pareto_rows(bundle: ReportBundle, objectives=None):
    """(objective names, matrix, flags) over the bundle's records."""
    objectives = list(objectives or bundle.config["evaluation"]["pareto_objectives"])
    for o in objectives:
        if o not in PARETO_OBJECTIVES:
            raise ValueError(f"unknown Pareto objective {o!r}")
    P = np.array([[float(getattr(r, o)) for o in objectives] for r in bundle.records])
    front = set(pareto_front(P, [PARETO_OBJECTIVES[o] for o in objectives]))
    return objectives, P, [i in front for i in range(len(bundle.records))]


def emit_plotdata(bundle: ReportBundle, kind: str, out_dir) -> Path:
    """Write ``plotdata/<kind>.csv`` under ``out_dir`` and return its path."""
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot-data kind {kind!r}; choose from {', '.join(PLOT_KINDS)}")
    path = Path(out_dir) / "plotdata" / f"{kind}.csv"
    recs = bundle.records
    if kind == "efficiency_vs_accuracy":
        header = ["model_id", "kind", "category", "test_acc", "test_ci", "efficiency",
                  "train_seconds", "n_params"]
        rows = [[r.model_id, r.kind, r.category, r.test_acc, r.test_ci, r.efficiency,
                 r.train_seconds, r.n_params] for r in recs]
    elif kind == "category_bars":
        header = ["category", "n_models", "mean_test_acc", "best_test_acc", "best_model_id",
                  "mean_val_acc"]
        rows = []
        for cat in sorted({r.category for r in recs}):
            rs = [r for r in recs if r.category == cat]
            best = max(rs, key=lambda r: (r.test_acc, r.model_id))
            rows.append([cat, len(rs), float(np.mean([r.test_acc for r in rs])),
                         best.test_acc, best.model_id,
                         float(np.mean([r.val_acc for r in rs]))])
    elif kind == "training_time":
        header = ["model_id", "category", "seed", "train_seconds"]
        rows = [[x["model_id"], CATEGORIES.get(x["kind"], "other"), x["seed"],
                 x["train_seconds"]] for x in bundle.raw]
    elif kind == "gen_gap":
        header = ["model_id", "category", "val_acc", "test_acc", "gen_gap"]
        rows = [[r.model_id, r.category, r.val_acc, r.test_acc, r.gen_gap] for r in recs]
    elif kind == "loss_curves":
        header = ["model_id", "seed", "epoch", "train_data", "train_physics", "train_energy",
                  "train_total", "train_acc", "val_data", "val_physics", "val_energy",
                  "val_total", "val_acc"]
        rows = []
        for mid, per_seed in bundle.histories.items():
            for seed, epochs in per_seed.items():
                for e in epochs:
                    t, v = e["train"], e["val"]
                    rows.append([mid, int(seed), e["epoch"], t["data"], t["physics"],
                                 t["energy"], t["total"], e["train_acc"], v["data"],
                                 v["physics"], v["energy"], v["total"], e["val_acc"]])
    else:  # pareto
        objectives, P, flags = pareto_rows(bundle)
        header = ["model_id", *objectives, "pareto_optimal"]
        rows = [[r.model_id, *P[i].tolist(), int(flags[i])] for i, r in enumerate(recs)]
    return _write_csv(path, header, rows)


def emit_all_plotdata(bundle: ReportBundle, out_dir) -> list:
    paths = [emit_plotdata(bundle, k, out_dir) for k in PLOT_KINDS]
    bundle.manifest = sorted({*bundle.manifest,
                              *(str(p.relative_to(out_dir)) for p in paths)})
    return paths


# -- stage entry points --------------------------------------------------------------------

def _clear_marker(out_dir):
    m = Path(out_dir) / FAILED_MARKER
    if m.exists():
        m.unlink()


def stage_generate(cfg: ExperimentConfig, out_dir) -> Path:
    out_dir = Path(out_dir)
    with _Stage("generate", out_dir):
        table = generate_synthetic(synthetic_config(cfg))
        dest = Path(cfg.data.path) if cfg.data.path else out_dir / "data.csv"
        dest.parent.mkdir(parents=True, exist_ok=True)
        return write_table(table, dest, cfg.data.delimiter)


def stage_prepare(cfg: ExperimentConfig, out_dir) -> PreparedData:
    out_dir = Path(out_dir)
    with _Stage("load", out_dir):
        table, report = load_data(cfg)
    with _Stage("prepare", out_dir):
        data = prepare_data(cfg, table, report)
        data.save(out_dir)
    return data


def stage_train(cfg: ExperimentConfig, out_dir, data: PreparedData | None = None) -> list:
    out_dir = Path(out_dir)
    with _Stage("train", out_dir):
        if data is None:
            data = PreparedData.load(out_dir)
        raw = train_roster(cfg, data, out_dir)
        write_json(out_dir / "raw_metrics.json", raw)
    return raw


def stage_evaluate(cfg: ExperimentConfig, out_dir, raw=None, prepare_meta=None
                   ) -> ReportBundle:
    out_dir = Path(out_dir)
    with _Stage("evaluate", out_dir):
        if raw is None:
            raw = json.loads((out_dir / "raw_metrics.json").read_text())
        if prepare_meta is None:
            prepare_meta = json.loads((out_dir / "prepared.json").read_text())["meta"]
        bundle = evaluate_raw(cfg, raw, prepare_meta)
        bundle.manifest = ["results.csv", "results.json"]
        write_results(bundle, out_dir)
    return bundle


def stage_report(out_dir, bundle: ReportBundle | None = None) -> ReportBundle:
    out_dir = Path(out_dir)
    with _Stage("report", out_dir):
        if bundle is None:
            bundle = ReportBundle.from_json(json.loads((out_dir / "results.json").read_text()))
        emit_all_plotdata(bundle, out_dir)
        write_json(out_dir / "results.json", bundle.to_json())
        for rel in bundle.manifest:
            p = out_dir / rel
            if not p.exists() or p.stat().st_size == 0:
                raise RuntimeError(f"manifest file missing or empty: {rel}")
    return bundle


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> ReportBundle:
    """Run every stage in memory, writing results and plot data to ``out_dir``."""
    out_dir = Path(out_dir) if out_dir is not None else cfg.output_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    _clear_marker(out_dir)
    t0 = time.perf_counter()
    data = stage_prepare(cfg, out_dir)
    raw = stage_train(cfg, out_dir, data)
    bundle = stage_evaluate(cfg, out_dir, raw, data.meta)
    bundle = stage_report(out_dir, bundle)
    log.info("run finished in %.1f s", time.perf_counter() - t0)
    return bundle


# -- ablation ------------------------------------------------------------------------------

DEFAULT_ABLATIONS = (
    {"name": "baseline", "set": {}},
    {"name": "one_hidden_layer", "set": {"models.hyper.mlp.hidden": [256],
                                         "models.hyper.pg-mlp.hidden": [256]}},
    {"name": "three_hidden_layers", "set": {"models.hyper.mlp.hidden": [256, 128, 64],
                                            "models.hyper.pg-mlp.hidden": [256, 128, 64]}},
    {"name": "features_16", "set": {"selection.k": 16}},
    {"name": "no_dropout", "set": {"models.hyper.mlp.dropout": 0.0,
                                   "models.hyper.pg-mlp.dropout": 0.0}},
    {"name": "no_weight_decay", "set": {"models.hyper.mlp.weight_decay": 0.0,
                                        "models.hyper.pg-mlp.weight_decay": 0.0}},
)

ABLATION_COLUMNS = ("variant", "model_id", "val_acc", "test_acc", "test_ci",
                    "delta_test_acc", "train_seconds")


def run_ablation(cfg: ExperimentConfig, out_dir=None, variants=None) -> list:
    """Rerun the experiment once per config delta; rows compare each to ``baseline``."""
    out_dir = Path(out_dir) if out_dir is not None else cfg.output_dir()
    variants = list(variants or cfg.ablation or DEFAULT_ABLATIONS)
    names = [v["name"] for v in variants]
    if len(set(names)) != len(names):
        raise ValueError("ablation variant names must be unique")
    results = {}
    for v in variants:
        vcfg = cfg.with_overrides(dict(v.get("set") or {}))
        vcfg.ablation = []
        results[v["name"]] = run_experiment(vcfg, out_dir / "ablation" / v["name"])
    ref_name = "baseline" if "baseline" in results else names[0]
    ref = {r.model_id: r.test_acc for r in results[ref_name].records}
    rows = []
    for name in names:
        for r in results[name].records:
            delta = r.test_acc - ref[r.model_id] if r.model_id in ref else float("nan")
            rows.append([name, r.model_id, r.val_acc, r.test_acc, r.test_ci, delta,
                         r.train_seconds])
    _write_csv(out_dir / "ablation.csv", ABLATION_COLUMNS, rows)
    return rows
