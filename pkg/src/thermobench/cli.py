"""``thermobench`` command line.

Usage: ``thermobench <subcommand> --config <path> [--out DIR] [--seeds N] [--workers N]``

Precedence for settings: ``--set key=value`` and the dedicated flags, then
the config file, then built-in defaults. Without ``--out`` or
``output.dir`` the run goes to ``$THERMOBENCH_OUT/<name>`` (default root
``runs``).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import yaml

from .config import OUT_ENV, ConfigError, ExperimentConfig, load_config
from .experiment import (PLOT_KINDS, ReportBundle, StageError, emit_plotdata, run_ablation,
                         run_experiment, stage_evaluate, stage_generate, stage_prepare,
                         stage_report, stage_train)

log = logging.getLogger("thermobench")


def _parse_set(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = yaml.safe_load(v)
    return out


def build_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = _parse_set(args.set)
    if args.out:
        overrides["output.dir"] = args.out
    if args.seeds is not None:
        if args.seeds < 1:
            raise ConfigError("--seeds must be >= 1")
        overrides["seeds"] = list(range(args.seeds))
    if args.workers is not None:
        overrides["workers"] = args.workers
    return cfg.with_overrides(overrides) if overrides else cfg


def _print_records(bundle: ReportBundle, stream=None):
    stream = stream or sys.stdout
    print(f"{'rank':>4}  {'model':<10} {'test %':>8} {'+/-':>6} {'val %':>8} {'gap':>6} "
          f"{'sec':>8} {'eff':>8}  effect", file=stream)
    for r in bundle.records:
        print(f"{r.rank:>4}  {r.model_id:<10} {r.test_acc:8.2f} {r.test_ci:6.2f} "
              f"{r.val_acc:8.2f} {r.gen_gap:+6.2f} {r.train_seconds:8.2f} "
              f"{r.efficiency:8.1f}  {r.effect}", file=stream)


def cmd_generate(cfg, out, args):
    print(stage_generate(cfg, out))


def cmd_prepare(cfg, out, args):
    data = stage_prepare(cfg, out)
    fc = data.meta["feature_counts"]
    print(f"prepared {out}: rows " + ", ".join(
        f"{s}={data.X[s].shape[0]}" for s in ("train", "val", "test"))
        + f"; features {fc['engineered']} engineered, {fc['selected']} selected")


def cmd_train(cfg, out, args):
    raw = stage_train(cfg, out)
    print(f"trained {len(raw)} (model, seed) jobs into {out / 'raw_metrics.json'}")


def cmd_evaluate(cfg, out, args):
    _print_records(stage_evaluate(cfg, out))


def cmd_report(cfg, out, args):
    if args.kind:
        bundle = ReportBundle.from_json(json.loads((out / "results.json").read_text()))
        for k in args.kind:
            print(emit_plotdata(bundle, k, out))
        return
    bundle = stage_report(out)
    for rel in bundle.manifest:
        print(out / rel)


def cmd_run(cfg, out, args):
    _print_records(run_experiment(cfg, out))


def cmd_ablate(cfg, out, args):
    rows = run_ablation(cfg, out)
    for variant, model, _, test, ci, delta, _ in rows:
        print(f"{variant:<22} {model:<10} {test:8.2f} +/- {ci:5.2f}  delta {delta:+6.2f}")


COMMANDS = {
    "generate": (cmd_generate, "write the synthetic dataset as a CSV table"),
    "prepare": (cmd_prepare, "load data, label, engineer and select features"),
    "train": (cmd_train, "train the model roster over all seeds"),
    "evaluate": (cmd_evaluate, "aggregate raw metrics into results.csv and results.json"),
    "report": (cmd_report, "emit plot-data CSVs from results.json"),
    "run": (cmd_run, "run prepare, train, evaluate and report in one go"),
    "ablate": (cmd_ablate, "rerun the experiment over config deltas"),
}


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thermobench", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log stage progress")
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", help="YAML experiment config")
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<name>)")
        sp.add_argument("--seeds", type=int, help="use seeds 0..N-1")
        sp.add_argument("--workers", type=int, help="parallel (model, seed) jobs")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a dotted config key, value parsed as YAML")
        if name == "report":
            sp.add_argument("--kind", action="append", choices=PLOT_KINDS,
                            help="emit only this plot-data kind (repeatable)")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
        out = cfg.output_dir()
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command][0](cfg, out, args)
    except (ConfigError, StageError, OSError, ValueError, KeyError) as exc:
        print(f"thermobench: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
