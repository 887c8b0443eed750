"""Command-line interface: ``fairir <command> [options]``.

Commands::

    ingest   parse a CSV with a schema (or a built-in dataset) and describe it
    train    train one model and write its run directory
    sweep    train every (family, alpha, seed) of a sweep and assemble fronts
    front    re-assemble fronts from the completed runs of a sweep directory
    weights  export the instance-weight report of a FAIR family from a sweep
    plot     write SVG front scatters and the alpha curve of a sweep
    check    run the acceptance suite (gradients, estimators, metrics, fronts, training)

Shared options: ``--config <json> --dataset --schema --family --alpha --seed
--jobs --out``. For ``sweep`` the family, alpha and seed options take
comma-separated lists and override the config file.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checks import CHECKS, run_checks
from .errors import FairIRError
from .eval import METRICS
from .plots import plot_sweep
from .sweep import (BUILTIN_DATASETS, SweepSpec, assemble_fronts, execute, export_weights, load_splits, load_source,
                    raw_rows, runs_for, sweep, write_run)
from .train import TrainConfig

log = logging.getLogger("fairir")

TRAIN_FILE_KEYS = {"dataset", "schema", "architecture", "split_seed", "threshold"}


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _strs(text):
    return [x.strip() for x in text.split(",") if x.strip()]


def _read_json(path) -> dict:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FairIRError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(d, dict):
        raise FairIRError(f"config {path} must hold a JSON object")
    return d


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _fmt(v):
    return "-" if v is None else f"{v:.4f}"


# -- commands ------------------------------------------------------------------

def cmd_ingest(args) -> int:
    if not args.dataset:
        raise FairIRError("ingest needs --dataset (a CSV path or one of " + ", ".join(BUILTIN_DATASETS) + ")")
    ds = load_source(args.dataset, args.schema)
    splits = load_splits(args.dataset, args.schema, args.seed or 0)
    cells = {f"y={y:.0f},s={s:.0f}": int(((ds.y == y) & (ds.s == s)).sum()) for y in (0, 1) for s in (0, 1)}
    info = {"source": ds.provenance.get("source", args.dataset), "n_rows": len(ds), "n_features": ds.n_features,
            "dropped_rows": ds.provenance.get("dropped_rows", 0), "dataset_hash": ds.digest(),
            "schema_hash": ds.provenance.get("schema_hash"), "cells": cells,
            "split_seed": splits.seed, "split_sizes": [len(d) for d in splits],
            "feature_names": ds.feature_names}
    print(f"{info['source']}: {info['n_rows']} rows x {info['n_features']} features "
          f"({info['dropped_rows']} rows dropped); splits {info['split_sizes']}; cells {cells}")
    if args.out:
        _write(Path(args.out) / "dataset.json", json.dumps(info, indent=2) + "\n")
    return 0


def _train_config(args) -> tuple[TrainConfig, dict]:
    """TrainConfig from table defaults, then the config file, then command-line options."""
    file = _read_json(args.config) if args.config else {}
    data = {k: file.pop(k) for k in list(file) if k in TRAIN_FILE_KEYS}
    dataset = args.dataset or data.get("dataset")
    if not dataset:
        raise FairIRError("train needs --dataset (or 'dataset' in the config)")
    data["dataset"] = dataset
    data["schema"] = args.schema or data.get("schema")
    arch = data.get("architecture") or dataset
    family = args.family or file.pop("family", "FAIR_scalar")
    alpha = file.pop("alpha", 1.0) if args.alpha is None else args.alpha
    seed = file.pop("seed", 0) if args.seed is None else args.seed
    for k in ("family", "alpha", "seed"):
        file.pop(k, None)
    known = set(TrainConfig.__dataclass_fields__)
    unknown = set(file) - known
    if unknown:
        raise FairIRError(f"unknown config keys: {sorted(unknown)}")
    return TrainConfig.for_dataset(arch, family, float(alpha), int(seed), **file), data


def cmd_train(args) -> int:
    config, data = _train_config(args)
    splits = load_splits(data["dataset"], data["schema"], int(data.get("split_seed", 0)))
    artifact = execute(config, splits, float(data.get("threshold", 0.5)),
                       {"dataset": data["dataset"], "schema": data["schema"]})
    out = Path(args.out or "runs_out")
    path = write_run(artifact, out / "runs")
    v, t = artifact.validation, artifact.test
    print(f"{config.family} alpha={config.alpha:g} seed={config.seed}: stop={artifact.manifest['stop_reason']} "
          f"best_epoch={artifact.manifest['best_epoch']}")
    print(f"  validation AUC_y {_fmt(v.auc_y)} AUC_s {_fmt(v.auc_s)} ASD {_fmt(v.asd)} AEOD {_fmt(v.aeod)} "
          f"AOD {_fmt(v.aod)}")
    print(f"  test       AUC_y {_fmt(t.auc_y)} AUC_s {_fmt(t.auc_s)} ASD {_fmt(t.asd)} AEOD {_fmt(t.aeod)} "
          f"AOD {_fmt(t.aod)}")
    print(f"  written to {path}")
    return 0


def _sweep_spec(args) -> SweepSpec:
    d = _read_json(args.config) if args.config else {}
    if args.dataset:
        d["dataset"] = args.dataset
    if args.schema:
        d["schema"] = args.schema
    if args.family:
        d["families"] = _strs(args.family)
    if args.alpha:
        d["alphas"] = {f: _floats(args.alpha) for f in d.get("families", ["FAIR_scalar"])}
    if args.seed:
        d["seeds"] = _ints(args.seed)
    if args.jobs:
        d["jobs"] = args.jobs
    if args.out:
        d["out"] = args.out
    return SweepSpec.from_dict(d)


def _print_fronts(fronts, metrics=METRICS):
    for metric in metrics:
        pts = fronts[metric]["all"]
        print(f"front (AUC_y vs {metric.upper()}, selected on validation, test values shown): {len(pts)} points")
        for p in pts:
            print(f"  {p.family:<15} alpha={p.alpha:<8g} seed={p.seed} AUC {_fmt(p.test.auc_y)} "
                  f"{metric.upper()} {_fmt(p.test.get(metric))}  [{p.run_id}]")


def cmd_sweep(args) -> int:
    spec = _sweep_spec(args)
    n = len(spec.configs())
    done = [0]

    def progress(r):
        done[0] += 1
        msg = r["status"] if r["status"] != "failed" else f"FAILED ({r['error']})"
        print(f"[{done[0]}/{n}] {r['family']} alpha={r['alpha']:g} seed={r['seed']}: {msg}", flush=True)

    res = sweep(spec, progress)
    print(f"{res.count('trained')} trained, {res.count('cached')} cached, {len(res.failures)} failed; "
          f"output in {res.out}")
    _print_fronts(res.fronts, ("asd",))
    return 1 if res.failures else 0


def _sweep_dir(args) -> Path:
    out = Path(args.out or "sweep_out")
    if not (out / "runs").exists():
        raise FairIRError(f"{out} has no runs/ directory; pass the sweep output directory with --out")
    return out


def cmd_front(args) -> int:
    fronts = assemble_fronts(_sweep_dir(args))
    _print_fronts(fronts)
    return 0


def cmd_weights(args) -> int:
    out = _sweep_dir(args)
    family = args.family or "FAIR_scalar"
    seed = args.seed if args.seed is not None else 0
    runs = runs_for(out, family, seed)
    if args.alpha is not None:
        runs = [r for r in runs if r.manifest["config"]["alpha"] == args.alpha]
    if not runs:
        raise FairIRError(f"no completed {family} runs with seed {seed} under {out}")
    m = runs[0].manifest
    report = export_weights(runs, args.top_k, raw_rows(m["dataset"], m.get("schema")))
    dest = out / f"weights_{family}_seed{seed}.json"
    _write(dest, json.dumps(report, indent=2, default=float) + "\n")
    for r in report["runs"]:
        print(f"alpha={r['alpha']:<8g} mean weight {r['mean_weight']:.4f}; {r['message']}")
    ff = report["first_fair"]
    if ff:
        print(f"first instances above 0.99 appear at alpha={ff['alpha']:g}: "
              f"row ids {[i['index'] for i in ff['instances']]}")
    else:
        print("no instance exceeds 0.99 at any alpha")
    sus = report["suspects"]
    print(f"{len(sus['instances'])} instances below 0.01 at the largest alpha ({sus['alpha']:g})")
    print(f"report written to {dest}")
    return 0


def cmd_plot(args) -> int:
    out = Path(args.out or "sweep_out")
    for p in plot_sweep(out):
        print(p)
    return 0


def cmd_check(args) -> int:
    numbers = _ints(args.criteria) if args.criteria else sorted(CHECKS)
    bad = set(numbers) - set(CHECKS)
    if bad:
        raise FairIRError(f"unknown criteria {sorted(bad)}; choose from {sorted(CHECKS)}")
    results = run_checks(numbers, workdir=args.out, jobs=args.jobs or 1, report=lambda r: print(r.line(), flush=True))
    if args.out:
        _write(Path(args.out) / "checks.json",
               json.dumps([r.to_dict() for r in results], indent=2, default=_json_default) + "\n")
    return 0 if all(r.passed for r in results) else 1


def _json_default(v):
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return str(v)


COMMANDS = {"ingest": cmd_ingest, "train": cmd_train, "sweep": cmd_sweep, "front": cmd_front,
            "weights": cmd_weights, "plot": cmd_plot, "check": cmd_check}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairir", description="Fair adversarial instance reweighting.")
    parser.add_argument("--version", action="version", version=f"fairir {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {"ingest": "parse and describe a dataset", "train": "train one model",
             "sweep": "run an alpha sweep and assemble fronts", "front": "re-assemble fronts of a sweep",
             "weights": "export instance weights of a sweep", "plot": "plot fronts of a sweep",
             "check": "run the acceptance suite"}
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--dataset", help="built-in dataset (" + ", ".join(BUILTIN_DATASETS) + ") or CSV path")
        p.add_argument("--schema", help="schema JSON for a CSV dataset")
        p.add_argument("--family", help="model family (comma-separated list for sweep)")
        p.add_argument("--alpha", type=float if name in ("train", "weights") else str,
                       help="fairness trade-off (comma-separated list for sweep)")
        p.add_argument("--seed", type=int if name in ("train", "weights", "ingest") else str,
                       help="random seed (comma-separated list for sweep; split seed for ingest)")
        p.add_argument("--jobs", type=int, help="parallel runs")
        p.add_argument("--out", help="output directory")
        if name == "weights":
            p.add_argument("--top-k", type=int, default=10, help="instances listed per run")
        if name == "check":
            p.add_argument("--criteria", help="comma-separated criterion numbers (default: all)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except FairIRError as exc:
        print(f"fairir {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
