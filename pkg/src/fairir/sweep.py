"""Experiment harness: alpha sweeps, run artifacts, Pareto-front assembly and weight export.

A sweep trains one model per (family, grid value, seed) on a fixed
train/validation/test split and writes one directory per run::

    <out>/runs/<run_id>/manifest.json   configuration, data hashes, provenance
                        trainlog.csv    per-epoch objectives (no wall time)
                        reports.json    validation and test FairnessReports
                        weights.csv     per-instance weights (FAIR families)

``run_id`` hashes the training configuration together with the split data,
so rerunning an unchanged sweep skips every completed run. Fronts are then
assembled sequentially from the completed runs::

    <out>/fronts/<metric>/<family>.csv|.json   and   <out>/fronts/<metric>/all.csv|.json
    <out>/points.csv                            one row per run (validation + test)
    <out>/summary.json                          counts, failures, per-(family, alpha) medians
"""
from __future__ import annotations

import csv
import dataclasses
import functools
import hashlib
import io
import json
import logging
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .architectures import TABLE
from .data import fixtures
from .data.schema import load_schema
from .data.tabular import SplitSet, TabularDataset, load_csv, dummy_code, prepare_splits
from .errors import ConfigurationError, FormatError, UnsupportedOperationError
from .eval import (DEFAULT_THRESHOLD, METRICS, FairnessReport, ParetoPoint, evaluate, front_to_csv,
                   front_to_json, pareto_front)
from .models import FAIR_FAMILIES, instance_records
from .train import ALL_FAMILIES, REWEIGHING, TrainConfig, TrainLog, run_manifest, train

log = logging.getLogger(__name__)

ALPHA_GRID = (0.0, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 1e2, 1e3)
BASELINE_GRID = (0.0, 1e-3, 1e-2, 1e-1, 1.0)
DEFAULT_SEEDS = (0, 1, 2, 3, 4)
BUILTIN_DATASETS = ("german_sex", "german_age", "synthetic")
FAIR_THRESHOLD = 0.99
SUSPECT_THRESHOLD = 0.01
WEIGHT_COLUMNS = ("index", "split", "family", "alpha", "weight", "logP_y", "logP_s", "ratio")


@dataclass(frozen=True)
class SweepSpec:
    """What to run. ``alphas`` maps a family to its grid; missing families use the defaults.

    ``dataset`` is a built-in name (``german_sex``, ``german_age``,
    ``synthetic``, or ``synthetic@<k>`` for the synthetic fixture generated
    with seed ``k``) or a CSV path, in which case ``schema`` (a schema JSON
    path) and ``architecture`` (a key of the architecture table supplying
    widths and learning rates) are required. ``overrides`` are TrainConfig
    fields applied to every run.
    """
    dataset: str
    families: tuple = ("FAIR_scalar",)
    schema: str | None = None
    architecture: str | None = None
    alphas: dict = field(default_factory=dict)
    seeds: tuple = DEFAULT_SEEDS
    split_seed: int = 0
    out: str = "sweep_out"
    jobs: int = 1
    overrides: dict = field(default_factory=dict)
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        object.__setattr__(self, "families", tuple(self.families))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "alphas", {k: tuple(float(a) for a in v) for k, v in dict(self.alphas).items()})
        object.__setattr__(self, "overrides", dict(self.overrides))
        self.validate()

    def validate(self):
        if not self.families:
            raise ConfigurationError("families must be non-empty")
        for f in self.families:
            if f not in ALL_FAMILIES:
                raise ConfigurationError(f"unknown family {f!r}; expected one of {ALL_FAMILIES}")
        extra = set(self.alphas) - set(self.families)
        if extra:
            raise ConfigurationError(f"alpha grids given for families not in the sweep: {sorted(extra)}")
        for f in self.families:
            if not self.grid(f):
                raise ConfigurationError(f"alpha grid for {f} is empty")
        if not self.seeds:
            raise ConfigurationError("seeds must be non-empty")
        if int(self.jobs) < 1:
            raise ConfigurationError("jobs must be >= 1")
        if builtin_name(self.dataset) is None:
            if self.schema is None:
                raise ConfigurationError(f"dataset {self.dataset!r} is not built in; a schema path is required")
            if self.architecture is None:
                raise ConfigurationError("a CSV dataset needs 'architecture' (a key of the architecture table)")
        if self.arch_key not in TABLE:
            raise ConfigurationError(f"unknown architecture {self.arch_key!r}; expected one of {sorted(TABLE)}")
        known = {f.name for f in dataclasses.fields(TrainConfig)}
        bad = set(self.overrides) - known
        if bad:
            raise ConfigurationError(f"unknown override keys: {sorted(bad)}")
        if {"family", "alpha", "seed"} & set(self.overrides):
            raise ConfigurationError("family, alpha and seed are set by the sweep, not by overrides")

    @property
    def arch_key(self) -> str:
        return self.architecture or builtin_name(self.dataset) or self.dataset

    def grid(self, family: str) -> tuple:
        if family in self.alphas:
            return self.alphas[family]
        return BASELINE_GRID if family == REWEIGHING else ALPHA_GRID

    def configs(self) -> list[TrainConfig]:
        return [TrainConfig.for_dataset(self.arch_key, fam, a, seed, **self.overrides)
                for fam in self.families for a in self.grid(fam) for seed in self.seeds]

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["families"] = list(self.families)
        d["seeds"] = list(self.seeds)
        d["alphas"] = {k: list(v) for k, v in self.alphas.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown sweep config keys: {sorted(unknown)}")
        if "dataset" not in d:
            raise ConfigurationError("sweep config needs 'dataset'")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "SweepSpec":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigurationError("config JSON must be an object")
        return cls.from_dict(d)


# -- datasets ------------------------------------------------------------------

def builtin_name(dataset: str) -> str | None:
    """The built-in dataset a name refers to (``synthetic@3`` -> ``synthetic``), else None."""
    base, _, seed = dataset.partition("@")
    if base not in BUILTIN_DATASETS or (seed and (base != "synthetic" or not seed.isdigit())):
        return None
    return base


def load_source(dataset: str, schema: str | None = None) -> TabularDataset:
    """Resolve a built-in fixture name or a CSV path + schema path to a dataset."""
    if dataset in ("german_sex", "german_age"):
        return fixtures.load_german(dataset.split("_")[1])
    if builtin_name(dataset) == "synthetic":
        return fixtures.make_synthetic(seed=int(dataset.partition("@")[2] or 0))
    if schema is None:
        raise ConfigurationError(f"dataset {dataset!r} needs a schema path")
    sch = load_schema(schema)
    return dummy_code(load_csv(dataset, sch), sch)


@functools.lru_cache(maxsize=4)
def load_splits(dataset: str, schema: str | None, split_seed: int) -> SplitSet:
    """Standardized splits; cached per process so sweep workers ingest once."""
    return prepare_splits(load_source(dataset, schema), split_seed)


def raw_rows(dataset: str, schema: str | None = None) -> dict[int, dict]:
    """Source rows keyed by dataset row id, for showing instances as they were ingested."""
    if dataset in ("german_sex", "german_age"):
        raw, _ = fixtures.german_raw(dataset.split("_")[1])
    elif builtin_name(dataset) == "synthetic":
        ds = load_source(dataset)
        return {int(r): {n: float(v) for n, v in zip(ds.feature_names, ds.X[i])} | {"y": ds.y[i], "s": ds.s[i]}
                for i, r in enumerate(ds.row_ids)}
    else:
        raw = load_csv(dataset, load_schema(schema))
    return {int(r): raw.row(i) for i, r in enumerate(raw.row_numbers)}


def splits_digest(splits: SplitSet) -> str:
    return hashlib.sha256("".join(d.digest() for d in splits).encode()).hexdigest()[:16]


def run_id(config: TrainConfig, splits: SplitSet) -> str:
    return hashlib.sha256(f"{config.digest()}:{splits_digest(splits)}".encode()).hexdigest()[:16]


# -- single runs ---------------------------------------------------------------

@dataclass
class RunArtifact:
    run_id: str
    manifest: dict
    log_csv: str
    reports: dict
    weights: list = field(default_factory=list)
    path: Path | None = None

    @property
    def config(self) -> TrainConfig:
        return TrainConfig.from_dict(self.manifest["config"])

    @property
    def validation(self) -> FairnessReport:
        return FairnessReport.from_dict(self.reports["validation"])

    @property
    def test(self) -> FairnessReport:
        return FairnessReport.from_dict(self.reports["test"])

    def point(self) -> ParetoPoint:
        c = self.manifest["config"]
        return ParetoPoint(c["family"], c["alpha"], c["seed"], self.validation, self.test, self.run_id)


def _weights_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=WEIGHT_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


def _read_weights(text: str) -> list[dict]:
    out = []
    for r in csv.DictReader(io.StringIO(text)):
        out.append({"index": int(r["index"]), "split": r["split"], "family": r["family"], "alpha": float(r["alpha"]),
                    "weight": float(r["weight"]), "logP_y": float(r["logP_y"]), "logP_s": float(r["logP_s"]),
                    "ratio": float(r["ratio"])})
    return out


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def execute(config: TrainConfig, splits: SplitSet, threshold: float = DEFAULT_THRESHOLD,
            extra: dict | None = None) -> RunArtifact:
    """Train and evaluate one configuration in memory."""
    result = train(config, splits)
    reports = {"validation": evaluate(result.model, splits.val, "validation", threshold).to_dict(),
               "test": evaluate(result.model, splits.test, "test", threshold).to_dict()}
    weights = []
    if result.model.is_fair:
        for name, ds in (("train", splits.train), ("validation", splits.val), ("test", splits.test)):
            for rec in instance_records(result.model, ds.X, ds.y, ds.s, index=ds.row_ids):
                weights.append({**rec.as_dict(), "split": name})
        weights.sort(key=lambda r: r["index"])
    rid = run_id(config, splits)
    manifest = run_manifest(config, splits, result.log, {"run_id": rid, "threshold": threshold, **(extra or {})})
    return RunArtifact(rid, manifest, result.log.to_csv(), reports, weights)


def write_run(artifact: RunArtifact, runs_dir) -> Path:
    """Write the artifact files; the manifest goes last so its presence marks completion."""
    d = Path(runs_dir) / artifact.run_id
    d.mkdir(parents=True, exist_ok=True)
    (d / "trainlog.csv").write_text(artifact.log_csv, encoding="utf-8")
    (d / "reports.json").write_text(_dump(artifact.reports), encoding="utf-8")
    if artifact.weights:
        (d / "weights.csv").write_text(_weights_csv(artifact.weights), encoding="utf-8")
    (d / "manifest.json").write_text(_dump(artifact.manifest), encoding="utf-8")
    artifact.path = d
    return d


def load_run(path) -> RunArtifact:
    d = Path(path)
    try:
        manifest = json.loads((d / "manifest.json").read_text(encoding="utf-8"))
        reports = json.loads((d / "reports.json").read_text(encoding="utf-8"))
        log_csv = (d / "trainlog.csv").read_text(encoding="utf-8")
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"incomplete run directory {d}: {exc}") from exc
    wpath = d / "weights.csv"
    weights = _read_weights(wpath.read_text(encoding="utf-8")) if wpath.exists() else []
    return RunArtifact(manifest["run_id"], manifest, log_csv, reports, weights, d)


def is_complete(path) -> bool:
    return (Path(path) / "manifest.json").exists()


def run_one(config: TrainConfig, dataset: str, schema: str | None, split_seed: int, out,
            threshold: float = DEFAULT_THRESHOLD) -> tuple[str, str]:
    """Train one configuration into ``out/runs``; returns ``(run_id, status)``.

    ``status`` is ``"cached"`` when a completed run with the same hash exists.
    """
    splits = load_splits(dataset, schema, split_seed)
    rid = run_id(config, splits)
    runs = Path(out) / "runs"
    if is_complete(runs / rid):
        return rid, "cached"
    artifact = execute(config, splits, threshold, {"dataset": dataset, "schema": schema})
    write_run(artifact, runs)
    return rid, "trained"


def _task(args):
    config, dataset, schema, split_seed, out, threshold = args
    try:
        rid, status = run_one(config, dataset, schema, split_seed, out, threshold)
        return {"run_id": rid, "status": status, "family": config.family, "alpha": config.alpha,
                "seed": config.seed}
    except Exception as exc:  # isolate failures per run; the summary reports them
        return {"run_id": None, "status": "failed", "family": config.family, "alpha": config.alpha,
                "seed": config.seed, "error": f"{type(exc).__name__}: {exc}",
                "traceback": traceback.format_exc()}


@dataclass
class SweepResult:
    out: Path
    runs: list[dict]
    fronts: dict

    @property
    def failures(self) -> list[dict]:
        return [r for r in self.runs if r["status"] == "failed"]

    def count(self, status: str) -> int:
        return sum(r["status"] == status for r in self.runs)


def sweep(spec: SweepSpec, progress=None) -> SweepResult:
    """Run every (family, grid value, seed) of ``spec`` then assemble fronts.

    Runs execute in a process pool of ``spec.jobs`` workers (in-process when
    1). A failing run is recorded in ``summary.json`` and does not stop the
    others.
    """
    out = Path(spec.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.json").write_text(_dump(spec.to_dict()), encoding="utf-8")
    load_splits(spec.dataset, spec.schema, spec.split_seed)  # fail fast on unreadable data
    tasks = [(c, spec.dataset, spec.schema, spec.split_seed, str(out), spec.threshold) for c in spec.configs()]
    results = []
    if spec.jobs == 1:
        for t in tasks:
            results.append(_task(t))
            if progress:
                progress(results[-1])
    else:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            for r in pool.map(_task, tasks):
                results.append(r)
                if progress:
                    progress(r)
    for r in results:
        if r["status"] == "failed":
            log.error("run %s alpha=%s seed=%s failed: %s", r["family"], r["alpha"], r["seed"], r["error"])
    ids = [r["run_id"] for r in results if r["run_id"]]
    fronts = assemble_fronts(out, run_ids=ids, failures=[r for r in results if r["status"] == "failed"])
    return SweepResult(out, results, fronts)


# -- fronts --------------------------------------------------------------------

POINT_COLUMNS = ("run_id", "model", "alpha", "seed", "mean_weight", "stop_reason", "best_epoch",
                 "val_AUC", "val_AUC_s", "val_ASD", "val_AEOD", "val_AOD",
                 "AUC", "AUC_s", "ASD", "AEOD", "AOD")


def _num(v):
    return "" if v is None else repr(float(v))


def _final_weight(artifact: RunArtifact) -> float | None:
    train_w = [r["weight"] for r in artifact.weights if r["split"] == "train"]
    return float(np.mean(train_w)) if train_w else None


def _median(values):
    vals = [v for v in values if v is not None]
    return float(np.median(vals)) if vals else None


def assemble_fronts(out, run_ids=None, failures=None) -> dict:
    """Reduce completed runs in ``out/runs`` to front, point and summary files.

    Selection uses validation reports only; emitted tables carry the test
    reports of the selected runs. Returns ``{metric: {family|"all": [ParetoPoint]}}``.
    """
    out = Path(out)
    runs_dir = out / "runs"
    if run_ids is None:
        run_ids = sorted(p.name for p in runs_dir.iterdir() if is_complete(p)) if runs_dir.exists() else []
    artifacts = [load_run(runs_dir / rid) for rid in sorted(set(run_ids))]
    artifacts.sort(key=lambda a: (a.manifest["config"]["family"], a.manifest["config"]["alpha"],
                                  a.manifest["config"]["seed"], a.run_id))
    points = [a.point() for a in artifacts]
    families = sorted({p.family for p in points})
    fronts = {}
    for metric in METRICS:
        d = out / "fronts" / metric
        d.mkdir(parents=True, exist_ok=True)
        fronts[metric] = {}
        for fam in families + ["all"]:
            pts = points if fam == "all" else [p for p in points if p.family == fam]
            front = pareto_front(_validation_only(pts), metric)
            front = [_with_test(p, points) for p in front]
            fronts[metric][fam] = front
            (d / f"{fam}.csv").write_text(front_to_csv(front), encoding="utf-8")
            (d / f"{fam}.json").write_text(front_to_json(front) + "\n", encoding="utf-8")

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(POINT_COLUMNS)
    medians = {}
    for a, p in zip(artifacts, points):
        v, t = p.validation, p.test
        mw = _final_weight(a)
        w.writerow([a.run_id, p.family, repr(float(p.alpha)), p.seed, _num(mw), a.manifest.get("stop_reason"),
                    a.manifest.get("best_epoch"), _num(v.auc_y), _num(v.auc_s), _num(v.asd), _num(v.aeod),
                    _num(v.aod), _num(t.auc_y), _num(t.auc_s), _num(t.asd), _num(t.aeod), _num(t.aod)])
        medians.setdefault((p.family, p.alpha), []).append((mw, t))
    (out / "points.csv").write_text(buf.getvalue(), encoding="utf-8")

    summary = {
        "n_completed": len(artifacts),
        "failures": [{k: r[k] for k in ("family", "alpha", "seed", "error")} for r in (failures or [])],
        "run_ids": [a.run_id for a in artifacts],
        "medians": [{"model": fam, "alpha": alpha, "n_seeds": len(rows),
                     "mean_weight": _median(m for m, _ in rows),
                     **{k: _median(getattr(t, k) for _, t in rows) for k in ("auc_y", "auc_s", "asd", "aeod", "aod")}}
                    for (fam, alpha), rows in sorted(medians.items())],
        "fronts": {m: {fam: [p.run_id for p in pts] for fam, pts in by.items()} for m, by in fronts.items()},
    }
    (out / "summary.json").write_text(_dump(summary), encoding="utf-8")
    return fronts


def _validation_only(points: list[ParetoPoint]) -> list[ParetoPoint]:
    """Copies without test reports, so selection cannot depend on them."""
    return [dataclasses.replace(p, test=None) for p in points]


def _with_test(selected: ParetoPoint, points: list[ParetoPoint]) -> ParetoPoint:
    return next(p for p in points if p.run_id == selected.run_id)


# -- instance-weight export -----------------------------------------------------

def export_weights(runs, top_k: int = 10, rows: dict | None = None) -> dict:
    """Interpretability report over runs of one FAIR family (typically one seed, several alphas).

    * ``records``: per run, the ``top_k`` highest- and lowest-weight instances;
    * ``first_fair``: scanning alphas upward, the first run in which some
      instance's weight exceeds 0.99, with those instances (and their source
      rows when ``rows`` maps row ids to raw rows);
    * ``suspects``: instances whose weight is below 0.01 at the largest alpha.

    Weights are taken over all splits.
    """
    arts = [r if isinstance(r, RunArtifact) else load_run(r) for r in runs]
    if not arts:
        raise ConfigurationError("export_weights needs at least one run")
    families = {a.manifest["config"]["family"] for a in arts}
    for fam in families:
        if fam not in FAIR_FAMILIES:
            raise UnsupportedOperationError(f"instance-weight export needs a FAIR-family run, got {fam}")
    if len(families) > 1:
        raise ConfigurationError(f"runs mix families {sorted(families)}")
    arts.sort(key=lambda a: (a.manifest["config"]["alpha"], a.manifest["config"]["seed"]))

    def with_row(r):
        return {**r, "row": rows.get(r["index"])} if rows is not None else dict(r)

    per_run = []
    first = None
    for a in arts:
        recs = sorted(a.weights, key=lambda r: (-r["weight"], r["index"]))
        above = [r for r in recs if r["weight"] > FAIR_THRESHOLD]
        per_run.append({"run_id": a.run_id, "alpha": a.manifest["config"]["alpha"], "seed": a.manifest["config"]["seed"],
                        "n_instances": len(recs), "n_above": len(above),
                        "frac_above": len(above) / len(recs) if recs else 0.0,
                        "mean_weight": float(np.mean([r["weight"] for r in recs])) if recs else None,
                        "top": [with_row(r) for r in recs[:top_k]],
                        "bottom": [with_row(r) for r in recs[::-1][:top_k]],
                        "message": (f"{len(above)} of {len(recs)} instances exceed {FAIR_THRESHOLD}" if above
                                    else f"no instance exceeds {FAIR_THRESHOLD}")})
        if first is None and above:
            first = {"run_id": a.run_id, "alpha": a.manifest["config"]["alpha"],
                     "instances": [with_row(r) for r in above[:top_k]], "n_above": len(above)}
    last = arts[-1]
    suspects = sorted((r for r in last.weights if r["weight"] < SUSPECT_THRESHOLD), key=lambda r: (r["weight"], r["index"]))
    return {"family": families.pop(), "runs": per_run, "first_fair": first,
            "suspects": {"run_id": last.run_id, "alpha": last.manifest["config"]["alpha"],
                         "instances": [with_row(r) for r in suspects]}}


def runs_for(out, family: str, seed: int | None = None) -> list[RunArtifact]:
    """Completed runs of ``family`` (optionally one seed) under a sweep directory."""
    runs_dir = Path(out) / "runs"
    arts = [load_run(p) for p in sorted(runs_dir.iterdir()) if is_complete(p)] if runs_dir.exists() else []
    return [a for a in arts if a.manifest["config"]["family"] == family
            and (seed is None or a.manifest["config"]["seed"] == seed)]
