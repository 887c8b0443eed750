import csv
import json

import pytest

from fairir import sweep as sw
from fairir.errors import ConfigurationError, UnsupportedOperationError
from fairir.sweep import (ALPHA_GRID, BASELINE_GRID, RunArtifact, SweepSpec, assemble_fronts, builtin_name,
                          export_weights, load_run, raw_rows, run_one, runs_for)
from fairir.train import TrainConfig

TINY = {"max_epochs": 3, "patience": 2}


def tiny_spec(tmp_path, **kw):
    d = dict(dataset="synthetic", families=("FAIR_scalar",), alphas={"FAIR_scalar": (0.0, 1.0)}, seeds=(0, 1),
             out=str(tmp_path / "out"), overrides=TINY)
    d.update(kw)
    return SweepSpec(**d)


# -- spec -----------------------------------------------------------------------

def test_default_grids_and_cardinality():
    spec = SweepSpec(dataset="german_sex", families=("FAIR_scalar", "FAD", "Reweighing_NN"))
    assert spec.grid("FAIR_scalar") == ALPHA_GRID == (0, 1e-3, 1e-2, 1e-1, 1, 10, 1e2, 1e3)
    assert spec.grid("Reweighing_NN") == BASELINE_GRID == (0, 1e-3, 1e-2, 1e-1, 1)
    assert len(spec.configs()) == (8 + 8 + 5) * 5
    assert len({c.digest() for c in spec.configs()}) == len(spec.configs())


@pytest.mark.parametrize("bad", [
    dict(families=()), dict(families=("nope",)), dict(alphas={"FAD": (1.0,)}), dict(alphas={"FAIR_scalar": ()}),
    dict(seeds=()), dict(jobs=0), dict(dataset="data.csv"), dict(dataset="data.csv", schema="s.json"),
    dict(overrides={"momentum": 0.9}), dict(overrides={"alpha": 2.0}), dict(architecture="mnist"),
])
def test_invalid_specs(bad):
    with pytest.raises(ConfigurationError):
        SweepSpec(**{"dataset": "german_sex", **bad})


def test_spec_unknown_keys_rejected_and_roundtrip(tmp_path):
    with pytest.raises(ConfigurationError, match="unknown"):
        SweepSpec.from_dict({"dataset": "german_sex", "epochs": 3})
    with pytest.raises(ConfigurationError, match="dataset"):
        SweepSpec.from_dict({"families": ["FAD"]})
    spec = tiny_spec(tmp_path)
    p = tmp_path / "spec.json"
    p.write_text(json.dumps(spec.to_dict()))
    assert SweepSpec.from_json(p) == spec


@pytest.mark.parametrize("name,base", [("german_sex", "german_sex"), ("synthetic@3", "synthetic"),
                                       ("synthetic@x", None), ("german_sex@1", None), ("my.csv", None)])
def test_builtin_name(name, base):
    assert builtin_name(name) == base


# -- sweeps ---------------------------------------------------------------------

def test_sweep_writes_runs_and_fronts_and_resumes(tmp_path):
    spec = tiny_spec(tmp_path)
    res = sw.sweep(spec)
    assert res.count("trained") == 4 and not res.failures
    out = tmp_path / "out"
    for metric in ("asd", "aeod", "aod"):
        for name in ("FAIR_scalar", "all"):
            assert (out / "fronts" / metric / f"{name}.csv").exists()
            assert (out / "fronts" / metric / f"{name}.json").exists()
    for r in res.runs:
        d = out / "runs" / r["run_id"]
        assert {p.name for p in d.iterdir()} == {"manifest.json", "trainlog.csv", "reports.json", "weights.csv"}
    again = sw.sweep(spec)
    assert again.count("cached") == 4 and again.count("trained") == 0


def test_every_published_run_traces_to_a_manifest(tmp_path):
    res = sw.sweep(tiny_spec(tmp_path))
    out = tmp_path / "out"
    listed = set()
    for path in (out / "fronts").rglob("*.csv"):
        listed |= {row["run_id"] for row in csv.DictReader(path.open())}
    listed |= {row["run_id"] for row in csv.DictReader((out / "points.csv").open())}
    assert listed
    for rid in listed:
        assert json.loads((out / "runs" / rid / "manifest.json").read_text())["run_id"] == rid


def test_front_selection_does_not_read_test_reports(tmp_path):
    sw.sweep(tiny_spec(tmp_path))
    out = tmp_path / "out"
    before = json.loads((out / "summary.json").read_text())["fronts"]
    for rep in (out / "runs").glob("*/reports.json"):
        d = json.loads(rep.read_text())
        d["test"].update(auc_y=0.0, asd=1.0, aeod=1.0, aod=1.0)
        rep.write_text(json.dumps(d))
    assemble_fronts(out)
    assert json.loads((out / "summary.json").read_text())["fronts"] == before


def test_failures_are_isolated(tmp_path, monkeypatch):
    real = sw.execute

    def flaky(config, *a, **k):
        if config.alpha == 1.0 and config.seed == 1:
            raise RuntimeError("boom")
        return real(config, *a, **k)

    monkeypatch.setattr(sw, "execute", flaky)
    res = sw.sweep(tiny_spec(tmp_path))
    assert res.count("trained") == 3
    assert [(f["alpha"], f["seed"]) for f in res.failures] == [(1.0, 1)]
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["n_completed"] == 3 and "boom" in summary["failures"][0]["error"]


def test_incomplete_run_is_retrained(tmp_path):
    spec = tiny_spec(tmp_path, seeds=(0,), alphas={"FAIR_scalar": (1.0,)})
    config = spec.configs()[0]
    rid, status = run_one(config, "synthetic", None, 0, spec.out)
    assert status == "trained"
    (tmp_path / "out" / "runs" / rid / "manifest.json").unlink()
    assert run_one(config, "synthetic", None, 0, spec.out) == (rid, "trained")
    assert run_one(config, "synthetic", None, 0, spec.out) == (rid, "cached")


def test_parallel_sweep_matches_serial(tmp_path):
    a = sw.sweep(tiny_spec(tmp_path / "a"))
    b = sw.sweep(tiny_spec(tmp_path / "b", jobs=2))
    assert [r["run_id"] for r in a.runs] == [r["run_id"] for r in b.runs]
    for r in a.runs:
        la = (tmp_path / "a" / "out" / "runs" / r["run_id"] / "trainlog.csv").read_text()
        lb = (tmp_path / "b" / "out" / "runs" / r["run_id"] / "trainlog.csv").read_text()
        assert la == lb


def test_load_run_roundtrip(tmp_path):
    res = sw.sweep(tiny_spec(tmp_path, seeds=(0,), alphas={"FAIR_scalar": (1.0,)}))
    art = load_run(tmp_path / "out" / "runs" / res.runs[0]["run_id"])
    assert art.config == TrainConfig.from_dict(art.manifest["config"])
    assert len(art.weights) == 300 * 0 + 1000
    assert {r["split"] for r in art.weights} == {"train", "validation", "test"}
    assert [r["index"] for r in art.weights] == sorted(r["index"] for r in art.weights)


# -- weight export --------------------------------------------------------------

def artifact(alpha, weights, family="FAIR_scalar", seed=0):
    recs = [{"index": i, "split": "train", "family": family, "alpha": alpha, "weight": w, "logP_y": -0.5,
             "logP_s": -0.6, "ratio": 0.5 / 0.6} for i, w in enumerate(weights)]
    return RunArtifact(f"r{alpha}", {"config": {"family": family, "alpha": alpha, "seed": seed}}, "", {}, recs)


def test_export_weights_report():
    runs = [artifact(1e3, [0.999, 0.995, 0.005, 0.5]), artifact(0.0, [0.2, 0.1, 0.3, 0.05]),
            artifact(1.0, [0.2, 0.995, 0.3, 0.05])]
    rep = export_weights(runs, top_k=2, rows={1: {"age": "33"}})
    assert [r["alpha"] for r in rep["runs"]] == [0.0, 1.0, 1e3]
    assert rep["runs"][0]["message"] == "no instance exceeds 0.99"
    assert rep["runs"][2]["n_above"] == 2 and rep["runs"][2]["frac_above"] == 0.5
    assert rep["first_fair"]["alpha"] == 1.0
    assert [i["index"] for i in rep["first_fair"]["instances"]] == [1]
    assert rep["first_fair"]["instances"][0]["row"] == {"age": "33"}
    assert [i["index"] for i in rep["suspects"]["instances"]] == [2]
    assert [r["index"] for r in rep["runs"][1]["top"]] == [1, 2]
    assert [r["index"] for r in rep["runs"][1]["bottom"]] == [3, 0]


def test_export_weights_rejects_non_fair_runs():
    with pytest.raises(UnsupportedOperationError):
        export_weights([artifact(1.0, [], family="FAD")])
    with pytest.raises(UnsupportedOperationError):
        export_weights([artifact(1.0, [], family="Reweighing_NN")])
    with pytest.raises(ConfigurationError):
        export_weights([])


def test_runs_for_filters(tmp_path):
    sw.sweep(tiny_spec(tmp_path))
    out = tmp_path / "out"
    assert len(runs_for(out, "FAIR_scalar")) == 4
    assert len(runs_for(out, "FAIR_scalar", seed=1)) == 2
    assert runs_for(out, "FAD") == []


def test_raw_rows_for_builtins():
    rows = raw_rows("german_sex")
    assert len(rows) == 1000 and rows[1]["credit"] == "good"
    syn = raw_rows("synthetic@2")
    assert len(syn) == 1000 and set(syn[0]) >= {"segment", "proxy", "y", "s"}
