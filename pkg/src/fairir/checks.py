"""Acceptance suite: gradient, estimator, metric, front, training and determinism checks.

Each ``check_*`` function runs one criterion end to end and returns a
:class:`CheckResult` carrying the measured values next to the threshold it
was judged against. The training checks run through the sweep harness and
can reuse a working directory, so a repeated ``fairir check`` resumes
completed runs instead of retraining.
"""
from __future__ import annotations

import itertools
import json
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dist
from .architectures import all_architectures
from .eval import auc, dominates, fairness_metrics, front_mask, pareto_front, ParetoPoint, FairnessReport
from .models import BASELINE_FAMILIES, build_model, weight_head_estimate
from .nncore import Network, grad_check, stack_layers
from .plots import alpha_curve, front_scatter
from .sweep import SweepSpec, execute, load_run, load_splits, sweep
from .train import REWEIGHING, TrainConfig

GRAD_TOL = 1e-5
N_TOY = 100_000
SE_BAND = 3.0
ENDPOINT_BAND = (0.1, 0.9)
THEOREM_EPOCHS = 2500


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    summary: str
    values: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return (f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number}: {self.name} -- "
                f"{self.summary} ({self.seconds:.1f}s)")

    def to_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": self.passed, "summary": self.summary,
                "values": self.values, "seconds": self.seconds}


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# -- 1. gradient exactness -------------------------------------------------------

KINK_MARGIN = 1e-3


def fd_unreliable(net, X, margin: float = KINK_MARGIN) -> bool:
    """True when a ReLU input lies within ``margin`` of its kink.

    The loss is not differentiable within such a step, so central differences
    are no oracle there.
    """
    _, cache = net.forward(X, train=True, update_stats=False)
    return any(spec.activation == "relu" and np.min(np.abs(e["u"])) < margin
               for spec, e in zip(net.layers, cache.layers))


def _networks(family, n_in, arch, seed):
    if family == REWEIGHING:
        return {"phi": Network(stack_layers(n_in, arch.head(arch.phi), batch_norm=arch.batch_norm),
                               dist.make_rng(seed, 12))}
    model = build_model(family, n_in, arch, 1.0, seed, baseline=family in BASELINE_FAMILIES)
    return model.networks()


def _valid_draw(family, n_in, arch, name, start, rng, batch, tries=20):
    """First (network, X) with a usable finite-difference oracle, trying seeds ``start``, ``start + 1000``, ..."""
    rejected = 0
    for attempt in itertools.count():
        net = _networks(family, n_in, arch, start + 1000 * attempt)[name]
        for _ in range(tries):
            X = rng.standard_normal((batch, net.n_in))
            if not fd_unreliable(net, X):
                return net, X, rejected
            rejected += 1


@_timed
def check_gradients(n_instances: int = 20, batch: int = 6, n_probe: int = 6, seed: int = 0) -> CheckResult:
    """Backprop vs central differences (h = 1e-5) for every network of every table architecture.

    The relative error is taken over each network's full probed gradient
    vector. Draws near ReLU kinks (see :func:`fd_unreliable`) are redrawn and
    counted.
    """
    rng = np.random.default_rng(seed)
    worst, worst_at, n_checked, n_rejected = 0.0, None, 0, 0
    for ds, fam, n_in, arch in all_architectures():
        for k in range(n_instances):
            for name in _networks(fam, n_in, arch, k):
                net, X, rejected = _valid_draw(fam, n_in, arch, name, k, rng, batch)
                n_rejected += rejected
                c1 = rng.standard_normal((batch, net.n_out))
                c2 = rng.standard_normal((batch, net.n_out))

                def loss(out, c1=c1, c2=c2):
                    return float(np.sum(c1 * out + 0.5 * c2 * out ** 2)), c1 + c2 * out

                err = grad_check(net, loss, X, h=1e-5, n_probe=n_probe, rng=rng, reduce="network")
                n_checked += 1
                if err > worst:
                    worst, worst_at = err, f"{ds}/{fam}/{name}#{k}"
    return CheckResult(1, "gradient exactness", worst < GRAD_TOL,
                       f"max relative error {worst:.2e} < {GRAD_TOL:g} over {n_checked} networks (worst {worst_at}; "
                       f"{n_rejected} draws redrawn near ReLU kinks)",
                       {"max_rel_error": worst, "worst": worst_at, "n_networks": n_checked,
                        "n_redrawn": n_rejected})


# -- 2. estimator correctness ----------------------------------------------------

def _mean_se(x):
    x = np.asarray(x, dtype=np.float64)
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(len(x)))


def toy_estimates(kind: str, n: int = N_TOY, c: float = 2.0, p: float = 0.3, a: float = 1.5, baseline=0.0,
                  seed: int = 0) -> np.ndarray:
    """Per-draw gradient estimates on the toy objectives.

    ``bernoulli``: d/dp E_{w~B(p)}[w c] (exact: c). ``beta_sf`` / ``beta_rep``:
    d/da E_{w~Beta(a,1)}[w c] (exact: c / (a+1)^2).
    """
    rng = dist.make_rng(seed, 41)
    bracket = np.full(n, c)
    if kind == "bernoulli":
        out = np.full((n, 1), p)
    else:
        out = np.column_stack([np.full(n, a), np.ones(n)])
    d_out, _, bad = weight_head_estimate(kind, out, bracket, baseline, rng)
    if bad.any():
        raise ArithmeticError(f"{int(bad.sum())} toy draws were skipped")
    return d_out[:, 0]


@_timed
def check_estimators(n: int = N_TOY, c: float = 2.0, p: float = 0.3, a: float = 1.5, seed: int = 0) -> CheckResult:
    exact = {"bernoulli": c, "beta_sf": c / (a + 1) ** 2, "beta_rep": c / (a + 1) ** 2}
    values, ok = {}, True
    for kind, target in exact.items():
        m, se = _mean_se(toy_estimates(kind, n, c, p, a, seed=seed))
        z = abs(m - target) / se
        values[kind] = {"mean": m, "se": se, "exact": target, "z": z}
        ok &= z < SE_BAND
    summ = ", ".join(f"{k} {v['mean']:.4f} vs {v['exact']:.4f} ({v['z']:.2f} SE)" for k, v in values.items())
    return CheckResult(2, "estimator correctness", ok, f"{summ}; all < {SE_BAND:g} SE at n={n}", values)


# -- 3. baseline variance reduction ---------------------------------------------

@_timed
def check_baseline(n: int = N_TOY, c: float = 2.0, p: float = 0.3, a: float = 1.5, seed: int = 0) -> CheckResult:
    """Score-function variance with the baseline set to the exact mean of ``w * bracket``."""
    exact_mean = {"bernoulli": p * c, "beta_sf": c * a / (a + 1)}
    values, ok = {}, True
    for kind, b in exact_mean.items():
        plain = toy_estimates(kind, n, c, p, a, 0.0, seed)
        based = toy_estimates(kind, n, c, p, a, b, seed + 1)
        m0, se0 = _mean_se(plain)
        m1, se1 = _mean_se(based)
        reduction = 1.0 - based.var(ddof=1) / plain.var(ddof=1)
        shift = abs(m1 - m0) / np.hypot(se0, se1)
        values[kind] = {"variance_reduction": float(reduction), "mean_shift_se": float(shift),
                        "mean_plain": m0, "mean_baseline": m1}
        # the 30% band applies to the Bernoulli estimator the baseline network is
        # designed for; for Beta-SF the mean is not the variance-optimal
        # baseline, so a strict decrease is required there
        ok &= (reduction >= 0.30 if kind == "bernoulli" else reduction > 0) and shift < SE_BAND
    band = {"bernoulli": ">=30%", "beta_sf": ">0%"}
    summ = ", ".join(f"{k} variance -{100 * v['variance_reduction']:.0f}% ({band[k]}), mean shift "
                     f"{v['mean_shift_se']:.2f} SE (<3)" for k, v in values.items())
    return CheckResult(3, "baseline variance reduction", ok, summ, values)


# -- 4. theorem suite ------------------------------------------------------------

def _workdir(workdir, name):
    if workdir is None:
        return tempfile.TemporaryDirectory(prefix=f"fairir-{name}-")
    p = Path(workdir) / name
    p.mkdir(parents=True, exist_ok=True)

    class _Keep:
        def __enter__(self):
            return str(p)

        def __exit__(self, *exc):
            return False
    return _Keep()


def _runs(result):
    return [load_run(result.out / "runs" / r["run_id"]) for r in result.runs if r["run_id"]]


def _train_weights(artifact) -> np.ndarray:
    return np.array([r["weight"] for r in artifact.weights if r["split"] == "train"])


@_timed
def check_theorems(seeds=(0, 1, 2, 3, 4), epochs: int = THEOREM_EPOCHS, workdir=None, jobs: int = 1) -> CheckResult:
    """FAIR-scalar weight endpoints and monotone trend on German-sex, fixed training budget."""
    with _workdir(workdir, "theorems") as out:
        spec = SweepSpec(dataset="german_sex", families=("FAIR_scalar",), seeds=seeds, out=out, jobs=jobs,
                         overrides={"max_epochs": epochs, "patience": epochs, "restore_best": False})
        res = sweep(spec)
        arts = _runs(res)
    grid = spec.grid("FAIR_scalar")
    by_alpha = {a: [x for x in arts if x.manifest["config"]["alpha"] == a] for a in grid}
    med = {a: float(np.median([_train_weights(x).mean() for x in v])) if v else float("nan")
           for a, v in by_alpha.items()}
    lo, hi = ENDPOINT_BAND
    endpoint = [float(np.mean((w <= lo) | (w >= hi))) for w in map(_train_weights, by_alpha.get(1.0, []))]
    end_med = float(np.median(endpoint)) if endpoint else float("nan")
    ms = [med[a] for a in grid]
    monotone = all(np.isfinite(ms)) and all(x <= y for x, y in zip(ms, ms[1:]))
    parts = {"alpha0": med[grid[0]] < 0.05, "alpha_max": med[grid[-1]] > 0.95, "monotone": monotone,
             "endpoints": end_med >= 0.90, "no_failures": not res.failures}
    summ = (f"median mean weight alpha=0 {med[grid[0]]:.4f} (<0.05), alpha=1e3 {med[grid[-1]]:.4f} (>0.95), "
            f"non-decreasing over grid {monotone} [{', '.join(f'{m:.3f}' for m in ms)}], "
            f"alpha=1 endpoint fraction {end_med:.3f} (>=0.90)")
    if res.failures:
        summ += f"; {len(res.failures)} failed runs"
    return CheckResult(4, "theorem suite", all(parts.values()), summ,
                       {"median_mean_weight": {repr(a): m for a, m in med.items()}, "endpoint_fractions": endpoint,
                        "parts": parts, "epochs": epochs})


# -- 5. metric oracles -----------------------------------------------------------

def _count_metrics(pred, y, s):
    """Direct-counting oracle for (asd, aeod, aod)."""
    def rate(cond_num, cond_den):
        den = sum(1 for i in range(len(y)) if cond_den(i))
        return sum(1 for i in range(len(y)) if cond_den(i) and cond_num(i)) / den
    r = {}
    for g in (0, 1):
        r[f"ppr{g}"] = rate(lambda i: pred[i] == 1, lambda i, g=g: s[i] == g)
        r[f"tpr{g}"] = rate(lambda i: pred[i] == 1, lambda i, g=g: s[i] == g and y[i] == 1)
        r[f"fpr{g}"] = rate(lambda i: pred[i] == 1, lambda i, g=g: s[i] == g and y[i] == 0)
    tpr = abs(r["tpr0"] - r["tpr1"])
    return abs(r["ppr0"] - r["ppr1"]), tpr, 0.5 * (abs(r["fpr0"] - r["fpr1"]) + tpr)


def _pairwise_auc(scores, labels):
    pos = [x for x, l in zip(scores, labels) if l == 1]
    neg = [x for x, l in zip(scores, labels) if l == 0]
    total = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
    return total / (len(pos) * len(neg))


@_timed
def check_metrics(n_trials: int = 1000, seed: int = 0) -> CheckResult:
    y = [1, 1, 1, 1, 0, 0, 0, 0]
    s = [0, 0, 1, 1, 0, 0, 1, 1]
    pred = [1, 0, 1, 1, 0, 0, 1, 0]
    worked = fairness_metrics(pred, y, s) == (0.5, 0.5, 0.5) and _count_metrics(pred, y, s) == (0.5, 0.5, 0.5)
    rng = np.random.default_rng(seed)
    mismatches, auc_mismatch, done = 0, 0, 0
    while done < n_trials:
        n = int(rng.integers(4, 30))
        yy, ss, pp = (rng.integers(0, 2, n) for _ in range(3))
        if any(((ss == g) & (yy == v)).sum() == 0 for g in (0, 1) for v in (0, 1)):
            continue
        if fairness_metrics(pp, yy, ss) != _count_metrics(list(pp), list(yy), list(ss)):
            mismatches += 1
        done += 1
    for _ in range(n_trials):
        n = int(rng.integers(2, 40))
        labels = rng.integers(0, 2, n)
        labels[0], labels[1] = 0, 1
        scores = rng.integers(0, 8, n) / 8.0 if rng.random() < 0.5 else rng.random(n)
        if auc(scores, labels) != _pairwise_auc(list(scores), list(labels)):
            auc_mismatch += 1
    ok = worked and mismatches == 0 and auc_mismatch == 0
    return CheckResult(5, "metric oracles", ok,
                       f"8-row example exact {worked}; {mismatches}/{n_trials} fairness and {auc_mismatch}/{n_trials} "
                       f"AUC mismatches vs counting oracles (0 allowed)",
                       {"worked_example": worked, "fairness_mismatches": mismatches, "auc_mismatches": auc_mismatch})


# -- 6. Pareto oracle ------------------------------------------------------------

def brute_force_front(a, u) -> np.ndarray:
    pts = list(zip(a, u))
    return np.array([not any(dominates(q, p) for q in pts) for p in pts])


def _points(a, u, seeds):
    return [ParetoPoint("FAIR_scalar", 1.0, int(sd), FairnessReport(float(x), None, float(y), float(y), float(y)),
                        run_id=str(i)) for i, (x, y, sd) in enumerate(zip(a, u, seeds))]


@_timed
def check_pareto(n_sets: int = 50, n_points: int = 200, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    mask_bad = front_bad = idem_bad = 0
    for t in range(n_sets):
        # half the sets use a coarse grid so that ties and duplicates occur
        if t % 2:
            a, u = rng.integers(0, 15, n_points) / 15, rng.integers(0, 15, n_points) / 15
        else:
            a, u = rng.random(n_points), rng.random(n_points)
        brute = brute_force_front(a, u)
        mask_bad += not np.array_equal(front_mask(a, u), brute)
        pts = _points(a, u, rng.integers(0, 5, n_points))
        front = pareto_front(pts, "asd")
        expect = {(x, y) for x, y, k in zip(a, u, brute) if k}
        got = [(p.validation.auc_y, p.validation.asd) for p in front]
        lowest = all(p.seed == min(q.seed for q in pts if (q.validation.auc_y, q.validation.asd) == c)
                     for p, c in zip(front, got))
        front_bad += not (set(got) == expect and len(got) == len(expect) and lowest)
        again = pareto_front(front, "asd")
        idem_bad += [p.run_id for p in again] != [p.run_id for p in front]
    ok = mask_bad == front_bad == idem_bad == 0
    return CheckResult(6, "Pareto oracle", ok,
                       f"{n_sets} sets of {n_points}: {mask_bad} mask, {front_bad} front and {idem_bad} idempotence "
                       f"mismatches vs O(n^2) brute force (0 allowed)",
                       {"mask_mismatches": mask_bad, "front_mismatches": front_bad, "idempotence_failures": idem_bad})


# -- 7. desk-scale quality band ---------------------------------------------------

@_timed
def check_quality(seeds=(0, 1, 2, 3, 4), workdir=None, jobs: int = 1) -> CheckResult:
    """FAIR-scalar German-sex sweep: a validation-selected front point with good test AUC and ASD."""
    with _workdir(workdir, "quality") as out:
        res = sweep(SweepSpec(dataset="german_sex", families=("FAIR_scalar",), seeds=seeds, out=out, jobs=jobs))
        front = res.fronts["asd"]["FAIR_scalar"]
    good = [p for p in front if p.test.auc_y is not None and p.test.asd is not None
            and p.test.auc_y >= 0.70 and p.test.asd <= 0.12]
    listing = "; ".join(f"alpha={p.alpha:g} seed={p.seed} test AUC {p.test.auc_y:.3f} ASD {p.test.asd:.3f}"
                        for p in front)
    best = max(good, key=lambda p: p.test.auc_y) if good else None
    summ = (f"{len(good)} of {len(front)} front points with test AUC>=0.70 and ASD<=0.12"
            + (f", e.g. AUC {best.test.auc_y:.3f} ASD {best.test.asd:.3f}" if best else "") + f" [{listing}]")
    return CheckResult(7, "desk-scale quality band", bool(good), summ,
                       {"front": [p.to_dict() for p in front], "n_good": len(good), "failures": len(res.failures)})


# -- 8. planted bias -------------------------------------------------------------

def planted_rank(artifact, planted) -> float:
    """Median weight percentile (0 = lowest) of the planted rows among all rows of a run."""
    w = np.array([r["weight"] for r in artifact.weights])
    idx = np.array([r["index"] for r in artifact.weights])
    order = np.argsort(np.argsort(w, kind="stable"), kind="stable") / (len(w) - 1)
    pos = {int(i): k for k, i in enumerate(idx)}
    return float(np.median([order[pos[p]] for p in planted]))


@_timed
def check_planted_bias(seeds=(0, 1, 2, 3, 4), mid_alpha: float = 1.0, workdir=None, jobs: int = 1) -> CheckResult:
    """FAIR-Bernoulli on the synthetic fixture: intermediate alpha vs alpha = 1e3.

    Seed ``k`` fixes the fixture draw (``synthetic@k``), the split and the
    network initialization, so the five medians run over data draws as well
    as training randomness.
    """
    arts, failures, planted = [], [], {}
    with _workdir(workdir, "planted") as out:
        for seed in seeds:
            name = f"synthetic@{seed}"
            res = sweep(SweepSpec(dataset=name, families=("FAIR_Bernoulli",), seeds=(seed,), split_seed=seed,
                                  out=out, jobs=jobs, alphas={"FAIR_Bernoulli": (mid_alpha, 1e3)}))
            arts += _runs(res)
            failures += res.failures
            planted[seed] = load_splits(name, None, seed).train.provenance["planted"]

    def med(alpha, key):
        return float(np.median([getattr(x.test, key) for x in arts if x.manifest["config"]["alpha"] == alpha]))

    asd_mid, asd_hi = med(mid_alpha, "asd"), med(1e3, "asd")
    auc_mid, auc_hi = med(mid_alpha, "auc_y"), med(1e3, "auc_y")
    reduction = 1.0 - asd_mid / asd_hi if asd_hi > 0 else float("nan")
    ratio = auc_mid / auc_hi
    ranks = [planted_rank(x, planted[x.manifest["config"]["seed"]]) for x in arts
             if x.manifest["config"]["alpha"] == mid_alpha]
    ok = reduction >= 0.5 and ratio >= 0.85 and not failures
    return CheckResult(8, "fairness effect on planted bias", ok,
                       f"median test ASD {asd_mid:.3f} at alpha={mid_alpha:g} vs {asd_hi:.3f} at 1e3 "
                       f"(reduction {100 * reduction:.0f}%, >=50%); AUC_y ratio {ratio:.3f} (>=0.85); "
                       f"planted rows median weight percentile {np.median(ranks):.3f}",
                       {"asd": [asd_mid, asd_hi], "auc_y": [auc_mid, auc_hi], "reduction": reduction,
                        "auc_ratio": ratio, "planted_rank": ranks, "failures": len(failures)})


# -- 9. determinism --------------------------------------------------------------

def _fingerprint(artifact) -> dict:
    pt = artifact.point()
    row = {"model": pt.family, "run_id": artifact.run_id, "AUC": repr(pt.test.auc_y), "ASD": repr(pt.test.asd),
           "alpha": repr(pt.alpha), "AUC_s": repr(pt.test.auc_s)}
    svg_front, _ = front_scatter([row], "asd")
    svg_curve, _ = alpha_curve([row])
    return {"trainlog": artifact.log_csv, "reports": json.dumps(artifact.reports, sort_keys=True),
            "weights": json.dumps(artifact.weights), "svg_front": svg_front, "svg_curve": svg_curve}


@_timed
def check_determinism(family: str = "FAIR_scalar", alpha: float = 1.0, seed: int = 0) -> CheckResult:
    splits = load_splits("german_sex", None, 0)
    config = TrainConfig.for_dataset("german_sex", family, alpha, seed)
    a, b = (_fingerprint(execute(config, splits)) for _ in range(2))
    same = {k: a[k] == b[k] for k in a}
    return CheckResult(9, "determinism", all(same.values()),
                       "bitwise identical on rerun: " + ", ".join(f"{k} {v}" for k, v in same.items()), same)


CHECKS = {1: check_gradients, 2: check_estimators, 3: check_baseline, 4: check_theorems, 5: check_metrics,
          6: check_pareto, 7: check_quality, 8: check_planted_bias, 9: check_determinism}
TRAINING_CHECKS = (4, 7, 8)


def run_checks(numbers=None, workdir=None, jobs: int = 1, report=None) -> list[CheckResult]:
    """Run the selected criteria (all by default); ``report`` is called with each result as it finishes."""
    results = []
    for n in sorted(numbers or CHECKS):
        fn = CHECKS[n]
        kwargs = {"workdir": workdir, "jobs": jobs} if n in TRAINING_CHECKS else {}
        res = fn(**kwargs)
        results.append(res)
        if report:
            report(res)
    return results


__all__ = ["CHECKS", "CheckResult", "brute_force_front", "run_checks", "toy_estimates",
           *(f.__name__ for f in CHECKS.values())]
