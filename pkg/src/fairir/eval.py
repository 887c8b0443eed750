"""Performance and group-fairness metrics, reports, and Pareto fronts.

Group fairness compares the unprivileged group (``s = 0``) with the
privileged group (``s = 1``) on hard decisions ``score >= threshold``:

* ASD   absolute difference of positive-decision rates,
* AEOD  absolute difference of true-positive rates,
* AOD   mean of the absolute FPR and TPR differences.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import FormatError, UndefinedMetricError

METRICS = ("asd", "aeod", "aod")
DEFAULT_THRESHOLD = 0.5


def auc(scores, labels) -> float:
    """Area under the ROC curve as the Mann-Whitney statistic; ties count one half."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise FormatError("scores and labels differ in length")
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both classes present")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def _rate(mask_num, mask_den, name):
    den = int(mask_den.sum())
    if den == 0:
        raise UndefinedMetricError(f"{name} is undefined: empty denominator")
    return float((mask_num & mask_den).sum() / den)


def group_rates(pred, y, s) -> dict:
    pred, y, s = (np.asarray(v).astype(bool) for v in (pred, y, s))
    out = {}
    for g, tag in ((False, "0"), (True, "1")):
        grp = s == g
        out["ppr" + tag] = _rate(pred, grp, f"positive rate of group s={tag}")
        out["tpr" + tag] = _rate(pred, grp & y, f"TPR of group s={tag}")
        out["fpr" + tag] = _rate(pred, grp & ~y, f"FPR of group s={tag}")
    return out


def statistical_parity(pred, s) -> float:
    pred, s = np.asarray(pred).astype(bool), np.asarray(s).astype(bool)
    return abs(_rate(pred, ~s, "positive rate of group s=0") - _rate(pred, s, "positive rate of group s=1"))


def fairness_metrics(pred, y, s) -> tuple[float, float, float]:
    """``(asd, aeod, aod)`` for binary decisions."""
    r = group_rates(pred, y, s)
    asd = abs(r["ppr0"] - r["ppr1"])
    d_tpr = abs(r["tpr0"] - r["tpr1"])
    d_fpr = abs(r["fpr0"] - r["fpr1"])
    return asd, d_tpr, 0.5 * (d_fpr + d_tpr)


@dataclass
class FairnessReport:
    auc_y: float | None
    auc_s: float | None
    asd: float | None
    aeod: float | None
    aod: float | None
    split: str = "validation"
    threshold: float = DEFAULT_THRESHOLD
    undefined: dict = field(default_factory=dict)

    def get(self, name: str):
        return getattr(self, name)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FairnessReport":
        return cls(**d)


def _safe(fn, *args):
    try:
        return fn(*args), None
    except UndefinedMetricError as e:
        return None, str(e)


def report_from_scores(p_y, y, s, p_s=None, split: str = "validation",
                       threshold: float = DEFAULT_THRESHOLD) -> FairnessReport:
    """Build a report from predictor (and optionally adversary) scores.

    Undefined quantities are stored as ``None`` with the reason in ``undefined``.
    """
    y, s = np.asarray(y), np.asarray(s)
    undefined = {}
    auc_y, why = _safe(auc, p_y, y)
    if why:
        undefined["auc_y"] = why
    auc_s = None
    if p_s is None:
        undefined["auc_s"] = "model has no sensitive-attribute scorer"
    else:
        auc_s, why = _safe(auc, p_s, s)
        if why:
            undefined["auc_s"] = why
    pred = np.asarray(p_y) >= threshold
    asd, why = _safe(statistical_parity, pred, s)
    if why:
        undefined["asd"] = why
    try:
        _, aeod, aod = fairness_metrics(pred, y, s)
    except UndefinedMetricError as e:
        aeod = aod = None
        undefined["aeod"] = undefined["aod"] = str(e)
    return FairnessReport(auc_y, auc_s, asd, aeod, aod, split, threshold, undefined)


def evaluate(model, dataset, split: str = "validation", threshold: float = DEFAULT_THRESHOLD) -> FairnessReport:
    """Score a trained model on one split.

    ``model`` needs ``predictor_scores(X)`` and ``sensitive_scores(X)`` (the
    latter may return ``None``).
    """
    p_y = model.predictor_scores(dataset.X)
    p_s = model.sensitive_scores(dataset.X)
    return report_from_scores(p_y, dataset.y, dataset.s, p_s, split, threshold)


# -- Pareto fronts -------------------------------------------------------------

@dataclass
class ParetoPoint:
    family: str
    alpha: float
    seed: int
    validation: FairnessReport
    test: FairnessReport | None = None
    run_id: str = ""

    def to_dict(self) -> dict:
        return {"family": self.family, "alpha": self.alpha, "seed": self.seed, "run_id": self.run_id,
                "validation": self.validation.to_dict(),
                "test": None if self.test is None else self.test.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "ParetoPoint":
        return cls(d["family"], d["alpha"], d["seed"], FairnessReport.from_dict(d["validation"]),
                   None if d.get("test") is None else FairnessReport.from_dict(d["test"]), d.get("run_id", ""))


def dominates(q: tuple[float, float], p: tuple[float, float]) -> bool:
    """``q`` dominates ``p`` for (auc, unfairness): no worse in both, better in one."""
    return q[0] >= p[0] and q[1] <= p[1] and (q[0] > p[0] or q[1] < p[1])


def front_mask(auc_values, unfairness) -> np.ndarray:
    """Boolean mask of non-dominated points (higher AUC, lower unfairness), ``O(n log n)``."""
    a = np.asarray(auc_values, dtype=np.float64)
    u = np.asarray(unfairness, dtype=np.float64)
    order = np.lexsort((u, -a))  # by AUC descending, then unfairness ascending
    keep = np.zeros(len(a), dtype=bool)
    best_u = np.inf
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and a[order[j + 1]] == a[order[i]]:
            j += 1
        group = order[i:j + 1]
        u_min = u[group[0]]
        if u_min < best_u:
            keep[group[u[group] == u_min]] = True
            best_u = u_min
        i = j + 1
    return keep


def pareto_front(points: list[ParetoPoint], metric: str = "asd") -> list[ParetoPoint]:
    """Non-dominated points judged on validation AUC_y and ``metric``.

    Points with identical validation coordinates collapse to the one with the
    lowest seed. Points lacking either value are excluded. Test reports are
    never consulted.
    """
    if metric not in METRICS:
        raise FormatError(f"unknown unfairness metric {metric!r}")
    usable = [p for p in points if p.validation.auc_y is not None and p.validation.get(metric) is not None]
    if not usable:
        return []
    a = [p.validation.auc_y for p in usable]
    u = [p.validation.get(metric) for p in usable]
    mask = front_mask(a, u)
    chosen: dict[tuple, ParetoPoint] = {}
    for p, k in zip(usable, mask):
        if k:
            key = (p.validation.auc_y, p.validation.get(metric))
            if key not in chosen or (p.seed, p.family, p.alpha) < (chosen[key].seed, chosen[key].family,
                                                                     chosen[key].alpha):
                chosen[key] = p
    return sorted(chosen.values(), key=lambda p: (-p.validation.auc_y, p.validation.get(metric)))


FRONT_COLUMNS = ("model", "alpha", "seed", "run_id", "AUC", "AOD", "ASD", "AEOD",
                 "val_AUC", "val_AOD", "val_ASD", "val_AEOD", "AUC_s")


def _fmt(v):
    return "" if v is None else repr(float(v))


def front_to_csv(points: list[ParetoPoint]) -> str:
    """Table layout: model, test AUC/AOD/ASD/AEOD, then the validation values used for selection."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FRONT_COLUMNS)
    for p in points:
        t = p.test
        v = p.validation
        w.writerow([p.family, repr(float(p.alpha)), p.seed, p.run_id,
                    _fmt(t and t.auc_y), _fmt(t and t.aod), _fmt(t and t.asd), _fmt(t and t.aeod),
                    _fmt(v.auc_y), _fmt(v.aod), _fmt(v.asd), _fmt(v.aeod), _fmt(t and t.auc_s)])
    return buf.getvalue()


def front_from_csv(text: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    if rows and set(FRONT_COLUMNS) - set(rows[0]):
        raise FormatError(f"front CSV is missing columns {sorted(set(FRONT_COLUMNS) - set(rows[0]))}")
    if not rows:
        header = text.splitlines()[0].split(",") if text.strip() else []
        if set(FRONT_COLUMNS) - set(header):
            raise FormatError(f"front CSV is missing columns {sorted(set(FRONT_COLUMNS) - set(header))}")
    return rows


def front_to_json(points: list[ParetoPoint]) -> str:
    return json.dumps([p.to_dict() for p in points], indent=2, sort_keys=True)
