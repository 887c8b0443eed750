import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fairir.errors import FormatError, UndefinedMetricError
from fairir.eval import (FRONT_COLUMNS, FairnessReport, ParetoPoint, auc, dominates, evaluate, fairness_metrics,
                         front_from_csv, front_to_csv, front_to_json, pareto_front, report_from_scores)


def pairwise_auc(scores, labels):
    pos = [a for a, l in zip(scores, labels) if l == 1]
    neg = [b for b, l in zip(scores, labels) if l == 0]
    return sum(1.0 if a > b else 0.5 if a == b else 0.0 for a in pos for b in neg) / (len(pos) * len(neg))


def count_rates(pred, y, s):
    def rate(num, den):
        return sum(1 for p, d in zip(num, den) if p and d) / sum(den)
    g0 = [v == 0 for v in s]
    g1 = [v == 1 for v in s]
    tpr = [rate(pred, [g and t == 1 for g, t in zip(g, y)]) for g in (g0, g1)]
    fpr = [rate(pred, [g and t == 0 for g, t in zip(g, y)]) for g in (g0, g1)]
    ppr = [rate(pred, g) for g in (g0, g1)]
    return abs(ppr[0] - ppr[1]), abs(tpr[0] - tpr[1]), 0.5 * (abs(fpr[0] - fpr[1]) + abs(tpr[0] - tpr[1]))


# -- AUC ------------------------------------------------------------------------

@pytest.mark.parametrize("scores,labels,expected", [
    ((0.9, 0.8, 0.2, 0.1), (1, 1, 0, 0), 1.0),
    ((0.1, 0.2, 0.3, 0.4), (0, 1, 0, 1), 0.75),
    ((0.5, 0.5, 0.5, 0.5), (0, 1, 0, 1), 0.5),
])
def test_auc_examples(scores, labels, expected):
    assert auc(scores, labels) == expected


def test_auc_single_class():
    with pytest.raises(UndefinedMetricError):
        auc([0.1, 0.2], [1, 1])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 1)), min_size=2, max_size=30))
def test_auc_equals_pairwise(pairs):
    scores = [p[0] / 6 for p in pairs]
    labels = [p[1] for p in pairs]
    if len(set(labels)) < 2:
        return
    assert auc(scores, labels) == pytest.approx(pairwise_auc(scores, labels), abs=1e-12)


def test_auc_invariant_under_monotone_transform(rng):
    scores = rng.normal(size=200)
    labels = (rng.random(200) < 0.4).astype(int)
    assert auc(scores, labels) == auc(np.exp(3 * scores) + 1, labels)


# -- group fairness -------------------------------------------------------------

def test_asd_direct():
    asd, _, _ = fairness_metrics([1, 1, 0, 0], [1, 0, 1, 0], [0, 0, 1, 1])
    assert asd == 1.0


def test_perfect_classifier_has_equal_odds():
    y = np.array([1, 0, 1, 0, 1, 1, 0, 0])
    s = np.array([0, 0, 0, 0, 1, 1, 1, 1])
    _, aeod, aod = fairness_metrics(y, y, s)
    assert aeod == 0 and aod == 0


def test_eight_row_example():
    y = [1, 1, 1, 1, 0, 0, 0, 0]
    s = [0, 0, 1, 1, 0, 0, 1, 1]
    pred = [1, 0, 1, 1, 0, 0, 1, 0]
    assert fairness_metrics(pred, y, s) == (0.5, 0.5, 0.5)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1), st.integers(0, 1)), min_size=4, max_size=40))
def test_metrics_equal_counting_oracle(rows):
    pred, y, s = (list(c) for c in zip(*rows))
    try:
        expected = count_rates(pred, y, s)
    except ZeroDivisionError:
        with pytest.raises(UndefinedMetricError):
            fairness_metrics(pred, y, s)
        return
    assert fairness_metrics(pred, y, s) == pytest.approx(expected, abs=1e-15)


def test_metrics_symmetric_in_group_labels(rng):
    y = rng.integers(0, 2, 100)
    s = rng.integers(0, 2, 100)
    pred = rng.integers(0, 2, 100)
    assert fairness_metrics(pred, y, s) == pytest.approx(fairness_metrics(pred, y, 1 - s))


def test_undefined_rate_named():
    with pytest.raises(UndefinedMetricError, match="TPR of group s=1"):
        fairness_metrics([1, 0, 1, 0], [1, 0, 0, 0], [0, 0, 1, 1])


def test_independent_predictions_have_small_asd(rng):
    n = 10_000
    s = rng.integers(0, 2, n)
    pred = rng.integers(0, 2, n)
    y = rng.integers(0, 2, n)
    assert fairness_metrics(pred, y, s)[0] < 0.02


# -- reports --------------------------------------------------------------------

class Oracle:
    def __init__(self, scores, sens=None):
        self.scores, self.sens = scores, sens

    def predictor_scores(self, X):
        return self.scores

    def sensitive_scores(self, X):
        return self.sens


class DS:
    def __init__(self, y, s):
        self.X, self.y, self.s = np.zeros((len(y), 1)), np.asarray(y, float), np.asarray(s, float)


def test_evaluate_ground_truth_oracle(rng):
    y = rng.integers(0, 2, 1000)
    s = rng.integers(0, 2, 1000)
    rep = evaluate(Oracle(y.astype(float), rng.random(1000)), DS(y, s), split="test")
    assert rep.auc_y == 1.0 and rep.split == "test"
    assert rep.asd == pytest.approx(abs(y[s == 0].mean() - y[s == 1].mean()))


def test_constant_predictor():
    y = [0, 1, 0, 1]
    s = [0, 0, 1, 1]
    rep = evaluate(Oracle(np.full(4, 0.5)), DS(y, s))
    assert rep.auc_y == 0.5 and rep.asd == 0.0
    assert rep.auc_s is None and "auc_s" in rep.undefined


def test_undefined_metrics_recorded_not_zero():
    rep = report_from_scores([0.2, 0.9, 0.4], [0, 1, 1], [0, 0, 0])
    assert rep.asd is None and rep.aeod is None and rep.aod is None
    assert set(rep.undefined) >= {"asd", "aeod", "aod"}
    assert rep.auc_y == 1.0


# -- Pareto fronts --------------------------------------------------------------

def point(a, u, seed=0, family="F", alpha=0.0, test=None):
    return ParetoPoint(family, alpha, seed, FairnessReport(a, None, u, u, u), test)


def brute_force(pts):
    return [p for p in pts if not any(dominates(q, p) for q in pts)]


def test_front_example():
    pts = [point(0.9, 0.2), point(0.8, 0.1), point(0.7, 0.3)]
    front = pareto_front(pts, "asd")
    assert [(p.validation.auc_y, p.validation.asd) for p in front] == [(0.9, 0.2), (0.8, 0.1)]


def test_single_point_front():
    p = point(0.6, 0.4)
    assert pareto_front([p]) == [p]


def test_empty_and_missing_values():
    assert pareto_front([]) == []
    assert pareto_front([point(None, 0.1), point(0.7, None)]) == []


def test_duplicates_collapse_to_lowest_seed():
    front = pareto_front([point(0.8, 0.1, seed=3), point(0.8, 0.1, seed=1), point(0.8, 0.1, seed=2)])
    assert len(front) == 1 and front[0].seed == 1


def test_unknown_metric():
    with pytest.raises(FormatError):
        pareto_front([point(0.5, 0.1)], "auc")


def test_selection_ignores_test_reports():
    good_test = FairnessReport(0.99, None, 0.0, 0.0, 0.0, "test")
    pts = [point(0.9, 0.1, seed=0), point(0.8, 0.2, seed=1, test=good_test)]
    assert [p.seed for p in pareto_front(pts)] == [0]


@pytest.mark.parametrize("trial", range(50))
def test_front_equals_brute_force(trial):
    r = np.random.default_rng(trial)
    digits = 1 if trial % 2 else 3  # a coarse grid forces ties in both coordinates
    a = np.round(r.random(200), digits)
    u = np.round(r.random(200), digits)
    pts = [point(float(x), float(y), seed=i) for i, (x, y) in enumerate(zip(a, u))]
    coords = [(p.validation.auc_y, p.validation.asd) for p in pts]
    expected = sorted({c for c in coords if not any(dominates(q, c) for q in coords)})
    front = pareto_front(pts)
    assert sorted((p.validation.auc_y, p.validation.asd) for p in front) == expected
    for p in front:  # representative of each coordinate is its lowest seed
        assert p.seed == min(i for i, c in enumerate(coords) if c == (p.validation.auc_y, p.validation.asd))
    assert pareto_front(front) == front


# -- front files ----------------------------------------------------------------

def test_front_csv_roundtrip():
    test = FairnessReport(0.81, 0.6, 0.05, 0.07, 0.06, "test")
    pts = [ParetoPoint("FAIR_scalar", 10.0, 2, FairnessReport(0.8, 0.55, 0.04, 0.08, 0.05), test, "abc")]
    rows = front_from_csv(front_to_csv(pts))
    assert list(rows[0]) == list(FRONT_COLUMNS)
    assert rows[0]["model"] == "FAIR_scalar" and float(rows[0]["AUC"]) == 0.81 and float(rows[0]["val_ASD"]) == 0.04
    assert float(rows[0]["ASD"]) == 0.05 and rows[0]["run_id"] == "abc"
    back = [ParetoPoint.from_dict(d) for d in __import__("json").loads(front_to_json(pts))]
    assert back == pts


def test_front_csv_missing_columns():
    with pytest.raises(FormatError, match="ASD"):
        front_from_csv("model,AUC\nF,0.7\n")
    with pytest.raises(FormatError):
        front_from_csv("model,AUC\n")
    assert front_from_csv(",".join(FRONT_COLUMNS) + "\n") == []
