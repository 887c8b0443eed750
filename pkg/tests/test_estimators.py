import numpy as np
import pytest
from sklearn.base import clone

from fairir.errors import ConfigurationError, UnsupportedOperationError
from fairir.estimators import FairClassifier, ReweighingClassifier

FAST = dict(max_epochs=3, patience=2)


@pytest.fixture(scope="module")
def xys():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(200, 4))
    s = (rng.random(200) < 0.5).astype(float)
    y = ((X[:, 0] + s + 0.3 * rng.normal(size=200)) > 0.5).astype(float)
    return X, y, s


def arch(d):
    return dict(theta=(d, 1), phi=(1,), psi=(1,))


def test_get_params_and_clone():
    clf = FairClassifier(family="FAIR_Bernoulli", alpha=0.1, theta=(4, 1))
    c2 = clone(clf)
    assert c2.get_params() == clf.get_params()
    assert c2.get_params()["family"] == "FAIR_Bernoulli"
    clf.set_params(alpha=10.0)
    assert clf.alpha == 10.0
    assert "family" not in ReweighingClassifier().get_params()


def test_fit_predict_shapes(xys):
    X, y, s = xys
    clf = FairClassifier(**arch(4), **FAST).fit(X, y, sensitive=s)
    proba = clf.predict_proba(X)
    assert proba.shape == (200, 2) and np.allclose(proba.sum(axis=1), 1)
    assert set(np.unique(clf.predict(X))) <= {0, 1}
    w = clf.instance_weights(X)
    assert w.shape == (200,) and np.all((w >= 0) & (w <= 1))
    assert clf.sensitive_proba(X).shape == (200,)
    rep = clf.fairness_report(X, y, s)
    assert 0 <= rep.auc_y <= 1
    with pytest.raises(ConfigurationError):
        clf.predict_proba(X[:, :3])


def test_fit_is_deterministic(xys):
    X, y, s = xys
    a = FairClassifier(**arch(4), **FAST).fit(X, y, sensitive=s).predict_proba(X)
    b = FairClassifier(**arch(4), **FAST).fit(X, y, sensitive=s).predict_proba(X)
    assert np.array_equal(a, b)


def test_eval_set(xys):
    X, y, s = xys
    clf = FairClassifier(**arch(4), **FAST).fit(X[:150], y[:150], sensitive=s[:150],
                                                 eval_set=(X[150:], y[150:], s[150:]))
    assert clf.predict_proba(X).shape == (200, 2)


def test_fad_has_no_instance_weights(xys):
    X, y, s = xys
    clf = FairClassifier(family="FAD", alpha=1.0, theta=(4,), phi=(1,), psi=(1,), **FAST).fit(X, y, sensitive=s)
    with pytest.raises(UnsupportedOperationError):
        clf.instance_weights(X)


def test_reweighing_classifier(xys):
    X, y, s = xys
    clf = ReweighingClassifier(phi=(4, 1), **FAST).fit(X, y, sensitive=s)
    assert clf.predict_proba(X).shape == (200, 2)
    with pytest.raises(ConfigurationError):
        FairClassifier(family="Reweighing_NN", **arch(4)).fit(X, y, sensitive=s)


def test_input_validation(xys):
    X, y, s = xys
    with pytest.raises(ConfigurationError, match="sensitive"):
        FairClassifier(**arch(4)).fit(X, y)
    with pytest.raises(ConfigurationError):
        FairClassifier(**arch(4)).fit(X, y, sensitive=s[:10])
    with pytest.raises(ConfigurationError):
        FairClassifier(**arch(4)).fit(X, np.full(200, 2.0), sensitive=s)
    with pytest.raises(ConfigurationError):
        FairClassifier(family="nope", **arch(4)).fit(X, y, sensitive=s)
