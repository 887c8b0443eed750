"""scikit-learn style wrappers around the training loop.

>>> clf = FairClassifier(family="FAIR_scalar", alpha=1.0, theta=(37, 1), phi=(1,), psi=(1,))
>>> clf.fit(X, y, sensitive=s)                                   # doctest: +SKIP
>>> clf.predict_proba(X_new)[:, 1], clf.instance_weights(X)      # doctest: +SKIP

``fit`` carves a stratified validation part off the training data for early
stopping unless ``eval_set=(X_val, y_val, s_val)`` is given. Inputs are used
as-is: standardize numeric columns beforehand (e.g. with
:class:`fairir.data.Standardizer`).
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .data.tabular import SplitSet, TabularDataset
from .dist import make_rng
from .errors import ConfigurationError, UnsupportedOperationError
from .eval import evaluate
from .train import REWEIGHING, TrainConfig, train

VALIDATION_STREAM = 31


def _dataset(X, y, s) -> TabularDataset:
    return TabularDataset(X=X, y=y, s=s, feature_names=[f"x{i}" for i in range(X.shape[1])],
                          numeric_mask=np.zeros(X.shape[1], dtype=bool))


def _holdout(y, s, fraction, seed):
    """Stratified (on 2y + s) index split; returns (fit_idx, val_idx)."""
    rng = make_rng(seed, VALIDATION_STREAM)
    cells = (2 * y + s).astype(int)
    val = []
    for c in np.unique(cells):
        idx = rng.permutation(np.flatnonzero(cells == c))
        val.extend(idx[: int(round(fraction * len(idx)))])
    val = np.sort(np.asarray(val, dtype=int))
    fit = np.setdiff1d(np.arange(len(y)), val)
    return fit, val


class _BaseFair(ClassifierMixin, BaseEstimator):
    _family_fixed = None

    def _config(self) -> TrainConfig:
        params = self.get_params()
        params.pop("validation_fraction", None)
        if self._family_fixed:
            params["family"] = self._family_fixed
        return TrainConfig.from_dict(params)

    def fit(self, X, y, sensitive=None, eval_set=None):
        """Train on ``(X, y)`` with binary ``sensitive`` attribute ``s``.

        ``eval_set`` is an optional ``(X_val, y_val, s_val)`` triple for early
        stopping; otherwise ``validation_fraction`` of the rows are held out.
        """
        if sensitive is None:
            raise ConfigurationError("fit requires the sensitive attribute: fit(X, y, sensitive=s)")
        X, y = check_X_y(X, y, dtype=np.float64)
        s = np.asarray(sensitive, dtype=np.float64).ravel()
        if s.shape != y.shape:
            raise ConfigurationError("sensitive must have one entry per row")
        self.classes_ = np.unique(y)
        if not np.array_equal(self.classes_, [0.0, 1.0]):
            raise ConfigurationError("labels must be binary 0/1 with both classes present")
        config = self._config()
        if eval_set is None:
            fit_idx, val_idx = _holdout(y, s, self.validation_fraction, config.seed)
            train_ds, val_ds = _dataset(X[fit_idx], y[fit_idx], s[fit_idx]), _dataset(X[val_idx], y[val_idx], s[val_idx])
        else:
            Xv, yv, sv = eval_set
            Xv = check_array(Xv, dtype=np.float64)
            train_ds, val_ds = _dataset(X, y, s), _dataset(Xv, np.asarray(yv, float).ravel(), np.asarray(sv, float).ravel())
        self.n_features_in_ = X.shape[1]
        result = train(config, SplitSet(train_ds, val_ds, val_ds, config.seed))
        self.model_ = result.model
        self.train_log_ = result.log
        self.config_ = config
        return self

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ConfigurationError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        p = self.model_.predictor_scores(X)
        return np.column_stack([1.0 - p, p])

    def predict(self, X, threshold: float = 0.5) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= threshold).astype(int)

    def decision_function(self, X) -> np.ndarray:
        return self.predict_proba(X)[:, 1]

    def fairness_report(self, X, y, sensitive, split: str = "test"):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        return evaluate(self.model_, _dataset(X, np.asarray(y, float), np.asarray(sensitive, float)), split)


class FairClassifier(_BaseFair):
    """Adversarial fair classifier: FAIR variants (instance reweighting) or FAD (representation).

    Parameters mirror :class:`fairir.train.TrainConfig`.
    """

    def __init__(self, family="FAIR_scalar", alpha=1.0, theta=(37, 1), phi=(1,), psi=(1,), lr_theta=1e-4,
                 lr_phi=1e-4, lr_psi=1e-4, lr_mu=1e-3, batch_size=128, max_epochs=2000, patience=50, seed=0,
                 batch_norm=True, lambda_l2=0.0, baseline=False, n_samples=1, adversary_steps=1, min_delta=1e-4,
                 restore_best=True, validation_fraction=0.15):
        self.family = family
        self.alpha = alpha
        self.theta = theta
        self.phi = phi
        self.psi = psi
        self.lr_theta = lr_theta
        self.lr_phi = lr_phi
        self.lr_psi = lr_psi
        self.lr_mu = lr_mu
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.seed = seed
        self.batch_norm = batch_norm
        self.lambda_l2 = lambda_l2
        self.baseline = baseline
        self.n_samples = n_samples
        self.adversary_steps = adversary_steps
        self.min_delta = min_delta
        self.restore_best = restore_best
        self.validation_fraction = validation_fraction

    def fit(self, X, y, sensitive=None, eval_set=None):
        if self.family == REWEIGHING:
            raise ConfigurationError("use ReweighingClassifier for the reweighing baseline")
        return super().fit(X, y, sensitive=sensitive, eval_set=eval_set)

    def instance_weights(self, X) -> np.ndarray:
        """Expected instance weight in [0, 1] (FAIR families only)."""
        check_is_fitted(self, "model_")
        if not self.model_.is_fair:
            raise UnsupportedOperationError(f"instance weights are not defined for {self.family}")
        return self.model_.expected_weight(check_array(X, dtype=np.float64))

    def sensitive_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        return self.model_.sensitive_scores(check_array(X, dtype=np.float64))


class ReweighingClassifier(_BaseFair):
    """Predictor trained on Kamiran-Calders cell weights; ``alpha`` in [0, 1] scales them toward 1."""
    _family_fixed = REWEIGHING

    def __init__(self, alpha=1.0, phi=(37, 24, 1), lr_phi=1e-3, batch_size=128, max_epochs=2000, patience=10,
                 seed=0, batch_norm=True, lambda_l2=0.0, min_delta=1e-4, restore_best=True,
                 validation_fraction=0.15):
        self.alpha = alpha
        self.phi = phi
        self.lr_phi = lr_phi
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.seed = seed
        self.batch_norm = batch_norm
        self.lambda_l2 = lambda_l2
        self.min_delta = min_delta
        self.restore_best = restore_best
        self.validation_fraction = validation_fraction
