"""Fair adversarial instance reweighting (FAIR) and adversarial baselines.

Quick start::

    from fairir import FairClassifier
    clf = FairClassifier(family="FAIR_scalar", alpha=1.0).fit(X, y, sensitive=s)
    clf.predict_proba(X_test)[:, 1], clf.instance_weights(X_test)

The experiment harness (sweeps, fronts, weight export, plots) lives in
:mod:`fairir.sweep` and :mod:`fairir.plots` and is driven by the ``fairir``
command.
"""
__version__ = "0.1.0"

from .errors import (ConfigurationError, DegenerateDataError, DomainError, FairIRError, FormatError,  # noqa: E402
                     IngestionError, NumericError, StateError, UndefinedMetricError, UnsupportedOperationError)
from .estimators import FairClassifier, ReweighingClassifier  # noqa: E402
from .eval import FairnessReport, ParetoPoint, auc, evaluate, fairness_metrics, pareto_front  # noqa: E402
from .models import FAMILIES, FairModel, build_model, kamiran_weights  # noqa: E402
from .train import TrainConfig, TrainLog, train  # noqa: E402

__all__ = [
    "ConfigurationError", "DegenerateDataError", "DomainError", "FAMILIES", "FairClassifier", "FairIRError",
    "FairModel", "FairnessReport", "FormatError", "IngestionError", "NumericError", "ParetoPoint",
    "ReweighingClassifier", "StateError", "TrainConfig", "TrainLog", "UndefinedMetricError",
    "UnsupportedOperationError", "__version__", "auc", "build_model", "evaluate", "fairness_metrics",
    "kamiran_weights", "pareto_front", "train",
]
