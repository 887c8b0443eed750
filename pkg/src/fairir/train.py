"""Mini-batch adversarial training with validation-monitored early stopping.

One run trains a :class:`~fairir.models.FairModel` (or the Kamiran
``Reweighing_NN`` baseline) on the train split, evaluates the predictor
min-objective and adversary max-objective on the validation split after every
epoch, and stops once neither has improved for ``patience`` epochs. The
returned model is the snapshot from the best predictor-objective epoch.

A learning rate of 0 freezes the corresponding network: it is run in
inference mode (no batch-norm statistic updates) and never stepped.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dist
from .architectures import SYNTHETIC_MAX_EPOCHS, Architecture, default_architecture
from .data.tabular import SplitSet, TabularDataset
from .errors import ConfigurationError, NumericError
from .models import (FAMILIES, BASELINE_FAMILIES, FairModel, batch_grads, bernoulli_loglik, build_model,
                     kamiran_weights, objectives)
from .nncore import Network, stack_layers

REWEIGHING = "Reweighing_NN"
ALL_FAMILIES = FAMILIES + (REWEIGHING,)
SHUFFLE_STREAM = 21
SAMPLE_STREAM = 22
STOP_REASONS = ("patience", "max_iterations")


@dataclass(frozen=True)
class TrainConfig:
    """Everything that determines a training run.

    ``alpha`` is the fairness trade-off for FAIR/FAD families and the
    reweighing strength in [0, 1] for ``Reweighing_NN`` (0 = plain BCE,
    1 = full Kamiran weights).
    """
    family: str
    alpha: float
    theta: tuple = ()
    phi: tuple = ()
    psi: tuple = ()
    lr_theta: float = 1e-4
    lr_phi: float = 1e-4
    lr_psi: float = 1e-4
    lr_mu: float = 1e-3
    batch_size: int = 128
    max_epochs: int = 2000
    patience: int = 50
    seed: int = 0
    batch_norm: bool = True
    lambda_l2: float = 0.0
    baseline: bool = False
    n_samples: int = 1
    adversary_steps: int = 1
    min_delta: float = 1e-4
    restore_best: bool = True

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(int(w) for w in self.theta))
        object.__setattr__(self, "phi", tuple(int(w) for w in self.phi))
        object.__setattr__(self, "psi", tuple(int(w) for w in self.psi))
        self.validate()

    def validate(self):
        if self.family not in ALL_FAMILIES:
            raise ConfigurationError(f"unknown family {self.family!r}; expected one of {ALL_FAMILIES}")
        if not (np.isfinite(self.alpha) and self.alpha >= 0):
            raise ConfigurationError(f"alpha must be a finite non-negative number, got {self.alpha}")
        if self.family == REWEIGHING and self.alpha > 1:
            raise ConfigurationError("the reweighing strength must lie in [0, 1]")
        for name in ("lr_theta", "lr_phi", "lr_psi", "lr_mu"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ConfigurationError(f"{name} must be >= 0 (0 freezes the network), got {v}")
        for name in ("batch_size", "max_epochs", "patience", "n_samples", "adversary_steps"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError(f"{name} must be a positive integer")
        if self.patience > self.max_epochs:
            raise ConfigurationError(f"patience ({self.patience}) exceeds max_epochs ({self.max_epochs})")
        if self.baseline and self.family not in BASELINE_FAMILIES:
            raise ConfigurationError(f"baseline network is only available for {BASELINE_FAMILIES}")
        if self.lambda_l2 < 0 or self.min_delta < 0:
            raise ConfigurationError("lambda_l2 and min_delta must be non-negative")
        if not self.phi:
            raise ConfigurationError("predictor widths (phi) are required")
        if self.family != REWEIGHING and not self.theta:
            raise ConfigurationError(f"{self.family} needs theta widths")

    @property
    def architecture(self) -> Architecture:
        return Architecture(self.theta, self.phi, self.psi or (1,), self.patience, self.lr_phi, self.batch_norm)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k in ("theta", "phi", "psi"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def for_dataset(cls, dataset: str, family: str, alpha: float, seed: int = 0, **overrides) -> "TrainConfig":
        """Defaults from the architecture table (widths, patience, learning rate)."""
        arch = default_architecture(dataset, family)
        base = dict(family=family, alpha=float(alpha), theta=arch.theta, phi=arch.head(arch.phi),
                    psi=arch.head(arch.psi) if arch.psi else (), lr_theta=arch.learning_rate,
                    lr_phi=arch.learning_rate, lr_psi=arch.adversary_lr, patience=arch.patience,
                    max_epochs=max(SYNTHETIC_MAX_EPOCHS if dataset == "synthetic" else 2000, arch.patience),
                    seed=int(seed), batch_norm=arch.batch_norm)
        if family == REWEIGHING:
            base["theta"] = ()
        base.update(overrides)
        return cls(**base)


@dataclass
class TrainLog:
    epochs: list = field(default_factory=list)
    train_loss: list = field(default_factory=list)
    val_predictor_objective: list = field(default_factory=list)
    val_adversary_objective: list = field(default_factory=list)
    mean_weight: list = field(default_factory=list)
    n_skipped: list = field(default_factory=list)
    wall_time: list = field(default_factory=list)
    stop_reason: str | None = None
    best_epoch: int | None = None

    COLUMNS = ("epoch", "train_loss", "val_predictor_objective", "val_adversary_objective", "mean_weight",
               "n_skipped")

    def append(self, epoch, loss, pred, adv, mw, skipped, wall):
        if self.epochs and epoch != self.epochs[-1] + 1:
            raise ConfigurationError("epochs must be appended in order")
        self.epochs.append(epoch)
        self.train_loss.append(float(loss))
        self.val_predictor_objective.append(float(pred))
        self.val_adversary_objective.append(float(adv) if adv is not None else float("nan"))
        self.mean_weight.append(float(mw))
        self.n_skipped.append(int(skipped))
        self.wall_time.append(float(wall))

    def set_stop(self, reason: str):
        if self.stop_reason is not None:
            raise ConfigurationError("stop reason already set")
        if reason not in STOP_REASONS:
            raise ConfigurationError(f"unknown stop reason {reason!r}")
        self.stop_reason = reason

    def to_csv(self, include_wall_time: bool = False) -> str:
        """CSV text; wall time is excluded by default so logs compare bitwise across reruns."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = list(self.COLUMNS) + (["wall_time"] if include_wall_time else [])
        w.writerow(cols)
        for i, e in enumerate(self.epochs):
            row = [e, repr(self.train_loss[i]), repr(self.val_predictor_objective[i]),
                   repr(self.val_adversary_objective[i]), repr(self.mean_weight[i]), self.n_skipped[i]]
            if include_wall_time:
                row.append(f"{self.wall_time[i]:.6f}")
            w.writerow(row)
        w.writerow(["# stop_reason", self.stop_reason, "best_epoch", self.best_epoch])
        return buf.getvalue()


@dataclass
class ReweighingModel:
    """Plain predictor trained on fixed per-cell Kamiran weights."""
    alpha: float
    phi: Network
    family: str = REWEIGHING
    mu = None

    @property
    def is_fair(self) -> bool:
        return False

    def networks(self) -> dict:
        return {"phi": self.phi}

    def predictor_scores(self, X) -> np.ndarray:
        return self.phi.predict(X)[:, 0]

    def sensitive_scores(self, X):
        return None

    def expected_weight(self, X) -> np.ndarray:
        return np.ones(len(X))


def reweighing_weights(y, s, strength: float) -> np.ndarray:
    """``1 + strength * (kamiran - 1)``: interpolates plain BCE (0) and full reweighing (1)."""
    return 1.0 + float(strength) * (kamiran_weights(y, s) - 1.0)


@dataclass
class TrainResult:
    model: object
    log: TrainLog
    config: TrainConfig

    def __iter__(self):
        return iter((self.model, self.log))


def _batches(n, batch_size, rng, min_size):
    perm = rng.permutation(n)
    chunks = [perm[i:i + batch_size] for i in range(0, n, batch_size)]
    if len(chunks) > 1 and len(chunks[-1]) < min_size:
        chunks[-2] = np.concatenate([chunks[-2], chunks[-1]])
        chunks.pop()
    return chunks


def _lr(config: TrainConfig, name: str) -> float:
    return getattr(config, f"lr_{name}")


def _stats(net: Network):
    return [None if m is None else m.copy() for m in net.running_mean], \
           [None if v is None else v.copy() for v in net.running_var]


def _restore(net: Network, stats):
    net.running_mean, net.running_var = stats


class _EarlyStopper:
    def __init__(self, patience, min_delta, track_adversary=True):
        self.patience = patience
        self.min_delta = min_delta
        self.track_adversary = track_adversary
        self.best_pred = np.inf
        self.best_adv = -np.inf
        self.stale = 0

    def update(self, pred, adv) -> tuple[bool, bool]:
        """Returns ``(predictor improved, should stop)``."""
        pred_better = pred < self.best_pred - self.min_delta
        adv_better = self.track_adversary and adv > self.best_adv + self.min_delta
        if pred_better:
            self.best_pred = pred
        if adv_better:
            self.best_adv = adv
        self.stale = 0 if (pred_better or adv_better) else self.stale + 1
        return pred_better, self.stale >= self.patience


def _ensure_usable(splits):
    for name in ("train", "val"):
        getattr(splits, name).check_nondegenerate()


def train(config: TrainConfig, splits: SplitSet) -> TrainResult:
    """Train one model; the splits must already be standardized."""
    if config.family == REWEIGHING:
        return train_baselines(config, splits)
    _ensure_usable(splits)
    tr, va = splits.train, splits.val
    model = build_model(config.family, tr.n_features, config.architecture, config.alpha, config.seed,
                        baseline=config.baseline, lambda_l2=config.lambda_l2, n_samples=config.n_samples)
    nets = model.networks()
    frozen = {k for k in nets if _lr(config, k) == 0}
    min_size = 2 if any(n.has_batch_norm for n in nets.values()) else 1
    shuffle_rng = dist.make_rng(config.seed, SHUFFLE_STREAM)
    sample_rng = dist.make_rng(config.seed, SAMPLE_STREAM)
    stopper = _EarlyStopper(config.patience, config.min_delta)
    log = TrainLog()
    best = None
    for epoch in range(1, config.max_epochs + 1):
        t0 = time.perf_counter()
        losses, skipped = [], 0
        for b, idx in enumerate(_batches(len(tr), config.batch_size, shuffle_rng, min_size)):
            X, y, s = tr.X[idx], tr.y[idx], tr.s[idx]
            try:
                saved = {k: _stats(nets[k]) for k in frozen}
                g = batch_grads(model, X, y, s, sample_rng)
                for k in frozen:
                    _restore(nets[k], saved[k])
                for k, net in nets.items():
                    if k not in frozen:
                        net.adam_step(getattr(g, k), _lr(config, k))
                for _ in range(config.adversary_steps - 1):
                    if "psi" in frozen:
                        break
                    saved = {k: _stats(nets[k]) for k in nets if k != "psi"}
                    g2 = batch_grads(model, X, y, s, sample_rng)
                    for k, st in saved.items():
                        _restore(nets[k], st)
                    model.psi.adam_step(g2.psi, config.lr_psi)
            except NumericError as e:
                raise NumericError(f"epoch {epoch}, batch {b}: {e}") from e
            losses.append(g.loss)
            skipped += g.n_skipped
        pred, adv = objectives(model, va.X, va.y, va.s)
        if not (np.isfinite(pred) and np.isfinite(adv)):
            raise NumericError(f"epoch {epoch}: non-finite validation objective")
        mw = float(np.mean(model.expected_weight(tr.X)))
        log.append(epoch, np.mean(losses), pred, adv, mw, skipped, time.perf_counter() - t0)
        improved, stop = stopper.update(pred, adv)
        if improved or best is None:
            best = (epoch, _snapshot(model) if config.restore_best else None)
        if stop:
            log.set_stop("patience")
            break
    else:
        log.set_stop("max_iterations")
    log.best_epoch = best[0]
    return TrainResult(best[1] if config.restore_best else model, log, config)


def _snapshot(model: FairModel) -> FairModel:
    return dataclasses.replace(model, theta=model.theta.copy(), phi=model.phi.copy(), psi=model.psi.copy(),
                               mu=None if model.mu is None else model.mu.copy())


def train_baselines(config: TrainConfig, splits: SplitSet) -> TrainResult:
    """Reweighing-NN: a single predictor trained on BCE weighted by Kamiran cell weights."""
    if config.family != REWEIGHING:
        raise ConfigurationError("train_baselines expects the Reweighing_NN family")
    _ensure_usable(splits)
    tr, va = splits.train, splits.val
    phi = Network(stack_layers(tr.n_features, config.phi, batch_norm=config.batch_norm),
                  dist.make_rng(config.seed, 12))
    w_tr = reweighing_weights(tr.y, tr.s, config.alpha)
    w_va = reweighing_weights(va.y, va.s, config.alpha)
    frozen = config.lr_phi == 0
    shuffle_rng = dist.make_rng(config.seed, SHUFFLE_STREAM)
    stopper = _EarlyStopper(config.patience, config.min_delta, track_adversary=False)
    log = TrainLog()
    best = None
    for epoch in range(1, config.max_epochs + 1):
        t0 = time.perf_counter()
        losses = []
        for b, idx in enumerate(_batches(len(tr), config.batch_size, shuffle_rng, 2 if config.batch_norm else 1)):
            X, y, w = tr.X[idx], tr.y[idx], w_tr[idx]
            try:
                saved = _stats(phi) if frozen else None
                p, cache = phi.forward(X, train=True)
                l, dl = bernoulli_loglik(p[:, 0], y)
                losses.append(float(np.mean(-w * l)))
                if frozen:
                    _restore(phi, saved)
                    continue
                grads, _ = phi.backward(cache, (-w * dl / len(idx))[:, None])
                if config.lambda_l2:
                    grads = [{k: g[k] + 2 * config.lambda_l2 * q[k] for k in g} for g, q in zip(grads, phi.params)]
                phi.adam_step(grads, config.lr_phi)
            except NumericError as e:
                raise NumericError(f"epoch {epoch}, batch {b}: {e}") from e
        l_va, _ = bernoulli_loglik(phi.predict(va.X)[:, 0], va.y)
        pred = float(np.mean(-w_va * l_va))
        log.append(epoch, np.mean(losses), pred, None, 1.0, 0, time.perf_counter() - t0)
        improved, stop = stopper.update(pred, None)
        if improved or best is None:
            best = (epoch, phi.copy() if config.restore_best else None)
        if stop:
            log.set_stop("patience")
            break
    else:
        log.set_stop("max_iterations")
    log.best_epoch = best[0]
    return TrainResult(ReweighingModel(config.alpha, best[1] if config.restore_best else phi), log, config)


# -- provenance --------------------------------------------------------------

def git_describe(cwd=None) -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True, text=True,
                             cwd=cwd or Path(__file__).resolve().parent, timeout=10)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def run_manifest(config: TrainConfig, dataset: TabularDataset | SplitSet, log: TrainLog | None = None,
                 extra: dict | None = None) -> dict:
    """JSON-ready record tying a run to its configuration and data."""
    if isinstance(dataset, SplitSet):
        digest = hashlib.sha256("".join(d.digest() for d in dataset).encode()).hexdigest()[:16]
        source = dataset.train.provenance.get("source")
        split_seed = dataset.seed
    else:
        digest, source, split_seed = dataset.digest(), dataset.provenance.get("source"), None
    from . import __version__
    m = {"config": config.to_dict(), "config_hash": config.digest(), "dataset_hash": digest,
         "dataset_source": source, "split_seed": split_seed, "git_describe": git_describe(),
         "package_version": __version__}
    if log is not None:
        m.update(stop_reason=log.stop_reason, best_epoch=log.best_epoch, n_epochs=len(log.epochs))
    if extra:
        m.update(extra)
    return m
