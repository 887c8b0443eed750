"""Adversarial objectives and parameter gradients for every model family.

All FAIR variants share the per-instance bracket::

    B(x, y, s) = alpha * log P_psi(s|x) - log P_phi(y|x)

and the batch objective ``mean(w * B)``. The weighting net (theta) and the
predictor (phi) descend it, the sensitive net (psi) ascends it. The families
differ in how the weight ``w`` comes out of theta:

* ``FAIR_scalar``     w = sigmoid head output, exact backprop.
* ``FAIR_Bernoulli``  w ~ Bernoulli(p), score-function gradient for theta.
* ``FAIR_betaSF``     w ~ Beta(a, b), score-function gradient for theta.
* ``FAIR_betaREP``    w ~ Beta(a, b), implicit pathwise gradient for theta.

``FAD`` and ``FAD_prob`` replace the weights with a learned representation
``z`` that both heads read.

Gradients in :class:`BatchGrads` are always *descent* directions, so the
adversary's entry is the negated gradient of the objective.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dist
from .architectures import Architecture
from .errors import ConfigurationError, DegenerateDataError, NumericError, UnsupportedOperationError
from .nncore import LayerSpec, Network, scale_grads, stack_layers

FAIR_FAMILIES = ("FAIR_scalar", "FAIR_Bernoulli", "FAIR_betaSF", "FAIR_betaREP")
FAD_FAMILIES = ("FAD", "FAD_prob")
FAMILIES = FAIR_FAMILIES + FAD_FAMILIES
BASELINE_FAMILIES = ("FAIR_Bernoulli", "FAIR_betaSF")

INIT_STREAMS = {"theta": 11, "phi": 12, "psi": 13, "mu": 14}


@dataclass
class FairModel:
    family: str
    alpha: float
    theta: Network
    phi: Network
    psi: Network
    mu: Network | None = None
    lambda_l2: float = 0.0
    n_samples: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown family {self.family!r}")
        if not self.alpha >= 0:
            raise ConfigurationError(f"alpha must be >= 0, got {self.alpha}")
        if self.mu is not None and self.family not in BASELINE_FAMILIES:
            raise ConfigurationError(f"a baseline network is only defined for {BASELINE_FAMILIES}")
        head = self.theta.layers[-1]
        if self.family in ("FAIR_scalar", "FAIR_Bernoulli") and (head.activation, head.width_out) != ("sigmoid", 1):
            raise ConfigurationError(f"{self.family} needs a single sigmoid unit on the weighting net")
        if self.family in ("FAIR_betaSF", "FAIR_betaREP") and (head.activation, head.width_out) != ("exp", 2):
            raise ConfigurationError(f"{self.family} needs a 2-unit exp head emitting (a, b)")
        if self.family == "FAD_prob" and head.width_out % 2:
            raise ConfigurationError("FAD_prob encoder must emit a mean and a log-std per latent unit")
        for name in ("phi", "psi"):
            last = getattr(self, name).layers[-1]
            if (last.activation, last.width_out) != ("sigmoid", 1):
                raise ConfigurationError(f"{name} must end in a single sigmoid unit")

    @property
    def is_fair(self) -> bool:
        return self.family in FAIR_FAMILIES

    def networks(self) -> dict[str, Network]:
        nets = {"theta": self.theta, "phi": self.phi, "psi": self.psi}
        if self.mu is not None:
            nets["mu"] = self.mu
        return nets

    # -- eval-mode views -------------------------------------------------

    def _representation(self, X) -> np.ndarray:
        out = self.theta.predict(X)
        if self.family == "FAD_prob":
            # the latent mean (noise set to zero) keeps scoring deterministic
            return np.tanh(out[:, : out.shape[1] // 2])
        return out

    def head_inputs(self, X) -> np.ndarray:
        return self._representation(X) if self.family in FAD_FAMILIES else np.asarray(X, dtype=np.float64)

    def predictor_scores(self, X) -> np.ndarray:
        """P(y = 1 | x) from the predictor network."""
        return self.phi.predict(self.head_inputs(X))[:, 0]

    def sensitive_scores(self, X) -> np.ndarray:
        """P(s = 1 | x) from the sensitive network."""
        return self.psi.predict(self.head_inputs(X))[:, 0]

    def expected_weight(self, X) -> np.ndarray:
        """Mean instance weight: w, p or a / (a + b) depending on the family."""
        if not self.is_fair:
            return np.ones(len(X))
        out = self.theta.predict(X)
        if self.family in ("FAIR_betaSF", "FAIR_betaREP"):
            return out[:, 0] / (out[:, 0] + out[:, 1])
        if self.family == "FAIR_Bernoulli":
            return dist.clamp_prob(out[:, 0])
        return out[:, 0]

    def log_likelihoods(self, X, y, s) -> tuple[np.ndarray, np.ndarray]:
        return log_likelihoods(self, X, y, s)


@dataclass
class BatchGrads:
    theta: list
    phi: list
    psi: list
    mu: list | None = None
    loss: float = 0.0
    predictor_loss: float = 0.0
    adversary_loss: float = 0.0
    mean_weight: float = 0.0
    n_skipped: int = 0
    extras: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = {"theta": self.theta, "phi": self.phi, "psi": self.psi}
        if self.mu is not None:
            d["mu"] = self.mu
        return d


# -- construction ----------------------------------------------------------

def _encoder_layers(n_in, widths, batch_norm):
    specs, prev = [], n_in
    for w in widths:
        specs.append(LayerSpec(prev, int(w), "relu", batch_norm))
        prev = int(w)
    return specs


def build_model(family: str, n_features: int, arch: Architecture, alpha: float, seed: int = 0,
                baseline: bool = False, lambda_l2: float = 0.0, n_samples: int = 1) -> FairModel:
    """Initialize the networks of one model from an :class:`Architecture`."""
    rng = {k: dist.make_rng(seed, v) for k, v in INIT_STREAMS.items()}
    bn = arch.batch_norm
    if family in FAIR_FAMILIES:
        head = "exp" if family in ("FAIR_betaSF", "FAIR_betaREP") else "sigmoid"
        theta = Network(stack_layers(n_features, arch.theta, head=head, batch_norm=bn), rng["theta"])
        z_dim = n_features
    elif family == "FAD":
        theta = Network(_encoder_layers(n_features, arch.theta, bn), rng["theta"])
        z_dim = arch.theta[-1]
    elif family == "FAD_prob":
        hidden, latent = arch.theta[:-1], arch.theta[-1]
        specs = _encoder_layers(n_features, hidden, bn)
        specs.append(LayerSpec(hidden[-1] if hidden else n_features, 2 * latent, "identity", False))
        theta = Network(specs, rng["theta"])
        z_dim = latent
    else:
        raise ConfigurationError(f"unknown family {family!r}")
    phi = Network(stack_layers(z_dim, arch.head(arch.phi), batch_norm=bn), rng["phi"])
    psi = Network(stack_layers(z_dim, arch.head(arch.psi), batch_norm=bn), rng["psi"])
    mu = None
    if baseline:
        width = arch.theta[0] if len(arch.theta) > 1 else 16
        mu = Network(stack_layers(n_features, [width, 1], head="identity", batch_norm=bn), rng["mu"])
    return FairModel(family, float(alpha), theta, phi, psi, mu, lambda_l2, n_samples)


# -- shared pieces ---------------------------------------------------------

def bernoulli_loglik(p_raw, target) -> tuple[np.ndarray, np.ndarray]:
    """log-likelihood of a binary target under a sigmoid output and its derivative.

    The clamp to [1e-6, 1 - 1e-6] is applied to the value; the derivative is
    evaluated at the clamped point and passed straight through the clamp.
    """
    return dist.bernoulli_log_prob(target, p_raw)


def log_likelihoods(model: FairModel, X, y, s) -> tuple[np.ndarray, np.ndarray]:
    """Per-instance ``(log P_phi(y|x), log P_psi(s|x))`` in eval mode."""
    z = model.head_inputs(X)
    l_phi, _ = bernoulli_loglik(model.phi.predict(z)[:, 0], np.asarray(y, dtype=np.float64))
    l_psi, _ = bernoulli_loglik(model.psi.predict(z)[:, 0], np.asarray(s, dtype=np.float64))
    return l_phi, l_psi


def _check_binary(y, s):
    y = np.asarray(y, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if not (np.all((y == 0) | (y == 1)) and np.all((s == 0) | (s == 1))):
        raise ConfigurationError("y and s must be binary")
    return y, s


def _heads(model: FairModel, Z, y, s):
    """Train-mode forward of both heads; returns log-likelihoods, their p-derivatives and caches."""
    p_phi, c_phi = model.phi.forward(Z, train=True)
    p_psi, c_psi = model.psi.forward(Z, train=True)
    l_phi, g_phi = bernoulli_loglik(p_phi[:, 0], y)
    l_psi, g_psi = bernoulli_loglik(p_psi[:, 0], s)
    return l_phi, g_phi, c_phi, l_psi, g_psi, c_psi


def _head_grads(model: FairModel, w, l_phi, g_phi, c_phi, l_psi, g_psi, c_psi, need_input_grad=False):
    """Gradients of ``mean(w * (alpha * l_psi - l_phi))`` for phi (descent) and psi (ascent).

    Also returns d objective / d head input when ``need_input_grad``.
    """
    n = len(w)
    d_lphi = -w / n
    d_lpsi = model.alpha * w / n
    grad_phi, din_phi = model.phi.backward(c_phi, (d_lphi * g_phi)[:, None])
    grad_psi, din_psi = model.psi.backward(c_psi, (d_lpsi * g_psi)[:, None])
    d_input = din_phi + din_psi if need_input_grad else None
    return grad_phi, scale_grads(grad_psi, -1.0), d_input


def _finish(model: FairModel, grads: BatchGrads) -> BatchGrads:
    if model.lambda_l2:
        for name, net in model.networks().items():
            g = getattr(grads, name)
            for gl, pl in zip(g, net.params):
                for k in gl:
                    # the adversary's descent gradient is already negated; its penalty still shrinks it
                    gl[k] = gl[k] + 2.0 * model.lambda_l2 * pl[k]
    for name in ("loss", "predictor_loss", "adversary_loss", "mean_weight"):
        if not np.isfinite(getattr(grads, name)):
            raise NumericError(f"non-finite {name} in batch gradient assembly")
    return grads


def _summaries(model, w, l_phi, l_psi):
    bracket = model.alpha * l_psi - l_phi
    return (float(np.mean(w * bracket)), float(np.mean(-w * l_phi)),
            float(np.mean(model.alpha * w * l_psi)), float(np.mean(w)))


def weighted_head_grads(model: FairModel, X, y, s, w) -> BatchGrads:
    """Predictor/adversary gradients for externally fixed instance weights.

    The weighting net receives no gradient. Used for the weighted-likelihood
    consistency check and by baselines that supply their own weights.
    """
    y, s = _check_binary(y, s)
    w = np.asarray(w, dtype=np.float64)
    Z = np.asarray(X, dtype=np.float64)
    if model.family in FAD_FAMILIES:
        Z = model.head_inputs(X)
    l_phi, g_phi, c_phi, l_psi, g_psi, c_psi = _heads(model, Z, y, s)
    grad_phi, grad_psi, _ = _head_grads(model, w, l_phi, g_phi, c_phi, l_psi, g_psi, c_psi)
    loss, pl, al, mw = _summaries(model, w, l_phi, l_psi)
    zero_theta = [{k: np.zeros_like(v) for k, v in p.items()} for p in model.theta.params]
    return BatchGrads(zero_theta, grad_phi, grad_psi, None, loss, pl, al, mw)


# -- FAIR families ---------------------------------------------------------

def fair_scalar_grads(model: FairModel, X, y, s) -> BatchGrads:
    if model.family != "FAIR_scalar":
        raise ConfigurationError("fair_scalar_grads needs a FAIR_scalar model")
    y, s = _check_binary(y, s)
    n = len(y)
    w_out, c_theta = model.theta.forward(X, train=True)
    w = w_out[:, 0]
    l_phi, g_phi, c_phi, l_psi, g_psi, c_psi = _heads(model, X, y, s)
    bracket = model.alpha * l_psi - l_phi
    grad_theta, _ = model.theta.backward(c_theta, (bracket / n)[:, None])
    grad_phi, grad_psi, _ = _head_grads(model, w, l_phi, g_phi, c_phi, l_psi, g_psi, c_psi)
    loss, pl, al, mw = _summaries(model, w, l_phi, l_psi)
    return _finish(model, BatchGrads(grad_theta, grad_phi, grad_psi, None, loss, pl, al, mw))


def _baseline_step(model: FairModel, X, reward):
    """Baseline values and the gradient of ``mean((reward - b)^2) / 2`` for mu."""
    if model.mu is None:
        return np.zeros(len(reward)), None
    b_out, c_mu = model.mu.forward(X, train=True)
    b = b_out[:, 0]
    grad_mu, _ = model.mu.backward(c_mu, (-(reward - b) / len(reward))[:, None])
    return b, grad_mu


ESTIMATORS = ("bernoulli", "beta_sf", "beta_rep")


def weight_head_estimate(kind: str, theta_out, bracket, baseline, rng: np.random.Generator):
    """One-sample estimate of d E_w[w * bracket] / d(weight-head output), per instance.

    ``kind`` is ``"bernoulli"`` (head output p), ``"beta_sf"`` or
    ``"beta_rep"`` (head output (a, b)). The score-function forms use
    ``(w * bracket - baseline) * d log P(w) / d param``, which stays unbiased for
    any baseline since the score has zero mean. The pathwise form ignores the
    baseline. Returns ``(d_out, w, skipped_mask)``; skipped instances (saturated
    Beta samples with vanishing density) contribute zero.
    """
    theta_out = np.atleast_2d(np.asarray(theta_out, dtype=np.float64))
    bracket = np.asarray(bracket, dtype=np.float64)
    d_out = np.zeros_like(theta_out)
    bad = np.zeros(len(theta_out), dtype=bool)
    if kind == "bernoulli":
        p = theta_out[:, 0]
        w = dist.bernoulli_sample(p, rng)
        _, score = dist.bernoulli_log_prob(w, p)
        d_out[:, 0] = (w * bracket - baseline) * score
        return d_out, w, bad
    if kind not in ESTIMATORS:
        raise ConfigurationError(f"unknown estimator {kind!r}")
    a, b = theta_out[:, 0], theta_out[:, 1]
    w, _u = dist.beta_sample(a, b, rng)
    if kind == "beta_sf":
        sa, sb = dist.beta_score_grads(w, a, b)
        adv = w * bracket - baseline
        d_out[:, 0] = adv * sa
        d_out[:, 1] = adv * sb
    else:
        dwa, dwb = dist.beta_reparam_grads(w, a, b, strict=False)
        bad = ~(np.isfinite(dwa) & np.isfinite(dwb))
        d_out[:, 0] = np.where(bad, 0.0, bracket * np.nan_to_num(dwa))
        d_out[:, 1] = np.where(bad, 0.0, bracket * np.nan_to_num(dwb))
    return d_out, w, bad


def _sampled_fair_grads(model: FairModel, X, y, s, rng: np.random.Generator, kind: str) -> BatchGrads:
    y, s = _check_binary(y, s)
    n = len(y)
    K = max(1, int(model.n_samples))
    theta_out, c_theta = model.theta.forward(X, train=True)
    l_phi, g_phi, c_phi, l_psi, g_psi, c_psi = _heads(model, X, y, s)
    bracket = model.alpha * l_psi - l_phi
    if model.mu is not None:
        b_out, c_mu = model.mu.forward(X, train=True)
        b_mu = b_out[:, 0]
    else:
        b_mu = np.zeros(n)
    d_theta_out = np.zeros_like(theta_out)
    d_b = np.zeros(n)
    w_mean = np.zeros(n)
    skipped = 0
    for _ in range(K):
        d_out, w, bad = weight_head_estimate(kind, theta_out, bracket, b_mu, rng)
        d_theta_out += d_out
        skipped += int(bad.sum())
        d_b += -(w * bracket - b_mu)
        w_mean += w
    d_theta_out /= K * n
    w_mean /= K
    grad_theta, _ = model.theta.backward(c_theta, d_theta_out)
    grad_mu = None
    if model.mu is not None:
        grad_mu, _ = model.mu.backward(c_mu, (d_b / (K * n))[:, None])
    grad_phi, grad_psi, _ = _head_grads(model, w_mean, l_phi, g_phi, c_phi, l_psi, g_psi, c_psi)
    loss, pl, al, mw = _summaries(model, w_mean, l_phi, l_psi)
    out = BatchGrads(grad_theta, grad_phi, grad_psi, grad_mu, loss, pl, al, mw, skipped)
    out.extras["bracket"] = bracket
    out.extras["weights"] = w_mean
    return _finish(model, out)


def fair_bernoulli_grads(model: FairModel, X, y, s, rng: np.random.Generator) -> BatchGrads:
    if model.family != "FAIR_Bernoulli":
        raise ConfigurationError("fair_bernoulli_grads needs a FAIR_Bernoulli model")
    return _sampled_fair_grads(model, X, y, s, rng, "bernoulli")


def fair_beta_sf_grads(model: FairModel, X, y, s, rng: np.random.Generator) -> BatchGrads:
    if model.family != "FAIR_betaSF":
        raise ConfigurationError("fair_beta_sf_grads needs a FAIR_betaSF model")
    return _sampled_fair_grads(model, X, y, s, rng, "beta_sf")


def fair_beta_rep_grads(model: FairModel, X, y, s, rng: np.random.Generator) -> BatchGrads:
    if model.family != "FAIR_betaREP":
        raise ConfigurationError("fair_beta_rep_grads needs a FAIR_betaREP model")
    return _sampled_fair_grads(model, X, y, s, rng, "beta_rep")


# -- FAD families ----------------------------------------------------------

def fad_grads(model: FairModel, X, y, s) -> BatchGrads:
    """Representation z = f_theta(x) shared by both heads; theta and phi descend, psi ascends."""
    if model.family != "FAD":
        raise ConfigurationError("fad_grads needs a FAD model")
    y, s = _check_binary(y, s)
    z, c_theta = model.theta.forward(X, train=True)
    w = np.ones(len(y))
    l_phi, g_phi, c_phi, l_psi, g_psi, c_psi = _heads(model, z, y, s)
    grad_phi, grad_psi, d_z = _head_grads(model, w, l_phi, g_phi, c_phi, l_psi, g_psi, c_psi, True)
    grad_theta, _ = model.theta.backward(c_theta, d_z)
    loss, pl, al, mw = _summaries(model, w, l_phi, l_psi)
    return _finish(model, BatchGrads(grad_theta, grad_phi, grad_psi, None, loss, pl, al, mw))


def fad_prob_grads(model: FairModel, X, y, s, rng: np.random.Generator | None = None, eps=None) -> BatchGrads:
    """Single-sample reparametrized estimate with z = tanh(mean + exp(log_std) * eps).

    ``eps`` may be supplied to freeze the noise; otherwise it is drawn from ``rng``.
    """
    if model.family != "FAD_prob":
        raise ConfigurationError("fad_prob_grads needs a FAD_prob model")
    y, s = _check_binary(y, s)
    out, c_theta = model.theta.forward(X, train=True)
    k = out.shape[1] // 2
    mean, log_std = out[:, :k], out[:, k:]
    if eps is None:
        if rng is None:
            raise ConfigurationError("fad_prob_grads needs rng or eps")
        eps = rng.standard_normal(mean.shape)
    eps = np.asarray(eps, dtype=np.float64)
    std = np.exp(log_std)
    z = np.tanh(mean + std * eps)
    w = np.ones(len(y))
    l_phi, g_phi, c_phi, l_psi, g_psi, c_psi = _heads(model, z, y, s)
    grad_phi, grad_psi, d_z = _head_grads(model, w, l_phi, g_phi, c_phi, l_psi, g_psi, c_psi, True)
    d_pre = d_z * (1.0 - z * z)
    d_out = np.hstack([d_pre, d_pre * std * eps])
    grad_theta, _ = model.theta.backward(c_theta, d_out)
    loss, pl, al, mw = _summaries(model, w, l_phi, l_psi)
    return _finish(model, BatchGrads(grad_theta, grad_phi, grad_psi, None, loss, pl, al, mw))


def batch_grads(model: FairModel, X, y, s, rng: np.random.Generator) -> BatchGrads:
    """Dispatch to the gradient assembly for the model's family."""
    fam = model.family
    if fam == "FAIR_scalar":
        return fair_scalar_grads(model, X, y, s)
    if fam == "FAIR_Bernoulli":
        return fair_bernoulli_grads(model, X, y, s, rng)
    if fam == "FAIR_betaSF":
        return fair_beta_sf_grads(model, X, y, s, rng)
    if fam == "FAIR_betaREP":
        return fair_beta_rep_grads(model, X, y, s, rng)
    if fam == "FAD":
        return fad_grads(model, X, y, s)
    return fad_prob_grads(model, X, y, s, rng)


# -- objectives on held-out data -------------------------------------------

def objectives(model: FairModel, X, y, s) -> tuple[float, float]:
    """Eval-mode ``(predictor min-objective, adversary max-objective)`` for early stopping.

    The first is the predictor's mean negative log-likelihood ``-mean(log
    P_phi(y|x))`` (lower is better), the second the adversary's mean
    log-likelihood ``mean(log P_psi(s|x))`` (higher is better). Both are
    unweighted: instance weights move during training and would otherwise make
    the monitored values drift for reasons unrelated to either player.
    """
    l_phi, l_psi = log_likelihoods(model, X, y, s)
    return float(-np.mean(l_phi)), float(np.mean(l_psi))


# -- Kamiran-Calders reweighing ---------------------------------------------

def kamiran_weights(y, s) -> np.ndarray:
    """Weights ``n_s * n_y / (n * n_sy)`` that make y and s independent in weighted counts."""
    y = np.asarray(y).astype(int)
    s = np.asarray(s).astype(int)
    n = len(y)
    w = np.empty(n)
    for sv in (0, 1):
        for yv in (0, 1):
            cell = (s == sv) & (y == yv)
            n_sy = cell.sum()
            if n_sy == 0:
                raise DegenerateDataError(f"empty (s={sv}, y={yv}) cell")
            w[cell] = (s == sv).sum() * (y == yv).sum() / (n * n_sy)
    return w


# -- interpretability records ------------------------------------------------

@dataclass
class InstanceWeightRecord:
    index: int
    family: str
    alpha: float
    weight: float
    logp_y: float
    logp_s: float
    ratio: float

    def as_dict(self) -> dict:
        return {"index": self.index, "family": self.family, "alpha": self.alpha, "weight": self.weight,
                "logP_y": self.logp_y, "logP_s": self.logp_s, "ratio": self.ratio}


def instance_records(model: FairModel, X, y, s, index=None) -> list[InstanceWeightRecord]:
    """Weight summary and log-likelihood ratio ``log P_phi / log P_psi`` per instance."""
    if not model.is_fair:
        raise UnsupportedOperationError(f"instance weights are not defined for {model.family}")
    w = model.expected_weight(X)
    l_phi, l_psi = log_likelihoods(model, X, y, s)
    index = np.arange(len(w)) if index is None else np.asarray(index)
    return [InstanceWeightRecord(int(i), model.family, model.alpha, float(wi), float(a), float(b), float(a / b))
            for i, wi, a, b in zip(index, w, l_phi, l_psi)]
