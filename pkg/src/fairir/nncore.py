"""Small feed-forward network engine with hand-derived backward rules.

Every network in the package (weighting, predictor, sensitive and baseline
nets) is a stack of dense layers, each optionally followed by batch
normalization and then an elementwise activation::

    h = a_prev @ W + b  ->  [batch norm]  ->  activation

Everything runs in float64.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

from .errors import ConfigurationError, NumericError, StateError

ACTIVATIONS = ("relu", "sigmoid", "exp", "identity", "tanh")
HEAD_ONLY_ACTIVATIONS = ("exp",)

BN_MOMENTUM = 0.9
BN_EPS = 1e-5


@dataclass(frozen=True)
class LayerSpec:
    width_in: int
    width_out: int
    activation: str = "relu"
    batch_norm: bool = False

    def __post_init__(self):
        if int(self.width_in) < 1 or int(self.width_out) < 1:
            raise ConfigurationError(f"layer widths must be >= 1, got {self.width_in}->{self.width_out}")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {self.activation!r}; expected one of {ACTIVATIONS}")

    def to_dict(self) -> dict:
        return {"width_in": self.width_in, "width_out": self.width_out,
                "activation": self.activation, "batch_norm": self.batch_norm}


def stack_layers(n_in: int, widths: Sequence[int], hidden: str = "relu", head: str = "sigmoid",
                 batch_norm: bool = True) -> list[LayerSpec]:
    """Build layer specs from a width list such as ``[37, 1]``.

    Hidden layers get ``hidden`` activation and batch norm (if requested); the
    last layer gets ``head`` and never batch norm.
    """
    if not widths:
        raise ConfigurationError("width list must be non-empty")
    specs = []
    prev = n_in
    for i, w in enumerate(widths):
        last = i == len(widths) - 1
        specs.append(LayerSpec(prev, int(w), head if last else hidden, batch_norm and not last))
        prev = int(w)
    return specs


def _activate(name: str, u: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(u, 0.0)
    if name == "sigmoid":
        return expit(u)
    if name == "exp":
        with np.errstate(over="ignore"):
            return np.exp(u)
    if name == "tanh":
        return np.tanh(u)
    return u.copy()


def _activation_grad(name: str, u: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (u > 0).astype(u.dtype)
    if name == "sigmoid":
        return a * (1.0 - a)
    if name == "exp":
        return a
    if name == "tanh":
        return 1.0 - a * a
    return np.ones_like(u)


class ForwardCache:
    """Intermediate values of one forward pass, consumed by :meth:`Network.backward`."""

    def __init__(self, train: bool, inputs: np.ndarray):
        self.train = train
        self.inputs = inputs
        self.layers: list[dict] = []


class Network:
    """A dense network together with its Adam and batch-norm running state.

    Parameters
    ----------
    layers : sequence of LayerSpec
        Consecutive layers; ``width_out`` of one must equal ``width_in`` of the next.
    rng : numpy Generator or int, optional
        Source of the initial weights (He-uniform for ReLU layers, Xavier-uniform
        otherwise). An int is used as a seed.
    """

    def __init__(self, layers: Sequence[LayerSpec], rng=None):
        layers = tuple(layers)
        if not layers:
            raise ConfigurationError("a network needs at least one layer")
        for i, (a, b) in enumerate(zip(layers[:-1], layers[1:])):
            if a.width_out != b.width_in:
                raise ConfigurationError(f"layer {i} outputs {a.width_out} but layer {i + 1} expects {b.width_in}")
        for i, spec in enumerate(layers[:-1]):
            if spec.activation in HEAD_ONLY_ACTIVATIONS:
                raise ConfigurationError(f"activation {spec.activation!r} is only allowed on the output layer (layer {i})")
        self.layers = layers
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        self.params: list[dict[str, np.ndarray]] = []
        self.running_mean: list[np.ndarray | None] = []
        self.running_var: list[np.ndarray | None] = []
        for spec in layers:
            if spec.activation == "relu":
                limit = np.sqrt(6.0 / spec.width_in)
            else:
                limit = np.sqrt(6.0 / (spec.width_in + spec.width_out))
            p = {"W": rng.uniform(-limit, limit, size=(spec.width_in, spec.width_out))}
            if spec.batch_norm:
                # the batch-norm shift replaces the (redundant) linear bias
                p["gamma"] = np.ones(spec.width_out)
                p["beta"] = np.zeros(spec.width_out)
                self.running_mean.append(np.zeros(spec.width_out))
                self.running_var.append(np.ones(spec.width_out))
            else:
                p["b"] = np.zeros(spec.width_out)
                self.running_mean.append(None)
                self.running_var.append(None)
            self.params.append(p)
        self._bind(np.concatenate([v.ravel() for p in self.params for v in p.values()]),
                   np.zeros(self.n_params()), np.zeros(self.n_params()))
        self.step = 0

    def _bind(self, flat, flat_m, flat_v):
        """Make ``params``/``adam_m``/``adam_v`` views into three flat buffers.

        Adam then updates a whole network with a handful of vector operations.
        Parameters must be modified in place to keep the views attached.
        """
        keys = [(i, k, v.shape) for i, p in enumerate(self.params) for k, v in p.items()]
        self._flat, self._flat_m, self._flat_v = flat, flat_m, flat_v
        params = [dict() for _ in self.params]
        m = [dict() for _ in self.params]
        v = [dict() for _ in self.params]
        off = 0
        for i, k, shape in keys:
            size = int(np.prod(shape))
            params[i][k] = flat[off:off + size].reshape(shape)
            m[i][k] = flat_m[off:off + size].reshape(shape)
            v[i][k] = flat_v[off:off + size].reshape(shape)
            off += size
        self.params, self.adam_m, self.adam_v = params, m, v
        self._keys = [(i, k) for i, k, _ in keys]

    def flatten_grads(self, grads) -> np.ndarray:
        """Concatenate per-layer gradients in parameter order, checking shapes."""
        if len(grads) != len(self.params):
            raise ConfigurationError("gradient list does not match the layer count")
        parts = []
        for i, k in self._keys:
            g = grads[i][k]
            if g.shape != self.params[i][k].shape:
                raise ConfigurationError(f"gradient for {k} has shape {g.shape}, expected {self.params[i][k].shape}")
            parts.append(g.ravel())
        return np.concatenate(parts)

    @property
    def n_in(self) -> int:
        return self.layers[0].width_in

    @property
    def n_out(self) -> int:
        return self.layers[-1].width_out

    @property
    def has_batch_norm(self) -> bool:
        return any(spec.batch_norm for spec in self.layers)

    def n_params(self) -> int:
        return sum(v.size for p in self.params for v in p.values())

    def copy(self) -> "Network":
        new = copy.copy(self)
        new.running_mean = [None if r is None else r.copy() for r in self.running_mean]
        new.running_var = [None if r is None else r.copy() for r in self.running_var]
        new._bind(self._flat.copy(), self._flat_m.copy(), self._flat_v.copy())
        return new

    def __deepcopy__(self, memo):
        return self.copy()

    def forward(self, X, train: bool = True, update_stats: bool = True) -> tuple[np.ndarray, ForwardCache]:
        """Run the network on a batch.

        In train mode batch norm uses batch statistics (and, unless
        ``update_stats`` is False, folds them into the running estimates). In
        eval mode only running statistics are used, so rows never interact.
        """
        a = np.asarray(X, dtype=np.float64)
        if a.ndim != 2 or a.shape[1] != self.n_in:
            raise ConfigurationError(f"expected input of shape (n, {self.n_in}), got {a.shape}")
        if a.shape[0] < 1:
            raise ConfigurationError("empty batch")
        if train and a.shape[0] < 2 and self.has_batch_norm:
            raise ConfigurationError("train-mode batches of size 1 are not supported with batch norm")
        cache = ForwardCache(train, a)
        for i, (spec, p) in enumerate(zip(self.layers, self.params)):
            entry = {"a_prev": a}
            h = a @ p["W"] + p["b"] if "b" in p else a @ p["W"]
            if spec.batch_norm:
                if train:
                    mean = h.mean(axis=0)
                    var = h.var(axis=0)
                    if update_stats:
                        self.running_mean[i] = BN_MOMENTUM * self.running_mean[i] + (1 - BN_MOMENTUM) * mean
                        self.running_var[i] = BN_MOMENTUM * self.running_var[i] + (1 - BN_MOMENTUM) * var
                else:
                    mean = self.running_mean[i]
                    var = self.running_var[i]
                std = np.sqrt(var + BN_EPS)
                hn = (h - mean) / std
                entry["hn"] = hn
                entry["std"] = std
                u = p["gamma"] * hn + p["beta"]
            else:
                u = h
            a = _activate(spec.activation, u)
            if not np.isfinite(a).all():
                raise NumericError(f"non-finite activation in layer {i}")
            entry["u"] = u
            entry["a"] = a
            cache.layers.append(entry)
        return a, cache

    def predict(self, X) -> np.ndarray:
        """Eval-mode forward pass."""
        return self.forward(X, train=False)[0]

    def backward(self, cache: ForwardCache | None, grad_out) -> tuple[list[dict[str, np.ndarray]], np.ndarray]:
        """Gradients of a scalar loss given ``grad_out = dloss/doutput``.

        Returns per-layer parameter gradients (same keys and shapes as
        ``params``) and the gradient with respect to the network input.
        """
        if cache is None or not cache.layers:
            raise StateError("backward called before forward")
        if not cache.train:
            raise StateError("backward requires a train-mode forward pass")
        d_a = np.asarray(grad_out, dtype=np.float64)
        if d_a.shape != cache.layers[-1]["a"].shape:
            raise ConfigurationError(f"upstream gradient shape {d_a.shape} != output shape {cache.layers[-1]['a'].shape}")
        grads: list[dict[str, np.ndarray]] = [None] * len(self.layers)
        for i in range(len(self.layers) - 1, -1, -1):
            spec, p, entry = self.layers[i], self.params[i], cache.layers[i]
            d_u = d_a * _activation_grad(spec.activation, entry["u"], entry["a"])
            g = {}
            if spec.batch_norm:
                hn, std = entry["hn"], entry["std"]
                n = hn.shape[0]
                g["gamma"] = np.sum(d_u * hn, axis=0)
                g["beta"] = np.sum(d_u, axis=0)
                d_hn = d_u * p["gamma"]
                d_h = (n * d_hn - d_hn.sum(axis=0) - hn * np.sum(d_hn * hn, axis=0)) / (n * std)
            else:
                d_h = d_u
                g["b"] = d_h.sum(axis=0)
            g["W"] = entry["a_prev"].T @ d_h
            grads[i] = g
            d_a = d_h @ p["W"].T
        return grads, d_a

    def adam_step(self, grads, learning_rate: float, beta1: float = 0.9, beta2: float = 0.999,
                  eps: float = 1e-8, l2: float = 0.0) -> "Network":
        """One bias-corrected Adam update (in place); returns ``self``."""
        if not learning_rate > 0:
            raise ConfigurationError(f"learning rate must be positive, got {learning_rate}")
        g = self.flatten_grads(grads)
        if not np.isfinite(g).all():
            bad = next(k for i, k in self._keys if not np.isfinite(grads[i][k]).all())
            raise NumericError(f"non-finite gradient for parameter {bad}")
        if l2:
            g = g + 2.0 * l2 * self._flat
        self.step += 1
        t = self.step
        m, v = self._flat_m, self._flat_v
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * (g * g)
        denom = np.sqrt(v / (1.0 - beta2 ** t))
        denom += eps
        self._flat -= (learning_rate / (1.0 - beta1 ** t)) * m / denom
        return self

    def l2_norm_sq(self) -> float:
        return float(sum(np.sum(v * v) for p in self.params for v in p.values()))

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Flat name -> array mapping of parameters and running statistics (for saving)."""
        out = {}
        for i, p in enumerate(self.params):
            for k, v in p.items():
                out[f"{i}.{k}"] = v
            if self.running_mean[i] is not None:
                out[f"{i}.running_mean"] = self.running_mean[i]
                out[f"{i}.running_var"] = self.running_var[i]
        return out


def zeros_like_grads(net: Network) -> list[dict[str, np.ndarray]]:
    return [{k: np.zeros_like(v) for k, v in p.items()} for p in net.params]


def add_grads(a, b, scale: float = 1.0):
    return [{k: ga[k] + scale * gb[k] for k in ga} for ga, gb in zip(a, b)]


def scale_grads(a, scale: float):
    return [{k: scale * v for k, v in g.items()} for g in a]


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    diff = np.linalg.norm(np.ravel(analytic) - np.ravel(numeric))
    denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(diff / denom)


def grad_check(net: Network, loss_fn: Callable[[np.ndarray], tuple[float, np.ndarray]], X,
               h: float = 1e-5, analytic=None, n_probe: int | None = None, rng=None,
               reduce: str = "tensor") -> float:
    """Compare backprop gradients with central finite differences.

    ``loss_fn(output)`` must return ``(loss, dloss/doutput)``. The result is
    ``|analytic - numeric| / max(|analytic|, |numeric|, 1e-12)`` with norms
    taken over the probed entries: per parameter tensor and maximized over
    tensors (``reduce="tensor"``), or once over all probed entries of the
    network (``reduce="network"``). The latter stays meaningful when a tensor's
    true gradient is near zero, e.g. the weights feeding a batch-norm unit
    from a single input, where the loss is scale-invariant up to the epsilon.
    ``n_probe`` limits the number of entries checked per tensor (chosen at
    random), which keeps wide layers affordable. The network is left unchanged.
    """
    if reduce not in ("tensor", "network"):
        raise ConfigurationError(f"reduce must be 'tensor' or 'network', got {reduce!r}")
    if analytic is None:
        out, cache = net.forward(X, train=True, update_stats=False)
        _, d_out = loss_fn(out)
        analytic, _ = net.backward(cache, d_out)
    if n_probe is not None and not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)

    def loss_at() -> float:
        out, _ = net.forward(X, train=True, update_stats=False)
        return float(loss_fn(out)[0])

    worst = 0.0
    all_a, all_n = [], []
    for p, g in zip(net.params, analytic):
        for k, v in p.items():
            flat = v.reshape(-1)
            if n_probe is not None and flat.size > n_probe:
                idx = rng.choice(flat.size, size=n_probe, replace=False)
            else:
                idx = np.arange(flat.size)
            num = np.empty(idx.size)
            for j, ix in enumerate(idx):
                orig = flat[ix]
                flat[ix] = orig + h
                lp = loss_at()
                flat[ix] = orig - h
                lm = loss_at()
                flat[ix] = orig
                num[j] = (lp - lm) / (2 * h)
            ana = np.asarray(g[k]).reshape(-1)[idx]
            worst = max(worst, relative_error(ana, num))
            all_a.append(ana)
            all_n.append(num)
    if reduce == "network":
        return relative_error(np.concatenate(all_a), np.concatenate(all_n))
    return worst
