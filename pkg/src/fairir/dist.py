"""Bernoulli and Beta kernels for instance-weight distributions.

Functions are vectorized over numpy arrays. Probabilities and Beta samples
are kept inside ``[EPS_PROB, 1 - EPS_PROB]`` so logs never reach -inf.
"""
from __future__ import annotations

import numpy as np
from scipy import special as _sp

from .errors import DomainError, NumericError

EPS_PROB = 1e-6
REPARAM_REL_STEP = 1e-5
MIN_PDF = 1e-12


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent, platform-stable PCG64 stream keyed by ``(seed, *stream)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(stream))))


def clamp_prob(p):
    return np.clip(p, EPS_PROB, 1.0 - EPS_PROB)


# -- special functions ---------------------------------------------------

def lgamma(x):
    x = np.asarray(x, dtype=np.float64)
    if np.any(~(x > 0)):
        raise DomainError("lgamma is defined here for x > 0 only")
    return _sp.gammaln(x)


def digamma(x):
    x = np.asarray(x, dtype=np.float64)
    if np.any(~(x > 0)):
        raise DomainError("digamma is defined here for x > 0 only")
    return _sp.digamma(x)


def reg_inc_beta(x, a, b):
    """Regularized incomplete beta I_x(a, b), i.e. the Beta(a, b) CDF at x."""
    x = np.asarray(x, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if np.any((x < 0) | (x > 1)) or np.any(np.isnan(x)):
        raise DomainError("reg_inc_beta needs x in [0, 1]")
    if np.any(~(a > 0)) or np.any(~(b > 0)):
        raise DomainError("reg_inc_beta needs a, b > 0")
    return _sp.betainc(a, b, x)


def log_beta_fn(a, b):
    return lgamma(a) + lgamma(b) - lgamma(np.asarray(a) + np.asarray(b))


# -- Bernoulli -----------------------------------------------------------

def bernoulli_sample(p, rng: np.random.Generator) -> np.ndarray:
    p = clamp_prob(np.asarray(p, dtype=np.float64))
    return (rng.random(p.shape) < p).astype(np.float64)


def bernoulli_log_prob(w, p) -> tuple[np.ndarray, np.ndarray]:
    """``(log P(w; p), d/dp log P(w; p))`` with p clamped."""
    w = np.asarray(w, dtype=np.float64)
    p = clamp_prob(np.asarray(p, dtype=np.float64))
    logp = w * np.log(p) + (1 - w) * np.log1p(-p)
    grad = w / p - (1 - w) / (1 - p)
    return logp, grad


# -- Beta ----------------------------------------------------------------

def beta_sample(a, b, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``w ~ Beta(a, b)`` as a ratio of two Gamma variates.

    Returns ``(w, u)`` where ``u = F(w; a, b)`` is the uniform base noise that
    maps back to ``w`` through the inverse CDF; the implicit pathwise
    gradient in :func:`beta_reparam_grads` differentiates that map.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    a, b = np.broadcast_arrays(a, b)
    g1 = rng.standard_gamma(a)
    g2 = rng.standard_gamma(b)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = g1 / (g1 + g2)
    # both gammas can underflow to 0 for tiny shapes
    w = np.where(np.isfinite(w), w, 0.5)
    w = clamp_prob(w)
    u = reg_inc_beta(w, a, b)
    return w, u


def beta_log_pdf(w, a, b):
    w = np.asarray(w, dtype=np.float64)
    if np.any((w <= 0) | (w >= 1)) or np.any(np.isnan(w)):
        raise DomainError("beta_log_pdf needs w strictly inside (0, 1)")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return (a - 1) * np.log(w) + (b - 1) * np.log1p(-w) - log_beta_fn(a, b)


def beta_score_grads(w, a, b) -> tuple[np.ndarray, np.ndarray]:
    """Partial derivatives of ``log Beta(w; a, b)`` with respect to a and b."""
    w = np.asarray(w, dtype=np.float64)
    if np.any((w <= 0) | (w >= 1)):
        raise DomainError("beta_score_grads needs w strictly inside (0, 1)")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    psi_ab = digamma(a + b)
    return np.log(w) - digamma(a) + psi_ab, np.log1p(-w) - digamma(b) + psi_ab


def beta_reparam_grads(w, a, b, h: float = REPARAM_REL_STEP, strict: bool = True):
    """Implicit pathwise derivatives ``(dw/da, dw/db)`` of a Beta sample.

    Holding the base noise ``u = F(w; a, b)`` fixed, ``dw/dc = -dF/dc / pdf(w)``.
    ``dF/dc`` is taken by central differences with relative step ``h``.

    With ``strict`` a sample whose density is below 1e-12 raises NumericError;
    otherwise such entries come back as NaN so the caller can skip them.
    """
    w = np.asarray(w, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    w, a, b = np.broadcast_arrays(w, a, b)
    pdf = np.exp(beta_log_pdf(w, a, b))
    bad = pdf < MIN_PDF
    if strict and np.any(bad):
        raise NumericError("Beta density at sampled w is below 1e-12 (saturated sample)")
    ha = h * a
    hb = h * b
    dF_da = (reg_inc_beta(w, a + ha, b) - reg_inc_beta(w, a - ha, b)) / (2 * ha)
    dF_db = (reg_inc_beta(w, a, b + hb) - reg_inc_beta(w, a, b - hb)) / (2 * hb)
    safe = np.where(bad, 1.0, pdf)
    dw_da = np.where(bad, np.nan, -dF_da / safe)
    dw_db = np.where(bad, np.nan, -dF_db / safe)
    return dw_da, dw_db
