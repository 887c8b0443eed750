import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from fairir import dist
from fairir.errors import DomainError, NumericError

mpmath.mp.dps = 40
positive = st.floats(0.05, 50.0)
unit = st.floats(0.01, 0.99)


# -- special functions ----------------------------------------------------------

def test_lgamma_factorials():
    assert dist.lgamma(1.0) == 0.0
    assert dist.lgamma(5.0) == pytest.approx(math.log(24), rel=1e-14)


def test_digamma_one_is_minus_euler_gamma():
    assert dist.digamma(1.0) == pytest.approx(-float(mpmath.euler), rel=1e-12)


@pytest.mark.parametrize("x", [0.0, 0.25, 1.0])
def test_reg_inc_beta_uniform(x):
    assert dist.reg_inc_beta(x, 1.0, 1.0) == pytest.approx(x, abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(x=positive)
def test_lgamma_digamma_vs_mpmath(x):
    assert dist.lgamma(x) == pytest.approx(float(mpmath.loggamma(x)), rel=1e-12, abs=1e-13)
    assert dist.digamma(x) == pytest.approx(float(mpmath.digamma(x)), rel=1e-10, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(x=st.floats(0.0, 1.0), a=positive, b=positive)
def test_reg_inc_beta_vs_mpmath(x, a, b):
    ref = float(mpmath.betainc(a, b, 0, x, regularized=True))
    assert abs(dist.reg_inc_beta(x, a, b) - ref) < 1e-10


@pytest.mark.parametrize("fn,args", [(dist.lgamma, (0.0,)), (dist.digamma, (-1.0,)),
                                     (dist.reg_inc_beta, (1.5, 1.0, 1.0)), (dist.reg_inc_beta, (0.5, 0.0, 1.0))])
def test_special_domain_errors(fn, args):
    with pytest.raises(DomainError):
        fn(*args)


# -- Bernoulli ------------------------------------------------------------------

def test_bernoulli_near_degenerate():
    w = dist.bernoulli_sample(np.full(10_000, 1 - 1e-6), dist.make_rng(0))
    assert w.mean() >= 0.999


def test_bernoulli_fair_coin_mean():
    w = dist.bernoulli_sample(np.full(100_000, 0.5), dist.make_rng(1))
    assert abs(w.mean() - 0.5) < 0.006


def test_bernoulli_seed_determinism():
    a = dist.bernoulli_sample(np.full(100, 0.3), dist.make_rng(7))
    b = dist.bernoulli_sample(np.full(100, 0.3), dist.make_rng(7))
    np.testing.assert_array_equal(a, b)


def test_bernoulli_log_prob_examples():
    lp, _ = dist.bernoulli_log_prob(1, 0.5)
    assert lp == pytest.approx(-math.log(2))
    assert dist.bernoulli_log_prob(1, 0.25)[1] == pytest.approx(4.0)
    assert dist.bernoulli_log_prob(0, 0.25)[1] == pytest.approx(-4 / 3)


def test_bernoulli_log_prob_clamped_finite():
    lp, g = dist.bernoulli_log_prob(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    assert np.all(np.isfinite(lp)) and np.all(np.isfinite(g))
    np.testing.assert_allclose(lp, math.log(1e-6), rtol=1e-9)


def test_bernoulli_score_identity():
    p = 0.3
    w = dist.bernoulli_sample(np.full(100_000, p), dist.make_rng(3))
    g = dist.bernoulli_log_prob(w, p)[1]
    assert abs(g.mean()) < 3 * g.std() / math.sqrt(len(g))


# -- Beta -----------------------------------------------------------------------

def test_beta_uniform_mean():
    w, _ = dist.beta_sample(np.ones(100_000), np.ones(100_000), dist.make_rng(0))
    assert abs(w.mean() - 0.5) < 0.004


def test_beta_2_2_moments():
    w, _ = dist.beta_sample(np.full(100_000, 2.0), np.full(100_000, 2.0), dist.make_rng(1))
    assert abs(w.mean() - 0.5) < 0.003
    assert w.var() == pytest.approx(0.05, abs=1.5e-3)


def test_beta_a_1_matches_power_law_cdf():
    a = 2.5
    w, _ = dist.beta_sample(np.full(10_000, a), np.ones(10_000), dist.make_rng(2))
    assert stats.kstest(w, lambda x: np.clip(x, 0, 1) ** a).pvalue > 0.01


def test_beta_sample_inside_unit_interval_and_noise_is_cdf():
    a = np.full(1000, 0.05)
    w, u = dist.beta_sample(a, a, dist.make_rng(3))
    assert np.all((w >= 1e-6) & (w <= 1 - 1e-6))
    np.testing.assert_allclose(u, dist.reg_inc_beta(w, a, a))


def test_beta_sampler_determinism():
    a = dist.beta_sample(np.full(50, 1.5), np.full(50, 2.5), dist.make_rng(9))[0]
    b = dist.beta_sample(np.full(50, 1.5), np.full(50, 2.5), dist.make_rng(9))[0]
    np.testing.assert_array_equal(a, b)


def test_beta_log_pdf_examples():
    assert dist.beta_log_pdf(0.5, 1.0, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert dist.beta_log_pdf(0.5, 2.0, 2.0) == pytest.approx(math.log(1.5), rel=1e-13)


@settings(max_examples=50, deadline=None)
@given(w=unit, a=positive, b=positive)
def test_beta_log_pdf_symmetry_and_scipy(w, a, b):
    assert dist.beta_log_pdf(w, a, b) == pytest.approx(dist.beta_log_pdf(1 - w, b, a), rel=1e-9, abs=1e-9)
    assert dist.beta_log_pdf(w, a, b) == pytest.approx(stats.beta.logpdf(w, a, b), rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("w", [0.0, 1.0, 1.2])
def test_beta_log_pdf_domain(w):
    with pytest.raises(DomainError):
        dist.beta_log_pdf(w, 1.0, 1.0)


def test_beta_score_example():
    da, db = dist.beta_score_grads(0.5, 1.0, 1.0)
    assert da == pytest.approx(math.log(0.5) + 1.0, rel=1e-12)
    assert db == pytest.approx(math.log(0.5) + 1.0, rel=1e-12)


def test_beta_score_matches_finite_differences():
    r = np.random.default_rng(0)
    w = r.uniform(0.05, 0.95, 100)
    a = r.uniform(0.3, 8.0, 100)
    b = r.uniform(0.3, 8.0, 100)
    da, db = dist.beta_score_grads(w, a, b)
    h = 1e-6
    fa = (dist.beta_log_pdf(w, a + h, b) - dist.beta_log_pdf(w, a - h, b)) / (2 * h)
    fb = (dist.beta_log_pdf(w, a, b + h) - dist.beta_log_pdf(w, a, b - h)) / (2 * h)
    scale = np.maximum(np.abs(da), 1.0)
    assert np.max(np.abs(da - fa) / scale) < 1e-6
    assert np.max(np.abs(db - fb) / np.maximum(np.abs(db), 1.0)) < 1e-6


def test_beta_score_identity():
    n = 100_000
    a, b = 1.7, 0.8
    w, _ = dist.beta_sample(np.full(n, a), np.full(n, b), dist.make_rng(4))
    da, db = dist.beta_score_grads(w, a, b)
    for g in (da, db):
        assert abs(g.mean()) < 3 * g.std() / math.sqrt(n)


def test_reparam_closed_form_beta_a_1():
    # F(x) = x^a, so x = u^(1/a) and dx/da = -x ln(u) / a^2
    dwa, _ = dist.beta_reparam_grads(0.5, 1.0, 1.0)
    assert dwa == pytest.approx(-0.5 * math.log(0.5), rel=1e-6)
    assert dwa == pytest.approx(0.3466, abs=1e-4)


def test_reparam_symmetric_median():
    dwa, dwb = dist.beta_reparam_grads(0.5, 2.3, 2.3)
    assert dwa == pytest.approx(-dwb, rel=1e-6)


def test_reparam_matches_common_random_numbers():
    from scipy.special import betaincinv
    r = np.random.default_rng(1)
    a = r.uniform(0.5, 6.0, 100)
    b = r.uniform(0.5, 6.0, 100)
    u = r.uniform(0.05, 0.95, 100)
    w = betaincinv(a, b, u)
    dwa, dwb = dist.beta_reparam_grads(w, a, b)
    h = 1e-6
    fa = (betaincinv(a + h, b, u) - betaincinv(a - h, b, u)) / (2 * h)
    fb = (betaincinv(a, b + h, u) - betaincinv(a, b - h, u)) / (2 * h)
    assert np.max(np.abs(dwa - fa) / np.abs(fa)) < 1e-3
    assert np.max(np.abs(dwb - fb) / np.abs(fb)) < 1e-3


def test_reparam_saturated_sample():
    w = 1e-6
    with pytest.raises(NumericError):
        dist.beta_reparam_grads(w, 40.0, 0.5)
    dwa, dwb = dist.beta_reparam_grads(w, 40.0, 0.5, strict=False)
    assert np.isnan(dwa) and np.isnan(dwb)


def test_pathwise_mean_derivative():
    n = 100_000
    a, b = 2.0, 3.0
    w, _ = dist.beta_sample(np.full(n, a), np.full(n, b), dist.make_rng(5))
    dwa, dwb = dist.beta_reparam_grads(w, a, b)
    assert abs(dwa.mean() - b / (a + b) ** 2) < 1e-2
    assert abs(dwb.mean() + a / (a + b) ** 2) < 1e-2


def test_pathwise_and_score_agree_on_second_moment():
    n = 100_000
    a, b = 2.0, 3.0
    # d/da E[w^2] for E[w^2] = a(a+1) / ((a+b)(a+b+1))
    exact = float(mpmath.diff(lambda t: t * (t + 1) / ((t + b) * (t + b + 1)), a))
    w, _ = dist.beta_sample(np.full(n, a), np.full(n, b), dist.make_rng(6))
    path = 2 * w * dist.beta_reparam_grads(w, a, b)[0]
    score = w ** 2 * dist.beta_score_grads(w, a, b)[0]
    for est in (path, score):
        assert abs(est.mean() - exact) < 3 * est.std() / math.sqrt(n)


def test_make_rng_streams_are_independent_and_stable():
    a = dist.make_rng(5, 1).random(3)
    b = dist.make_rng(5, 2).random(3)
    c = dist.make_rng(5, 1).random(3)
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, c)
