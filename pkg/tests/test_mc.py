
import numpy as np
import pytest

from dpcalib import GammaHyperprior
from dpcalib.bounds import _pieces
from dpcalib.exceptions import DomainError
from dpcalib.mc import (McConfig, RunningMoments, histogram_moments, make_rng, mean_summary,
                        sample_alpha, sample_K_crp, sample_prior_predictive_K, sample_rho,
                        sample_rho_many, sample_w1, variance_summary)
from dpcalib.quadrature import build_rule, marginal_pmf
from dpcalib.weights import rho_moments, w1_quantile, w1_survival

N = 1_000_000
slow = pytest.mark.slow


def test_config_validation():
    with pytest.raises(DomainError):
        McConfig(draws=0)
    with pytest.raises(DomainError):
        McConfig(stick_truncation_tail=0.1)


def test_streams_are_reproducible_and_distinct():
    a = make_rng(7, 0).random(5)
    assert np.array_equal(a, make_rng(7, 0).random(5))
    assert not np.array_equal(a, make_rng(7, 1).random(5))


def test_running_moments_merge():
    x = make_rng(3).normal(size=1001)
    whole = RunningMoments.of(x)
    parts = RunningMoments.of(x[:400]).merge(RunningMoments.of(x[400:]))
    assert parts.count == whole.count
    assert parts.mean == pytest.approx(whole.mean, abs=1e-14)
    assert parts.variance == pytest.approx(np.var(x, ddof=1), rel=1e-12)


def test_crp_sampler_domain():
    with pytest.raises(DomainError):
        sample_K_crp(5, -1.0, make_rng(0))


def test_rho_sampler_truncation_tail():
    cfg = McConfig(draws=1, stick_truncation_tail=1e-12)
    rho = sample_rho(GammaHyperprior(1e6, 1e6), cfg, make_rng(0), size=200)
    assert np.all((rho > 0) & (rho <= 1))


@slow
def test_crp_three_customers():
    k = sample_K_crp(3, 1.0, make_rng(11), size=N)
    for value, p in zip((1, 2, 3), (1 / 3, 1 / 2, 1 / 6)):
        s = mean_summary(k == value)
        assert abs(s.z_score(p)) <= 4


@slow
def test_prior_predictive_K_matches_targets(worked_fit):
    counts = sample_prior_predictive_K(50, worked_fit.hyper, McConfig(draws=N, seed=12))
    mean, var = histogram_moments(counts)
    assert abs(mean.z_score(5.0)) <= 3
    assert abs(var.z_score(10.0)) <= 3
    tv = 0.5 * np.abs(counts / N - marginal_pmf(50, worked_fit.hyper)).sum()
    assert tv <= 0.01


@slow
def test_w1_tail_vague():
    w = sample_w1(GammaHyperprior(1, 1), make_rng(13), N)
    s = mean_summary(w > 0.5)
    assert abs(s.z_score(0.591)) <= 4
    assert abs(s.z_score(w1_survival(0.5, GammaHyperprior(1, 1)).probability)) <= 4


@slow
def test_w1_quantiles():
    h = GammaHyperprior(1.408, 1.077)
    w = sample_w1(h, make_rng(14), N)
    for u in (0.1, 0.25, 0.5, 0.75, 0.9):
        q = w1_quantile(u, h)
        # the empirical cdf at the closed-form quantile is Binomial(N, u) / N
        s = mean_summary(w <= q)
        assert abs(s.z_score(u)) <= 4


@slow
def test_rho_moments_against_stick_breaking():
    h = GammaHyperprior(1.408, 1.077)
    rho = sample_rho_many(h, McConfig(draws=N, seed=15))
    ref = rho_moments(h)
    assert abs(mean_summary(rho).z_score(ref.mean)) <= 3
    assert abs(variance_summary(rho).z_score(ref.variance)) <= 4


@slow
def test_rho_mean_worked_example():
    h = GammaHyperprior(1.407, 1.076)
    s = mean_summary(sample_rho_many(h, McConfig(draws=N, seed=16)))
    assert abs(s.z_score(rho_moments(h).mean)) <= 3
    assert abs(s.estimate - 0.52) <= 0.01


@slow
def test_mixed_e1_bound_against_monte_carlo():
    h = GammaHyperprior(2.0, 1.0)
    alphas = sample_alpha(h, make_rng(17), N)
    e1 = _pieces(50, alphas)[2]
    rule = build_rule(h.a)
    quad_value = rule.normalized_weights @ _pieces(50, rule.alphas(h))[2]
    assert abs(mean_summary(e1).z_score(quad_value)) <= 4
