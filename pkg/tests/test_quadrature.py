import math

import numpy as np
import pytest
from scipy.integrate import quad

from dpcalib import GammaHyperprior
from dpcalib.exceptions import DomainError
from dpcalib.quadrature import (build_rule, gamma_expectation, marginal_log_pmf_and_gradient,
                                marginal_pmf, marginal_pmf_and_gradient, mixed_moments,
                                moments_and_jacobian, pmf_summary, scores, shape_sensitivity)
from dpcalib.weights import summarize_pmf

GRID_A = (0.3, 0.8, 1.408, 3.0, 8.0)
GRID_B = (0.2, 0.6, 1.077, 2.5, 6.0)


def test_rule_is_normalised():
    for shape in (0.1, 1.0, 5.5, 60.0):
        rule = build_rule(shape, 80)
        assert rule.normalized_weights.sum() == pytest.approx(1.0, abs=1e-13)
        assert np.all(rule.nodes > 0) and np.all(np.diff(rule.nodes) > 0)


def test_rule_integrates_polynomials_exactly():
    shape = 2.3
    rule = build_rule(shape, 20)
    for p in range(0, 10):
        exact = math.exp(math.lgamma(shape + p) - math.lgamma(shape))
        assert rule.normalized_weights @ rule.nodes ** p == pytest.approx(exact, rel=1e-11)


def test_rule_rejects_bad_order():
    with pytest.raises(DomainError):
        build_rule(1.0, 0)


def test_expectation_of_alpha():
    assert gamma_expectation(lambda x: x, GammaHyperprior(1.408, 1.077)) == pytest.approx(
        1.408 / 1.077, abs=1e-12)
    assert round(1.408 / 1.077, 3) == 1.307  # the reported 1.308 comes from unrounded (a, b)


def test_laplace_transform():
    c = math.log(2.0)
    assert gamma_expectation(lambda x: np.exp(-c * x), GammaHyperprior(1, 1)) == pytest.approx(
        1.0 / (1.0 + c), abs=1e-12)


def test_rate_score_has_zero_mean():
    hyper = GammaHyperprior(1.408, 1.077)
    rule = build_rule(hyper.a)
    s_b = scores(hyper, rule.alphas(hyper))[1]
    assert abs(rule.normalized_weights @ s_b) <= 1e-9


def test_weight_sensitivities_sum_to_zero():
    for shape in (0.2, 1.408, 9.0):
        d_nodes, d_weights = shape_sensitivity(build_rule(shape))
        assert abs(d_weights.sum()) <= 1e-12


def test_weight_sensitivities_by_differences():
    shape, h = 1.7, 1e-6
    d_nodes, d_weights = shape_sensitivity(build_rule(shape, 30))
    up, dn = build_rule(shape + h, 30), build_rule(shape - h, 30)
    np.testing.assert_allclose(d_nodes, (up.nodes - dn.nodes) / (2 * h), rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(d_weights, (up.normalized_weights - dn.normalized_weights) / (2 * h),
                               rtol=1e-5, atol=1e-12)


def test_stage1_bias_point():
    mom = mixed_moments(50, GammaHyperprior(2.667, 2.608))
    assert mom.mean == pytest.approx(4.415, abs=2e-3)
    assert mom.variance == pytest.approx(5.618, abs=2e-3)


def test_fitted_point_hits_targets(worked_fit):
    mom = mixed_moments(50, worked_fit.hyper)
    assert mom.mean == pytest.approx(5.0, abs=1e-8)
    assert mom.variance == pytest.approx(10.0, abs=1e-8)
    # the three-decimal rounding alone moves the moments by ~1e-3
    rounded = mixed_moments(50, GammaHyperprior(1.408, 1.077))
    assert rounded.mean == pytest.approx(5.0, abs=2e-3)
    assert rounded.variance == pytest.approx(10.0, abs=2e-3)


def test_vague_prior_mean():
    assert mixed_moments(100, GammaHyperprior(1, 1)).mean == pytest.approx(4.84, abs=5e-3)


def test_moments_against_brute_force_integration():
    hyper = GammaHyperprior(1.6, 1.22)
    from dpcalib.exact import conditional_moments

    def dens(x):
        return math.exp(hyper.a * math.log(hyper.b) + (hyper.a - 1) * math.log(x)
                        - hyper.b * x - math.lgamma(hyper.a))

    m1 = quad(lambda x: dens(x) * conditional_moments(50, x).mean, 0, np.inf, limit=200)[0]
    m2 = quad(lambda x: dens(x) * conditional_moments(50, x).mean ** 2, 0, np.inf, limit=200)[0]
    v1 = quad(lambda x: dens(x) * conditional_moments(50, x).variance, 0, np.inf, limit=200)[0]
    mom = mixed_moments(50, hyper)
    assert mom.mean == pytest.approx(m1, rel=1e-8)
    assert mom.variance == pytest.approx(v1 + m2 - m1 * m1, rel=1e-7)


def test_figure_one_quantities():
    p = marginal_pmf(50, GammaHyperprior(1.60, 1.22))
    mean, var = pmf_summary(p)
    assert mean == pytest.approx(5.05, abs=0.02)
    assert math.sqrt(var) == pytest.approx(3.06, abs=0.02)


def test_worked_example_k_summary(worked_fit):
    s = summarize_pmf(marginal_pmf(50, worked_fit.hyper))
    assert s.median == 4
    assert s.interval90 == (1, 11)


def test_pmf_moments_agree_with_mixed_moments():
    for hyper in (GammaHyperprior(0.5, 0.3), GammaHyperprior(2.0, 1.0), GammaHyperprior(6.8, 2.1)):
        for J in (10, 50, 300):
            mean, var = pmf_summary(marginal_pmf(J, hyper))
            mom = mixed_moments(J, hyper)
            assert mean == pytest.approx(mom.mean, abs=1e-6)
            assert var == pytest.approx(mom.variance, abs=1e-6)


def _fd_jacobian(J, a, b, h=1e-6):
    cols = []
    for da, db in ((h, 0.0), (0.0, h)):
        up = mixed_moments(J, GammaHyperprior(a * math.exp(da), b * math.exp(db)))
        dn = mixed_moments(J, GammaHyperprior(a * math.exp(-da), b * math.exp(-db)))
        scale = a if da else b
        cols.append([(up.mean - dn.mean) / (2 * h * scale),
                     (up.variance - dn.variance) / (2 * h * scale)])
    return np.array(cols).T


def test_jacobian_at_worked_example():
    _, jac = moments_and_jacobian(50, GammaHyperprior(1.408, 1.077))
    np.testing.assert_allclose(jac.matrix, _fd_jacobian(50, 1.408, 1.077), rtol=1e-5)


@pytest.mark.parametrize("a", GRID_A)
@pytest.mark.parametrize("b", GRID_B)
def test_jacobian_grid(a, b):
    _, jac = moments_and_jacobian(50, GammaHyperprior(a, b))
    np.testing.assert_allclose(jac.matrix, _fd_jacobian(50, a, b), rtol=1e-5)


def test_rate_slope_sign():
    assert moments_and_jacobian(50, GammaHyperprior(2, 2))[1].dmean_db < 0


CALIBRATED = [(25, 1.035, 0.5314), (50, 1.408, 1.077), (50, 2.240, 0.5795), (100, 3.578, 1.327),
              (300, 6.772, 2.091), (100, 5.178, 0.3439), (100, 2.992, 1.100)]


@pytest.mark.parametrize("J,a,b", CALIBRATED)
def test_order_doubling_drift(J, a, b):
    hyper = GammaHyperprior(a, b)
    lo = mixed_moments(J, hyper, build_rule(a, 80))
    hi = mixed_moments(J, hyper, build_rule(a, 160))
    assert abs(lo.mean - hi.mean) <= 1e-9
    assert abs(lo.variance - hi.variance) <= 1e-9


@pytest.mark.parametrize("a", [0.1, 0.5, 1.408, 3.0, 8.0])
@pytest.mark.parametrize("b", [0.4, 1.077, 5.0])
def test_order_doubling_relative_drift(a, b):
    # psi(alpha + 1) has a pole at x = -b, so very small rates converge more slowly
    hyper = GammaHyperprior(a, b)
    lo = mixed_moments(50, hyper, build_rule(a, 80))
    hi = mixed_moments(50, hyper, build_rule(a, 160))
    assert abs(lo.mean - hi.mean) <= 1e-9 * hi.mean
    assert abs(lo.variance - hi.variance) <= 1e-9 * hi.variance


def test_pmf_gradient_by_differences():
    a, b, h = 1.7, 1.3, 1e-6
    p, grad = marginal_pmf_and_gradient(30, GammaHyperprior(a, b))
    fd_a = (marginal_pmf(30, GammaHyperprior(a + h, b)) - marginal_pmf(30, GammaHyperprior(a - h, b))) / (2 * h)
    fd_b = (marginal_pmf(30, GammaHyperprior(a, b + h)) - marginal_pmf(30, GammaHyperprior(a, b - h))) / (2 * h)
    np.testing.assert_allclose(grad[0], fd_a, rtol=1e-5, atol=1e-11)
    np.testing.assert_allclose(grad[1], fd_b, rtol=1e-5, atol=1e-11)
    log_p, log_grad = marginal_log_pmf_and_gradient(30, GammaHyperprior(a, b))
    np.testing.assert_allclose(np.exp(log_p), p, rtol=1e-12)
    np.testing.assert_allclose(log_grad, grad / p, rtol=1e-9, atol=1e-12)


def test_rejects_small_design():
    with pytest.raises(DomainError):
        mixed_moments(1, GammaHyperprior(1, 1))
