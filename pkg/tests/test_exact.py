import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dpcalib.exact import (antoniak_pmf, build_log_stirling, conditional_moments,
                           conditional_moments_by_summation, log_stirling_table,
                           stirling_row_by_recursion)
from dpcalib.exceptions import DomainError


def test_small_stirling_row():
    t = build_log_stirling(3)
    assert [round(math.exp(t[3, k])) for k in (1, 2, 3)] == [2, 3, 1]
    assert t[3, 4] == -math.inf


def test_row_sum_identity_small():
    t = build_log_stirling(5)
    assert np.logaddexp.reduce(t.row(5)) == pytest.approx(math.log(120.0), abs=1e-12)


def test_diagonal_is_zero():
    t = build_log_stirling(40)
    assert all(t[n, n] == 0.0 for n in range(1, 41))


def test_row_sum_identity_to_300():
    t = log_stirling_table(300)
    for n in (10, 50, 100, 200, 300):
        assert np.logaddexp.reduce(t.row(n)) == pytest.approx(math.lgamma(n + 1), abs=1e-10 * n)


def test_table_against_exact_integers():
    t = build_log_stirling(25)
    exact = stirling_row_by_recursion(25)
    for k, v in enumerate(exact, start=1):
        assert t[25, k] == pytest.approx(math.log(v), rel=1e-13, abs=1e-13)


def test_table_cap(monkeypatch):
    monkeypatch.setenv("DPCALIB_STIRLING_CAP", "10")
    with pytest.raises(DomainError):
        build_log_stirling(11)


def test_crp_three_customers():
    np.testing.assert_allclose(antoniak_pmf(3, 1.0), [1 / 3, 1 / 2, 1 / 6], atol=1e-14)


def test_boundary_limits():
    assert antoniak_pmf(50, 1e-8)[0] >= 1 - 1e-6
    assert antoniak_pmf(10, 1e8)[-1] >= 1 - 1e-5


@settings(max_examples=50, deadline=None)
@given(J=st.integers(1, 300), alpha=st.floats(1e-3, 1e3))
def test_pmf_normalised(J, alpha):
    assert abs(antoniak_pmf(J, alpha).sum() - 1.0) <= 1e-12


def test_conditional_moments_small_case():
    cm = conditional_moments(3, 1.0)
    assert cm.mean == pytest.approx(11 / 6, abs=1e-14)
    assert cm.variance == pytest.approx(17 / 36, abs=1e-14)


@pytest.mark.parametrize("J", [2, 10, 50, 100, 300])
def test_moments_match_pmf(J):
    k = np.arange(1, J + 1)
    for alpha in (0.05, 0.7, 3.0, 40.0):
        p = antoniak_pmf(J, alpha)
        mean = p @ k
        cm = conditional_moments(J, alpha)
        assert cm.mean == pytest.approx(mean, rel=1e-9)
        assert cm.variance == pytest.approx(p @ (k - mean) ** 2, rel=1e-6)


def test_underdispersion_strict():
    alphas = np.geomspace(1e-3, 1e3, 60)
    for J in (2, 5, 50, 300):
        cm = conditional_moments(J, alphas)
        assert np.all(cm.variance < cm.mean)


def test_closed_form_matches_summation():
    alphas = np.geomspace(1e-3, 1e4, 40)
    for J in (2, 30, 65, 200):
        a = conditional_moments(J, alphas)
        b = conditional_moments_by_summation(J, alphas)
        for x, y in zip((a.mean, a.variance, a.d_mean, a.d_variance),
                        (b.mean, b.variance, b.d_mean, b.d_variance)):
            np.testing.assert_allclose(x, y, rtol=1e-9, atol=1e-12)


def test_alpha_derivatives_by_differences():
    for J in (10, 50, 120):
        for alpha in (0.3, 2.0, 15.0):
            h = 1e-6 * alpha
            up, dn = conditional_moments(J, alpha + h), conditional_moments(J, alpha - h)
            cm = conditional_moments(J, alpha)
            assert cm.d_mean == pytest.approx((up.mean - dn.mean) / (2 * h), rel=1e-6)
            assert cm.d_variance == pytest.approx((up.variance - dn.variance) / (2 * h),
                                                  rel=1e-5, abs=1e-8)


def test_single_unit():
    cm = conditional_moments(1, 2.0)
    assert (cm.mean, cm.variance) == (1.0, 0.0)


@pytest.mark.parametrize("alpha", [0.0, -1.0, math.nan])
def test_rejects_bad_alpha(alpha):
    with pytest.raises(DomainError):
        antoniak_pmf(5, alpha)
