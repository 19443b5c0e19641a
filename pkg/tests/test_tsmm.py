import math

import pytest

from dpcalib import ElicitationTarget, GammaHyperprior, feasibility_check, resolve_target, stage1_init, tsmm_fit
from dpcalib.exceptions import DomainError, InfeasibleTargetError
from dpcalib.quadrature import mixed_moments
from dpcalib.tsmm import NewtonOptions, UncertaintySource, cv, interval, stage1_result, vif

TABLE_C2 = [
    # (J, mu, var, stage-1 (a0, b0), final (a*, b*))
    (25, 5.0, 10.0, (2.667, 2.146), (1.035, 0.531)),
    (50, 5.0, 10.0, (2.667, 2.608), (1.408, 1.077)),
    (50, 10.0, 22.5, (6.000, 2.608), (2.240, 0.579)),
    (100, 10.0, 20.0, (7.364, 3.768), (3.578, 1.327)),
    (300, 15.0, 30.0, (12.250, 4.991), (6.772, 2.091)),
]


def test_vif_levels():
    assert resolve_target(50, 5, vif("medium")).var_K == pytest.approx(10.0)
    assert resolve_target(100, 5, vif("low")).var_K == pytest.approx(20.0)
    assert resolve_target(50, 5, vif("high")).var_K == pytest.approx(6.0)
    with pytest.raises(DomainError):
        vif("extreme")


def test_cv_source():
    assert resolve_target(50, 5, cv(0.6)).var_K == pytest.approx(9.0)


def test_interval_source():
    # z_0.95 = 1.6448536269514722 (mpmath erfinv oracle)
    var = resolve_target(50, 5, interval(1, 11, 0.90)).var_K
    assert var == pytest.approx((10.0 / (2 * 1.6448536269514722)) ** 2, rel=1e-12)
    assert var == pytest.approx(9.24, abs=5e-3)


def test_direct_variance_matches_confidence_form():
    a = resolve_target(50, 5, 10.0)
    b = resolve_target(50, 5, vif("medium"))
    assert (a.J, a.mu_K, a.var_K) == (b.J, b.mu_K, b.var_K)


def test_source_round_trip():
    for src in (vif("low"), cv(0.3), interval(2, 9, 0.8), UncertaintySource("direct")):
        assert UncertaintySource.from_dict(src.to_dict()) == src


def test_feasibility():
    ok = feasibility_check(ElicitationTarget(50, 5, 10))
    assert ok.stage1_feasible and not ok.projection_required
    weak = feasibility_check(ElicitationTarget(50, 5, 3))
    assert not weak.stage1_feasible and weak.projection_required


@pytest.mark.parametrize("J,mu,var,ineq", [
    (50, 0.5, 1.0, "1 <= mu_K <= J"),
    (50, 60.0, 1.0, "1 <= mu_K <= J"),
    (50, 5.0, 700.0, "var_K <= (J-1)^2/4"),
])
def test_hard_infeasibility(J, mu, var, ineq):
    with pytest.raises(InfeasibleTargetError) as info:
        feasibility_check(ElicitationTarget(J, mu, var))
    assert info.value.inequality.replace(" ", "") == ineq.replace(" ", "")


@pytest.mark.parametrize("J,mu,var,init,final", TABLE_C2)
def test_stage1_table(J, mu, var, init, final):
    h = stage1_init(ElicitationTarget(J, mu, var))
    assert h.a == pytest.approx(init[0], abs=1e-3)
    assert h.b == pytest.approx(init[1], abs=1e-3)


def test_stage1_closed_form():
    h = stage1_init(ElicitationTarget(50, 5, 10))
    assert h.a == pytest.approx(16.0 / 6.0, rel=1e-15)
    assert h.b == pytest.approx(4.0 * math.log(50) / 6.0, rel=1e-15)


def test_stage1_harmonic_scaling():
    h = stage1_init(ElicitationTarget(50, 5, 10), scaling="harmonic")
    h49 = sum(1.0 / i for i in range(1, 50))
    assert h.b == pytest.approx(4.0 * h49 / 6.0, rel=1e-12)


@pytest.mark.parametrize("J,mu,var,init,final", TABLE_C2)
def test_stage2_table(J, mu, var, init, final):
    res = tsmm_fit(ElicitationTarget(J, mu, var))
    assert res.status == "converged"
    assert res.iterations <= 10
    assert res.residual_inf_norm <= 1e-8
    assert res.hyper.a == pytest.approx(final[0], abs=2e-3)
    assert res.hyper.b == pytest.approx(final[1], abs=2e-3)


def test_worked_example(worked_fit):
    assert worked_fit.method == "A2-MN"
    assert worked_fit.iterations <= 8
    assert worked_fit.achieved.mean == pytest.approx(5.0, abs=1e-8)
    assert worked_fit.achieved.variance == pytest.approx(10.0, abs=1e-8)
    assert worked_fit.stage1_init.a == pytest.approx(2.667, abs=1e-3)


def test_table_f4_medium_row():
    res = tsmm_fit(resolve_target(100, 10, 22.5))
    assert res.hyper.a == pytest.approx(2.99, abs=2e-2)
    assert res.hyper.b == pytest.approx(1.10, abs=2e-2)


def test_history_records_residual_decrease(worked_fit):
    norms = [row[-1] for row in worked_fit.history]
    assert norms[-1] <= 1e-8
    assert norms[-1] < norms[0]


def test_projected_target_converges():
    res = tsmm_fit(ElicitationTarget(50, 5, 4))
    assert res.projection_applied
    assert res.status == "projected_then_converged"
    assert res.residual_inf_norm <= 1e-8


def test_exactly_infeasible_target_stalls_with_best_iterate():
    res = tsmm_fit(ElicitationTarget(50, 5, 3))
    assert res.status in ("line_search_stall", "max_iter")
    assert not res.converged
    assert res.residual_inf_norm > 1e-8


def test_stage1_result_is_a1():
    res = stage1_result(ElicitationTarget(50, 5, 10))
    assert res.method == "A1" and res.iterations == 0
    assert res.status == "max_iter"
    assert res.achieved.mean == pytest.approx(4.415, abs=2e-3)


def test_max_iter_respected():
    res = tsmm_fit(ElicitationTarget(50, 5, 10), NewtonOptions(max_iter=1))
    assert res.status == "max_iter" and res.iterations == 1


def test_result_reproduces_achieved(worked_fit):
    mom = mixed_moments(50, worked_fit.hyper)
    assert mom.mean == worked_fit.achieved.mean


def test_rejects_bad_design():
    with pytest.raises(DomainError):
        ElicitationTarget(1, 1.0, 0.0)
    with pytest.raises(DomainError):
        GammaHyperprior(0.0, 1.0)
