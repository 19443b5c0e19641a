"""Refinements beyond exact moment matching.

Dual-Anchor trades a little K-moment fidelity for a bound on the dominance
probability ``Pr(w1 > t)``; sweeping its weight traces a Pareto frontier.
A2-KL instead fits the whole marginal pmf of K_J to a target pmf, which also
backs the DORO-Uniform and chi-squared DORO baselines.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import gammainc, gammaincc

from .exceptions import DomainError
from .priors import GammaHyperprior
from .quadrature import (DEFAULT_ORDER, build_rule, marginal_log_pmf_and_gradient,
                         mixed_moments, moments_and_jacobian, pmf_summary)
from .tsmm import CalibrationResult, ElicitationTarget, UncertaintySource, tsmm_fit
from .weights import w1_survival

CONSTRAINT_STATUSES = ("satisfied_at_input", "satisfied_after_refinement", "pareto_compromise")
DEFAULT_LAMBDA_GRID = tuple(round(0.1 * i, 1) for i in range(1, 11))
LBFGS_MEMORY = 6


@dataclass(frozen=True)
class DualAnchorConfig:
    """Dominance threshold, tolerance and weighting for the penalized refit."""

    t: float = 0.5
    delta: float = 0.25
    lam: float = 0.7
    trigger_level: float = 0.40
    a_min: float = 0.01
    b_min: float = 0.01
    max_evals: int = 500
    grad_tol: float = 1e-6
    obj_tol: float = 1e-8
    order: int = DEFAULT_ORDER

    def __post_init__(self):
        if not 0.0 < self.t < 1.0:
            raise DomainError(f"threshold t must lie in (0, 1), got {self.t!r}")
        if not 0.0 < self.delta < 1.0:
            raise DomainError(f"delta must lie in (0, 1), got {self.delta!r}")
        if not 0.0 < self.lam <= 1.0:
            raise DomainError(f"lambda must lie in (0, 1], got {self.lam!r}")
        if self.a_min <= 0.0 or self.b_min <= 0.0:
            raise DomainError("box floors must be positive")

    def to_dict(self):
        return {"t": self.t, "delta": self.delta, "lambda": self.lam,
                "trigger_level": self.trigger_level, "a_min": self.a_min, "b_min": self.b_min}


@dataclass(frozen=True)
class TradeoffReport:
    """Before/after summary of a Dual-Anchor refinement."""

    before: GammaHyperprior
    after: GammaHyperprior
    delta_mu_K: float
    delta_var_K: float
    dominance_before: float
    dominance_after: float
    constraint_status: str
    config: DualAnchorConfig
    objective_before: float = float("nan")
    objective_after: float = float("nan")
    warnings: tuple = ()

    def to_dict(self):
        return {
            "before": self.before.to_dict(),
            "after": self.after.to_dict(),
            "delta_mu_K": self.delta_mu_K,
            "delta_var_K": self.delta_var_K,
            "dominance_before": self.dominance_before,
            "dominance_after": self.dominance_after,
            "constraint_status": self.constraint_status,
            "config": self.config.to_dict(),
            "warnings": list(self.warnings),
        }


class _DualObjective:
    """``L = lam * D1 + (1 - lam) * D2`` and its gradient in log-parameters."""

    def __init__(self, target, config, lam):
        self.target = target
        self.config = config
        self.lam = lam
        self.best = (math.inf, None)

    def parts(self, hyper):
        tg, cfg = self.target, self.config
        mom, jac = moments_and_jacobian(tg.J, hyper, build_rule(hyper.a, cfg.order))
        tail = w1_survival(cfg.t, hyper)
        em = (mom.mean - tg.mu_K) / tg.mu_K
        ev = (mom.variance - tg.var_K) / tg.var_K
        d1 = em * em + ev * ev
        excess = max(0.0, tail.probability - cfg.delta)
        d2 = excess * excess
        g1 = (2.0 * em / tg.mu_K) * jac.matrix[0] + (2.0 * ev / tg.var_K) * jac.matrix[1]
        g2 = 2.0 * excess * np.array([tail.grad_a, tail.grad_b])
        return mom, tail.probability, d1, d2, g1, g2

    def __call__(self, eta):
        hyper = GammaHyperprior.from_log_params(eta)
        _, _, d1, d2, g1, g2 = self.parts(hyper)
        value = self.lam * d1 + (1.0 - self.lam) * d2
        grad = (self.lam * g1 + (1.0 - self.lam) * g2) * np.array([hyper.a, hyper.b])
        if value < self.best[0]:
            self.best = (value, np.array(eta, dtype=float))
        return value, grad


def _minimize_dual(target, config, lam, start):
    obj = _DualObjective(target, config, lam)
    eta0 = np.array(start.log_params)
    bounds = [(math.log(config.a_min), None), (math.log(config.b_min), None)]
    eta0 = np.maximum(eta0, [bounds[0][0], bounds[1][0]])
    value0, _ = obj(eta0)
    res = minimize(obj, eta0, jac=True, method="L-BFGS-B", bounds=bounds,
                   options={"maxcor": LBFGS_MEMORY, "maxfun": config.max_evals,
                            "ftol": config.obj_tol, "gtol": config.grad_tol})
    best_value, best_eta = obj.best
    return GammaHyperprior.from_log_params(best_eta), value0, best_value, res


def _optimizer_status(res):
    if res.success:
        return "converged"
    if res.status == 1:
        return "max_iter"
    return "line_search_stall"


def dual_anchor(fit, config=None):
    """Penalized refit of a TSMM result when dominance exceeds ``delta``."""
    config = config or DualAnchorConfig()
    target = fit.target
    if target.var_K <= 0.0:
        raise DomainError("Dual-Anchor normalizes by var_K, which must be positive")
    before = fit.hyper
    p_before = w1_survival(config.t, before).probability
    if p_before <= config.delta:
        report = TradeoffReport(before, before, 0.0, 0.0, p_before, p_before,
                                "satisfied_at_input", config)
        return fit, report

    after, value0, value, res = _minimize_dual(target, config, config.lam, before)
    warnings = []
    if not res.success:
        warnings.append(f"optimizer stopped early: {res.message}")
    if value > value0:
        after, value = before, value0
    mom = mixed_moments(target.J, after, build_rule(after.a, config.order))
    p_after = w1_survival(config.t, after).probability
    status = "satisfied_after_refinement" if p_after <= config.delta else "pareto_compromise"
    report = TradeoffReport(
        before, after, mom.mean - fit.achieved.mean, mom.variance - fit.achieved.variance,
        p_before, p_after, status, config, value0, value, tuple(warnings))
    resid = max(abs(mom.mean - target.mu_K), abs(mom.variance - target.var_K))
    refined = CalibrationResult(
        hyper=after, target=target, achieved=mom, residual_inf_norm=resid,
        method="DualAnchor", iterations=int(res.nit), status=_optimizer_status(res),
        stage1_init=fit.stage1_init, projection_applied=fit.projection_applied)
    return refined, report


@dataclass(frozen=True)
class ParetoPoint:
    lam: float
    hyper: GammaHyperprior
    d1: float
    dominance: float
    achieved_mean_K: float
    achieved_var_K: float
    status: str = "converged"

    def row(self):
        return (self.lam, self.hyper.a, self.hyper.b, self.achieved_mean_K,
                self.achieved_var_K, self.d1, self.dominance)


def _frontier_point(target, config, lam, start):
    try:
        hyper, _, _, res = _minimize_dual(target, config, lam, start)
        status = _optimizer_status(res)
    except Exception as exc:  # recorded per point; the sweep continues
        hyper, status = start, f"failed: {exc}"
    mom, dom, d1, _, _, _ = _DualObjective(target, config, lam).parts(hyper)
    return ParetoPoint(lam, hyper, d1, dom, mom.mean, mom.variance, status)


def pareto_frontier(target, config=None, lambda_grid=DEFAULT_LAMBDA_GRID, fit=None, workers=1):
    """One Dual-Anchor solve per ``lambda``, each started from the TSMM fit."""
    config = config or DualAnchorConfig()
    grid = sorted(float(x) for x in lambda_grid)
    if not grid:
        raise DomainError("lambda grid must be non-empty")
    if grid[0] <= 0.0 or grid[-1] > 1.0:
        raise DomainError("lambda grid values must lie in (0, 1]")
    start = (fit or tsmm_fit(target)).hyper
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(lambda lam: _frontier_point(target, config, lam, start), grid))
    else:
        points = [_frontier_point(target, config, lam, start) for lam in grid]
    return points


def pareto_filter(points):
    """Drop points dominated in both ``d1`` and ``dominance``."""
    keep = []
    for p in points:
        dominated = any(q.d1 <= p.d1 and q.dominance <= p.dominance
                        and (q.d1 < p.d1 or q.dominance < p.dominance) for q in points)
        if not dominated:
            keep.append(p)
    return keep


@dataclass(frozen=True)
class TargetPmf:
    J: int
    probabilities: np.ndarray
    label: str = "custom"

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if p.shape != (self.J,):
            raise DomainError(f"target pmf must have length J={self.J}, got {p.shape}")
        if np.any(p < 0.0) or not np.all(np.isfinite(p)):
            raise DomainError("target pmf entries must be finite and non-negative")
        total = p.sum()
        if total <= 0.0:
            raise DomainError("target pmf has no mass")
        p = p / total
        p.flags.writeable = False
        object.__setattr__(self, "probabilities", p)

    @property
    def mean(self):
        return pmf_summary(self.probabilities)[0]

    @property
    def variance(self):
        return pmf_summary(self.probabilities)[1]


def _check_target_mean(J, mu_K):
    if isinstance(J, bool) or int(J) != J or J < 2:
        raise DomainError(f"J must be an integer >= 2, got {J!r}")
    if not 1.0 <= mu_K <= J:
        raise DomainError(f"mu_K must lie in [1, J], got {mu_K!r}")


def doro_uniform_target(J, mu_K):
    """Uniform mass on ``1..m`` with ``m = min(round(2 mu_K - 1), J)``."""
    _check_target_mean(J, mu_K)
    m = max(1, min(int(round(2.0 * mu_K - 1.0)), J))
    p = np.zeros(J)
    p[:m] = 1.0 / m
    return TargetPmf(J, p, "doro_uniform")


def chisq_doro_target(J, mu_K):
    """Chi-squared(``mu_K``) density binned to ``[k - 1/2, k + 1/2]`` on ``1..J``.

    Bin 1 starts at zero and bin J takes the whole upper tail.
    """
    _check_target_mean(J, mu_K)
    edges = np.arange(J + 1, dtype=float) + 0.5
    edges[0] = 0.0
    # chi-squared(nu) cdf is the regularized lower incomplete gamma P(nu/2, x/2)
    cdf = gammainc(0.5 * mu_K, 0.5 * edges)
    p = np.diff(cdf)
    p[-1] += gammaincc(0.5 * mu_K, 0.5 * edges[-1])
    return TargetPmf(J, p, "chisq_doro")


@dataclass(frozen=True)
class KlOptions:
    order: int = DEFAULT_ORDER
    max_evals: int = 500
    grad_tol: float = 1e-10
    obj_tol: float = 1e-15
    eta_floor: float = math.log(1e-6)


def kl_divergence(target_pmf, hyper, order=DEFAULT_ORDER):
    """``KL(p* || p_{a,b})`` with zero-mass target bins skipped."""
    return _kl_and_grad(target_pmf, hyper, order)[0]


def _kl_and_grad(target_pmf, hyper, order):
    q = target_pmf.probabilities
    log_p, grad = marginal_log_pmf_and_gradient(target_pmf.J, hyper, rule=build_rule(hyper.a, order))
    mask = q > 0.0
    value = float(np.sum(q[mask] * (np.log(q[mask]) - log_p[mask])))
    return max(value, 0.0), -(grad[:, mask] @ q[mask])


def kl_fit(J, target_pmf, init, opts=None):
    """Minimize ``KL(p* || p_{a,b})`` over log-parameters with L-BFGS-B."""
    opts = opts or KlOptions()
    if target_pmf.J != J:
        raise DomainError(f"target pmf is for J={target_pmf.J}, not J={J}")

    def objective(eta):
        hyper = GammaHyperprior.from_log_params(eta)
        value, grad = _kl_and_grad(target_pmf, hyper, opts.order)
        return value, grad * np.array([hyper.a, hyper.b])

    eta0 = np.maximum(np.array(init.log_params), opts.eta_floor)
    res = minimize(objective, eta0, jac=True, method="L-BFGS-B",
                   bounds=[(opts.eta_floor, None)] * 2,
                   options={"maxcor": LBFGS_MEMORY, "maxfun": opts.max_evals,
                            "ftol": opts.obj_tol, "gtol": opts.grad_tol})
    hyper = GammaHyperprior.from_log_params(res.x)
    mom = mixed_moments(J, hyper, build_rule(hyper.a, opts.order))
    mean, var = pmf_summary(target_pmf.probabilities)
    target = ElicitationTarget(J, mean, var, UncertaintySource("direct"))
    resid = max(abs(mom.mean - mean), abs(mom.variance - var))
    status = _optimizer_status(res)
    if status == "line_search_stall" and np.max(np.abs(res.jac)) < 1e-6:
        # L-BFGS-B reports ABNORMAL when the line search cannot improve an already flat point
        status = "converged"
    return CalibrationResult(hyper, target, mom, resid, "A2-KL", int(res.nit), status, init, False,
                             history=(("kl", float(res.fun)),))


__all__ = [
    "DualAnchorConfig", "TradeoffReport", "ParetoPoint", "TargetPmf", "KlOptions",
    "dual_anchor", "pareto_frontier", "pareto_filter", "doro_uniform_target",
    "chisq_doro_target", "kl_fit", "kl_divergence", "DEFAULT_LAMBDA_GRID",
]
