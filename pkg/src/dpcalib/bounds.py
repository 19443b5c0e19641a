"""Total-variation bounds on the Stage-1 Poisson proxy.

Given alpha, ``S_J = K_J - 1`` is a sum of independent Bernoullis, so Le Cam's
inequality bounds its distance to ``Poisson(lambda_J)``; Pinsker's inequality
then bounds the distance between ``Poisson(lambda_J)`` and the linearized
``Poisson(alpha log J)``. Averaging both over the Gamma hyperprior bounds the
marginal proxy error.
"""

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError
from .quadrature import _resolve_rule
from .specfun import log_gamma, polygamma

GUIDANCE_BANDS = (
    (100, "A1 acceptable as initializer"),
    (30, "A1 + A2 recommended"),
    (10, "A2 essential"),
)
GUIDANCE_SMALL = "prefer exact enumeration / A2-KL"


def _check_J(J):
    if isinstance(J, bool) or int(J) != J or J < 2:
        raise DomainError(f"J must be an integer >= 2, got {J!r}")
    return int(J)


def _pieces(J, alpha):
    # lambda_J, sum p_r^2, e1, kl, e2 for an array of alphas
    lam = alpha * (polygamma(0, alpha + J) - polygamma(0, alpha + 1.0))
    sum_p2 = alpha * alpha * (polygamma(1, alpha + 1.0) - polygamma(1, alpha + J))
    e1 = np.minimum(1.0, 1.0 / lam) * sum_p2
    lam_lin = alpha * math.log(J)
    kl = lam * np.log(lam / lam_lin) + lam_lin - lam
    kl = np.maximum(kl, 0.0)
    e2 = np.minimum(1.0, np.sqrt(0.5 * kl))
    return lam, sum_p2, e1, kl, e2


@dataclass(frozen=True)
class ConditionalBoundReport:
    """Error budget of the Poisson proxy at a fixed concentration."""

    J: int
    alpha: float
    lambda_J: float
    e1_bound: float
    e2_bound: float
    kl_poisson: float
    sum_p_squared: float
    linearization_error: float
    linearization_bound_centered: float
    linearization_bound_uncentered: float

    @property
    def total_bound(self):
        return self.e1_bound + self.e2_bound

    def to_dict(self):
        return {k: getattr(self, k) for k in (
            "J", "alpha", "lambda_J", "e1_bound", "e2_bound", "kl_poisson", "sum_p_squared",
            "linearization_error", "linearization_bound_centered",
            "linearization_bound_uncentered")}


def conditional_bounds(J, alpha):
    """Le Cam and Pinsker bounds for ``K_J - 1 | alpha`` against ``Poisson(alpha log J)``."""
    J = _check_J(J)
    alpha = float(alpha)
    if not math.isfinite(alpha) or alpha <= 0.0:
        raise DomainError(f"alpha must be finite and > 0, got {alpha!r}")
    lam, sum_p2, e1, kl, e2 = (float(v[0]) for v in _pieces(J, np.array([alpha])))
    remainder = alpha * alpha / J + alpha / (2.0 * J) + alpha / (12.0 * J * J)
    return ConditionalBoundReport(
        J=J, alpha=alpha, lambda_J=lam, e1_bound=e1, e2_bound=e2, kl_poisson=kl,
        sum_p_squared=sum_p2,
        linearization_error=abs(lam - alpha * math.log(J)),
        linearization_bound_centered=remainder,
        linearization_bound_uncentered=alpha * abs(polygamma(0, alpha + 1.0)) + remainder)


def stage1_guidance(J):
    """Regime label for how far the Stage-1 proxy can be trusted at design size J."""
    J = _check_J(J)
    for lower, label in GUIDANCE_BANDS:
        if J >= lower:
            return label
    return GUIDANCE_SMALL


def e_sqrt_alpha(hyper):
    """``E[sqrt(alpha)] = Gamma(a + 1/2) / (Gamma(a) sqrt(b))``."""
    return math.exp(log_gamma(hyper.a + 0.5) - log_gamma(hyper.a)) / math.sqrt(hyper.b)


@dataclass(frozen=True)
class MarginalBoundReport:
    """Gamma-averaged proxy error bound with the derived moment bounds."""

    J: int
    hyper: object
    mixed_e1: float
    mixed_e2: float
    total_tv_bound: float
    e_sqrt_alpha: float
    guidance: str
    mean_error_bound: float
    var_error_bound: float

    def to_dict(self):
        return {
            "J": self.J, "hyperprior": self.hyper.to_dict(), "mixed_e1": self.mixed_e1,
            "mixed_e2": self.mixed_e2, "total_tv_bound": self.total_tv_bound,
            "e_sqrt_alpha": self.e_sqrt_alpha, "guidance": self.guidance,
            "mean_error_bound": self.mean_error_bound, "var_error_bound": self.var_error_bound,
        }


def marginal_bounds(J, hyper, rule=None):
    """``E[e1] + E[e2]`` under the hyperprior, by quadrature.

    The moment bounds ``2 J TV`` and ``4 J^2 TV`` are deliberately worst case
    and are reported for reference only.
    """
    J = _check_J(J)
    rule = _resolve_rule(hyper, rule)
    alphas = rule.alphas(hyper)
    _, _, e1, _, e2 = _pieces(J, alphas)
    w = rule.normalized_weights
    m1, m2 = float(w @ e1), float(w @ e2)
    total = m1 + m2
    return MarginalBoundReport(J, hyper, m1, m2, total, e_sqrt_alpha(hyper),
                               stage1_guidance(J), 2.0 * J * total, 4.0 * J * J * total)


__all__ = [
    "ConditionalBoundReport", "MarginalBoundReport", "conditional_bounds",
    "marginal_bounds", "stage1_guidance", "e_sqrt_alpha",
]
