"""Stick-breaking weight diagnostics under Gamma mixing of the concentration.

Conditionally on alpha the first stick-breaking weight is Beta(1, alpha), so
its law marginalises in closed form against the Gamma hyperprior. The
co-clustering index rho = sum_h w_h^2 is only moment-closed; its first two
moments reduce to ``I_c = E[1/(alpha + c)]`` for ``c = 1, 2, 3``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import CalibrationError, DomainError
from .quadrature import _resolve_rule, marginal_pmf, pmf_summary

RISK_BANDS = ((0.20, "Low"), (0.40, "Moderate"), (0.60, "Substantial"))
RISK_LEVELS = ("Low", "Moderate", "Substantial", "High")
DOMINANCE_TRIGGER = 0.40
DEFAULT_THRESHOLDS = (0.5, 0.9)
QUANTILE_LEVELS = (0.05, 0.10, 0.50, 0.90, 0.95)


def _check_unit(x, name):
    x = float(x)
    if not 0.0 < x < 1.0:
        raise DomainError(f"{name} must lie strictly inside (0, 1), got {x!r}")
    return x


@dataclass(frozen=True)
class W1TailSummary:
    """``Pr(w1 > t)`` and its gradient in ``(a, b)``."""

    threshold: float
    probability: float
    grad_a: float
    grad_b: float

    def to_dict(self):
        return {"threshold": self.threshold, "probability": self.probability,
                "grad_a": self.grad_a, "grad_b": self.grad_b}


def w1_survival(t, hyper):
    """Closed-form dominance probability ``(b / (b + c_t))^a``, ``c_t = -log(1 - t)``."""
    t = _check_unit(t, "threshold t")
    a, b = hyper.a, hyper.b
    c = -math.log1p(-t)
    log_ratio = math.log(b / (b + c))
    prob = math.exp(a * log_ratio)
    return W1TailSummary(t, prob, prob * log_ratio, prob * a * c / (b * (b + c)))


def w1_cdf(x, hyper):
    return 1.0 - w1_survival(x, hyper).probability


def w1_density(x, hyper):
    x = _check_unit(x, "x")
    a, b = hyper.a, hyper.b
    c = -math.log1p(-x)
    return math.exp(math.log(a) + a * math.log(b) - math.log1p(-x) - (a + 1.0) * math.log(b + c))


def w1_quantile(u, hyper):
    u = _check_unit(u, "u")
    a, b = hyper.a, hyper.b
    # 1 - exp(b [1 - (1 - u)^(-1/a)])
    return -math.expm1(-b * math.expm1(-math.log1p(-u) / a))


def _inverse_moments(hyper, rule, shifts):
    rule = _resolve_rule(hyper, rule)
    alphas = rule.alphas(hyper)
    w = rule.normalized_weights
    return [float(w @ (1.0 / (alphas + c))) for c in shifts]


def w1_mean(hyper, rule=None):
    """``E[w1] = E[1 / (1 + alpha)]``."""
    return _inverse_moments(hyper, rule, (1.0,))[0]


@dataclass(frozen=True)
class RhoMoments:
    mean: float
    variance: float


def rho_moments(hyper, rule=None):
    """Mean and variance of the co-clustering index under the hyperprior."""
    i1, i2, i3 = _inverse_moments(hyper, rule, (1.0, 2.0, 3.0))
    second = 2.5 * i1 - 4.0 * i2 + 1.5 * i3
    var = second - i1 * i1
    if var < -1e-10:
        raise CalibrationError(f"co-clustering variance {var:.3e} is negative beyond round-off")
    return RhoMoments(i1, max(var, 0.0))


def classify_risk(p_dom):
    """Band a ``Pr(w1 > 0.5)`` value; boundaries go to the higher band."""
    p = float(p_dom)
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"dominance probability must lie in [0, 1], got {p!r}")
    for upper, label in RISK_BANDS:
        if p < upper:
            return label
    return "High"


@dataclass(frozen=True)
class KSummary:
    mean: float
    variance: float
    mode: int
    median: int
    quantiles: dict

    @property
    def sd(self):
        return math.sqrt(self.variance)

    @property
    def interval90(self):
        return (self.quantiles["5"], self.quantiles["95"])

    def to_dict(self):
        return {"mean": self.mean, "variance": self.variance, "mode": self.mode,
                "median": self.median, "quantiles": dict(self.quantiles)}


def pmf_quantile(pmf, level):
    """Smallest ``k`` with ``Pr(K <= k) >= level``."""
    cdf = np.cumsum(pmf)
    idx = int(np.searchsorted(cdf, level - 1e-12, side="left"))
    return min(idx, len(pmf) - 1) + 1


def summarize_pmf(pmf):
    mean, var = pmf_summary(pmf)
    quantiles = {f"{round(q * 100):d}": pmf_quantile(pmf, q) for q in QUANTILE_LEVELS}
    return KSummary(mean, var, int(np.argmax(pmf)) + 1, quantiles["50"], quantiles)


@dataclass(frozen=True)
class DiagnosticsReport:
    """Interpretive summary of a fitted hyperprior at design size ``J``."""

    J: int
    hyper: object
    k_summary: KSummary
    w1_tails: tuple
    w1_mean: float
    rho_mean: float
    rho_var: float
    risk_level: str
    warnings: list = field(default_factory=list)

    def tail(self, t):
        for s in self.w1_tails:
            if abs(s.threshold - t) < 1e-12:
                return s
        raise KeyError(t)

    @property
    def dominance(self):
        return self.tail(0.5).probability

    def to_dict(self):
        return {
            "J": self.J,
            "k_summary": self.k_summary.to_dict(),
            "w1_tails": [s.to_dict() for s in self.w1_tails],
            "w1_mean": self.w1_mean,
            "rho_mean": self.rho_mean,
            "rho_var": self.rho_var,
            "risk_level": self.risk_level,
            "warnings": list(self.warnings),
        }


def diagnostics(J, hyper, rule=None, thresholds=DEFAULT_THRESHOLDS):
    """K-distribution summary, dominance tails, rho moments and risk band."""
    rule = _resolve_rule(hyper, rule)
    pmf = marginal_pmf(J, hyper, rule=rule)
    k_summary = summarize_pmf(pmf)
    thresholds = tuple(sorted(set(thresholds) | {0.5}))
    tails = tuple(w1_survival(t, hyper) for t in thresholds)
    rho = rho_moments(hyper, rule)
    p_dom = next(s.probability for s in tails if s.threshold == 0.5)
    warnings = []
    if p_dom > DOMINANCE_TRIGGER:
        warnings.append(
            f"Pr(w1 > 0.5) = {p_dom:.3f} exceeds {DOMINANCE_TRIGGER:.2f}: "
            "a single cluster is likely to hold most of the mass; consider Dual-Anchor refinement")
    return DiagnosticsReport(J, hyper, k_summary, tails, rho.mean, rho.mean, rho.variance,
                             classify_risk(p_dom), warnings)


__all__ = [
    "W1TailSummary", "RhoMoments", "KSummary", "DiagnosticsReport", "w1_survival",
    "w1_cdf", "w1_density", "w1_quantile", "w1_mean", "rho_moments", "classify_risk",
    "pmf_quantile", "summarize_pmf", "diagnostics", "RISK_LEVELS", "DOMINANCE_TRIGGER",
]
