"""Two-stage moment matching for the Gamma hyperprior on a DP concentration.

Stage 1 inverts the shifted Poisson-Gamma (negative binomial) proxy in closed
form. Stage 2 runs damped Newton on the exact mixed moments of K_J, working
in log-parameters so positivity never has to be enforced explicitly.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .exceptions import DomainError, InfeasibleTargetError
from .priors import GammaHyperprior
from .quadrature import DEFAULT_ORDER, build_rule, moments_and_jacobian
from .specfun import harmonic_number

VIF_LEVELS = {"high": 1.5, "medium": 2.5, "low": 5.0}
SCALINGS = ("log_J", "harmonic")
STATUSES = ("converged", "projected_then_converged", "max_iter", "line_search_stall")
METHODS = ("A1", "A2-MN", "A2-KL", "DualAnchor")


@dataclass(frozen=True)
class UncertaintySource:
    """How the target variance was obtained from the elicitation."""

    kind: str
    level: str = None
    value: float = None
    k_lo: float = None
    k_hi: float = None
    coverage: float = None

    def to_dict(self):
        out = {"kind": self.kind}
        if self.kind == "vif":
            out.update(level=self.level, vif=VIF_LEVELS[self.level])
        elif self.kind == "cv":
            out["cv"] = self.value
        elif self.kind == "interval":
            out.update(k_lo=self.k_lo, k_hi=self.k_hi, coverage=self.coverage)
        return out

    @classmethod
    def from_dict(cls, data):
        kind = data["kind"]
        if kind == "vif":
            return cls("vif", level=data["level"])
        if kind == "cv":
            return cls("cv", value=data["cv"])
        if kind == "interval":
            return cls("interval", k_lo=data["k_lo"], k_hi=data["k_hi"], coverage=data["coverage"])
        return cls("direct")


def vif(level):
    if level not in VIF_LEVELS:
        raise DomainError(f"confidence level must be one of {sorted(VIF_LEVELS)}, got {level!r}")
    return UncertaintySource("vif", level=level)


def cv(value):
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise DomainError(f"coefficient of variation must be > 0, got {value!r}")
    return UncertaintySource("cv", value=value)


def interval(k_lo, k_hi, coverage):
    return UncertaintySource("interval", k_lo=float(k_lo), k_hi=float(k_hi),
                             coverage=float(coverage))


@dataclass(frozen=True)
class ElicitationTarget:
    """Design size and the elicited mean and variance of ``K_J``."""

    J: int
    mu_K: float
    var_K: float
    uncertainty_source: UncertaintySource = field(default_factory=lambda: UncertaintySource("direct"))

    def __post_init__(self):
        if isinstance(self.J, bool) or int(self.J) != self.J or self.J < 2:
            raise DomainError(f"J must be an integer >= 2, got {self.J!r}")
        object.__setattr__(self, "J", int(self.J))
        for name in ("mu_K", "var_K"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)

    @property
    def popoviciu_bound(self):
        return (self.J - 1) ** 2 / 4.0

    def to_dict(self):
        return {"J": self.J, "mu_K": self.mu_K, "var_K": self.var_K,
                "uncertainty_source": self.uncertainty_source.to_dict()}


def _check_mean(J, mu_K):
    if not 1.0 <= mu_K <= J:
        raise InfeasibleTargetError(
            f"mu_K={mu_K!r} violates 1 <= mu_K <= J={J}", inequality="1 <= mu_K <= J")


def resolve_target(J, mu_K, spec):
    """Build an :class:`ElicitationTarget` from a mean and an uncertainty spec.

    ``spec`` is either a number (a directly elicited variance) or an
    :class:`UncertaintySource` of kind ``vif``, ``cv`` or ``interval``.
    """
    if isinstance(J, bool) or int(J) != J or J < 2:
        raise DomainError(f"J must be an integer >= 2, got {J!r}")
    J = int(J)
    mu_K = float(mu_K)
    if not math.isfinite(mu_K):
        raise DomainError(f"mu_K must be finite, got {mu_K!r}")
    _check_mean(J, mu_K)
    if not isinstance(spec, UncertaintySource):
        return ElicitationTarget(J, mu_K, float(spec), UncertaintySource("direct"))
    if spec.kind == "vif":
        var_K = VIF_LEVELS[spec.level] * (mu_K - 1.0)
    elif spec.kind == "cv":
        var_K = (spec.value * mu_K) ** 2
    elif spec.kind == "interval":
        lo, hi, q = spec.k_lo, spec.k_hi, spec.coverage
        if not (1.0 <= lo < hi <= J):
            raise DomainError(f"interval needs 1 <= k_lo < k_hi <= J, got ({lo}, {hi})")
        if not 0.0 < q < 1.0:
            raise DomainError(f"interval coverage must lie in (0, 1), got {q!r}")
        z = ndtri(0.5 * (1.0 + q))
        var_K = ((hi - lo) / (2.0 * z)) ** 2
    elif spec.kind == "direct":
        raise DomainError("a direct uncertainty source needs a numeric variance")
    else:
        raise DomainError(f"unknown uncertainty source {spec.kind!r}")
    return ElicitationTarget(J, mu_K, var_K, spec)


@dataclass(frozen=True)
class Feasibility:
    """Outcome of screening a target: hard checks passed, projection flag."""

    stage1_feasible: bool
    projection_required: bool
    message: str


def feasibility_check(target):
    """Hard support checks, plus the softer Stage-1 proxy condition.

    Violating ``1 <= mu_K <= J`` or ``0 <= var_K <= (J-1)^2/4`` raises
    :class:`InfeasibleTargetError`. A variance at or below ``mu_K - 1`` is only
    flagged: the proxy cannot represent it, but the exact model may.
    """
    _check_mean(target.J, target.mu_K)
    bound = target.popoviciu_bound
    if target.var_K < 0.0:
        raise InfeasibleTargetError(f"var_K={target.var_K!r} is negative", inequality="var_K >= 0")
    if target.var_K > bound:
        raise InfeasibleTargetError(
            f"var_K={target.var_K:g} exceeds the Popoviciu bound (J-1)^2/4 = {bound:g}",
            inequality="var_K <= (J-1)^2/4")
    mu0 = target.mu_K - 1.0
    if target.var_K <= mu0:
        return Feasibility(False, True,
                           f"var_K={target.var_K:g} <= mu_K-1={mu0:g}: stage-1 projection required")
    return Feasibility(True, False, "feasible")


def _scaling_constant(J, scaling):
    if scaling == "log_J":
        return math.log(J)
    if scaling == "harmonic":
        return harmonic_number(J - 1)
    raise DomainError(f"scaling must be one of {SCALINGS}, got {scaling!r}")


def stage1_init(target, scaling="log_J"):
    """Closed-form negative-binomial inversion, projecting if needed."""
    return _stage1(target, scaling)[0]


def _stage1(target, scaling="log_J"):
    mu0 = target.mu_K - 1.0
    if mu0 <= 0.0:
        raise DomainError(f"stage 1 needs mu_K > 1, got {target.mu_K!r}")
    c_J = _scaling_constant(target.J, scaling)
    eps = max(1e-8, 1e-6 * mu0)
    var_eff = max(target.var_K, mu0 + eps)
    excess = var_eff - mu0
    return GammaHyperprior(mu0 * mu0 / excess, mu0 * c_J / excess), var_eff != target.var_K


@dataclass(frozen=True)
class NewtonOptions:
    """Tolerances and safeguards for the Stage-2 Newton iteration."""

    order: int = DEFAULT_ORDER
    tol_F: float = 1e-8
    tol_eta: float = 1e-10
    max_iter: int = 20
    armijo_c: float = 0.5
    min_lambda: float = 1e-8
    det_floor: float = 1e-12
    ridge: float = 1e-8
    eta_floor: float = math.log(1e-6)
    eta_ceiling: float = math.log(1e10)
    scaling: str = "log_J"


@dataclass(frozen=True)
class CalibrationResult:
    """A fitted hyperprior with the moments it achieves and how it got there."""

    hyper: GammaHyperprior
    target: ElicitationTarget
    achieved: object
    residual_inf_norm: float
    method: str
    iterations: int
    status: str
    stage1_init: GammaHyperprior
    projection_applied: bool
    history: tuple = ()

    @property
    def converged(self):
        return self.status in ("converged", "projected_then_converged")


def _residual(target, hyper, order):
    rule = build_rule(hyper.a, order)
    mom, jac = moments_and_jacobian(target.J, hyper, rule)
    f = np.array([mom.mean - target.mu_K, mom.variance - target.var_K])
    return mom, jac, f


def tsmm_fit(target, opts=None):
    """Stage 1 followed by log-parameter Newton on the exact moments."""
    opts = opts or NewtonOptions()
    feasibility_check(target)
    init, projected = _stage1(target, opts.scaling)

    eta = np.array(init.log_params)
    hyper = init
    mom, jac, f = _residual(target, hyper, opts.order)
    fnorm = float(np.linalg.norm(f))
    best = (fnorm, hyper, mom, f)
    history = [(0, hyper.a, hyper.b, float(np.max(np.abs(f))))]
    status = None
    it = 0
    while True:
        if np.max(np.abs(f)) <= opts.tol_F:
            status = "converged"
            break
        if it >= opts.max_iter:
            status = "max_iter"
            break
        it += 1
        jac_g = jac.matrix * np.array([hyper.a, hyper.b])[None, :]
        if abs(np.linalg.det(jac_g)) < opts.det_floor:
            jac_g = jac_g + opts.ridge * np.eye(2)
        step = -np.linalg.solve(jac_g, f)

        lam = 1.0
        accepted = False
        while lam >= opts.min_lambda:
            cand_eta = np.clip(eta + lam * step, opts.eta_floor, opts.eta_ceiling)
            cand = GammaHyperprior.from_log_params(cand_eta)
            c_mom, c_jac, c_f = _residual(target, cand, opts.order)
            c_norm = float(np.linalg.norm(c_f))
            if c_norm <= (1.0 - opts.armijo_c * lam) * fnorm:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            status = "line_search_stall"
            break
        moved = float(np.max(np.abs(cand_eta - eta)))
        eta, hyper, mom, jac, f, fnorm = cand_eta, cand, c_mom, c_jac, c_f, c_norm
        history.append((it, hyper.a, hyper.b, float(np.max(np.abs(f)))))
        if fnorm < best[0]:
            best = (fnorm, hyper, mom, f)
        if np.max(np.abs(f)) > opts.tol_F and moved < opts.tol_eta:
            status = "line_search_stall"
            break

    if status != "converged":
        _, hyper, mom, f = best
    elif projected:
        status = "projected_then_converged"
    return CalibrationResult(
        hyper=hyper, target=target, achieved=mom,
        residual_inf_norm=float(np.max(np.abs(f))), method="A2-MN", iterations=it,
        status=status, stage1_init=init, projection_applied=projected,
        history=tuple(history))


def stage1_result(target, opts=None):
    """Wrap the Stage-1 initializer as a :class:`CalibrationResult` (method A1)."""
    opts = opts or NewtonOptions()
    feasibility_check(target)
    init, projected = _stage1(target, opts.scaling)
    mom, _, f = _residual(target, init, opts.order)
    resid = float(np.max(np.abs(f)))
    status = "converged" if resid <= opts.tol_F else "max_iter"
    return CalibrationResult(init, target, mom, resid, "A1", 0, status, init, projected)


__all__ = [
    "VIF_LEVELS", "UncertaintySource", "ElicitationTarget", "Feasibility",
    "NewtonOptions", "CalibrationResult", "resolve_target", "feasibility_check",
    "stage1_init", "stage1_result", "tsmm_fit", "vif", "cv", "interval",
]
