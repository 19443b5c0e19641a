"""Generalized Gauss-Laguerre quadrature for expectations under alpha ~ Gamma(a, b).

With ``x = b * alpha`` every Gamma expectation becomes an integral against
``x^(a-1) e^-x / Gamma(a)``; the nodes and weights for that kernel come from the
eigen-decomposition of the Laguerre Jacobi matrix (Golub-Welsch).
"""

import threading
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal

from .exact import antoniak_log_pmf, antoniak_pmf, conditional_moments, log_stirling_table
from .exceptions import CalibrationError, DomainError
from .priors import GammaHyperprior
from .specfun import polygamma

DEFAULT_ORDER = 80
MAX_ORDER = 512


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes ``x_m`` and normalised weights for ``x^(shape-1) e^-x / Gamma(shape)``."""

    shape: float
    order: int
    nodes: np.ndarray
    normalized_weights: np.ndarray

    def alphas(self, hyper):
        """Map nodes to concentration values ``alpha_m = x_m / b``."""
        return self.nodes / hyper.b


def _jacobi_eigen(shape, order):
    n = np.arange(order, dtype=float)
    diag = 2.0 * n + shape          # 2n + (shape - 1) + 1
    k = n[1:]
    offdiag = np.sqrt(k * (k + shape - 1.0))
    try:
        nodes, vecs = eigh_tridiagonal(diag, offdiag)
    except (LinAlgError, ValueError) as exc:
        raise CalibrationError(
            f"Golub-Welsch eigen-solve failed for shape={shape!r}, order={order}: {exc}") from exc
    return nodes, vecs, k, offdiag


def _golub_welsch(shape, order):
    nodes, vecs, _, _ = _jacobi_eigen(shape, order)
    weights = vecs[0, :] ** 2
    weights = weights / weights.sum()
    if not (np.all(np.isfinite(nodes)) and np.all(nodes > 0.0) and np.all(weights >= 0.0)):
        raise CalibrationError(
            f"Golub-Welsch produced invalid nodes for shape={shape!r}, order={order}")
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


_cache_lock = threading.Lock()
_rule_cache = {}
_CACHE_LIMIT = 512


def build_rule(shape, order=DEFAULT_ORDER):
    """Quadrature rule for Gamma shape ``shape`` with ``order`` nodes (cached)."""
    shape = float(shape)
    if not np.isfinite(shape) or shape <= 0.0:
        raise DomainError(f"quadrature shape must be finite and > 0, got {shape!r}")
    if isinstance(order, bool) or int(order) != order or not 2 <= order <= MAX_ORDER:
        raise DomainError(f"quadrature order must be an integer in [2, {MAX_ORDER}], got {order!r}")
    order = int(order)
    key = (round(shape, 12), order)
    with _cache_lock:
        rule = _rule_cache.get(key)
    if rule is not None:
        return rule
    nodes, weights = _golub_welsch(shape, order)
    rule = QuadratureRule(shape, order, nodes, weights)
    with _cache_lock:
        if len(_rule_cache) >= _CACHE_LIMIT:
            _rule_cache.pop(next(iter(_rule_cache)))
        _rule_cache.setdefault(key, rule)
    return rule


_sens_lock = threading.Lock()
_sens_cache = {}


def shape_sensitivity(rule):
    """``(d nodes / d shape, d weights / d shape)`` for a built rule.

    First-order eigen-perturbation of the Jacobi matrix: node derivatives are
    the diagonal of ``V' T_a V`` and weight derivatives follow from the
    perturbed first eigenvector components.
    """
    key = (round(rule.shape, 12), rule.order)
    with _sens_lock:
        hit = _sens_cache.get(key)
    if hit is not None:
        return hit
    nodes, vecs, k, offdiag = _jacobi_eigen(rule.shape, rule.order)
    d_off = k / (2.0 * offdiag)
    # C = V^T T_a V with T_a = I + offdiag(d_off)
    tv = vecs.copy()
    tv[:-1, :] += d_off[:, None] * vecs[1:, :]
    tv[1:, :] += d_off[:, None] * vecs[:-1, :]
    c = vecs.T @ tv
    d_nodes = np.diag(c).copy()
    gaps = nodes[None, :] - nodes[:, None]
    np.fill_diagonal(gaps, np.inf)
    d_first = vecs[0, :] @ (c / gaps)
    d_weights = 2.0 * vecs[0, :] * d_first
    d_weights -= rule.normalized_weights * d_weights.sum()
    d_nodes.flags.writeable = False
    d_weights.flags.writeable = False
    out = (d_nodes, d_weights)
    with _sens_lock:
        if len(_sens_cache) >= _CACHE_LIMIT:
            _sens_cache.pop(next(iter(_sens_cache)))
        _sens_cache.setdefault(key, out)
    return out


def _resolve_rule(hyper, rule, order=DEFAULT_ORDER):
    if rule is None:
        return build_rule(hyper.a, order)
    if abs(rule.shape - hyper.a) > 1e-12 * max(1.0, hyper.a):
        raise DomainError(
            f"quadrature rule built for shape {rule.shape!r} used with a={hyper.a!r}")
    return rule


def _check_finite(values, alphas, what):
    bad = ~np.isfinite(values)
    if np.any(bad):
        m = int(np.argmax(bad.reshape(len(alphas), -1).any(axis=1)))
        raise CalibrationError(f"{what} is not finite at node {m} (alpha={alphas[m]!r})")


def gamma_expectation(g, hyper, rule=None):
    """``E[g(alpha)]`` for vectorised ``g`` under ``hyper``."""
    rule = _resolve_rule(hyper, rule)
    alphas = rule.alphas(hyper)
    values = np.asarray(g(alphas), dtype=float)
    if values.shape != alphas.shape:
        values = np.broadcast_to(values, alphas.shape)
    _check_finite(values, alphas, "integrand")
    return float(rule.normalized_weights @ values)


def scores(hyper, alphas):
    """Gamma log-density gradients ``(s_a, s_b)`` at the given alphas."""
    s_a = np.log(hyper.b) - polygamma(0, hyper.a) + np.log(alphas)
    s_b = hyper.a / hyper.b - alphas
    return s_a, s_b


@dataclass(frozen=True)
class MixedMoments:
    """``E[K_J]`` and ``Var(K_J)`` under Gamma mixing, plus their pieces."""

    mean: float
    variance: float
    m1: float
    m2: float
    v1: float


@dataclass(frozen=True)
class MomentJacobian:
    """``matrix[i, j] = d(mean, variance)_i / d(a, b)_j``."""

    matrix: np.ndarray

    @property
    def dmean_da(self):
        return float(self.matrix[0, 0])

    @property
    def dmean_db(self):
        return float(self.matrix[0, 1])

    @property
    def dvar_da(self):
        return float(self.matrix[1, 0])

    @property
    def dvar_db(self):
        return float(self.matrix[1, 1])


def _node_moments(J, hyper, rule):
    alphas = rule.alphas(hyper)
    cm = conditional_moments(J, alphas)
    kappa, v = cm.mean, cm.variance
    _check_finite(kappa, alphas, "conditional mean")
    _check_finite(v, alphas, "conditional variance")
    return alphas, kappa, v


def _assemble(w, kappa, v):
    m1 = float(w @ kappa)
    m2 = float(w @ (kappa * kappa))
    v1 = float(w @ v)
    variance = v1 + m2 - m1 * m1
    return MixedMoments(m1, max(variance, 0.0), m1, m2, v1)


def _check_J(J):
    if isinstance(J, bool) or int(J) != J or J < 2:
        raise DomainError(f"J must be an integer >= 2, got {J!r}")
    return int(J)


def mixed_moments(J, hyper, rule=None):
    """Prior-predictive mean and variance of ``K_J`` (law of total variance)."""
    J = _check_J(J)
    rule = _resolve_rule(hyper, rule)
    _, kappa, v = _node_moments(J, hyper, rule)
    return _assemble(rule.normalized_weights, kappa, v)


def _shape_derivative(rule, hyper, values, slopes):
    # d/da of sum_m w_m(a) h(x_m(a) / b) for each column of values/slopes
    d_nodes, d_weights = shape_sensitivity(rule)
    return d_weights @ values + (rule.normalized_weights * d_nodes / hyper.b) @ slopes


def moments_and_jacobian(J, hyper, rule=None):
    """Mixed moments and their ``(a, b)`` Jacobian from one pass over the nodes.

    Both columns are exact derivatives of the quadrature sum rather than
    quadratures of the Gamma score: the shape score carries ``log(alpha)``,
    which Gauss-Laguerre integrates poorly for small shapes, and the rate
    score loses digits once the nodes spread over several decades. Since
    ``alpha_m = x_m / b``, the rate column is ``-sum_m w_m h'(alpha_m) alpha_m / b``.
    """
    J = _check_J(J)
    rule = _resolve_rule(hyper, rule)
    alphas = rule.alphas(hyper)
    cm = conditional_moments(J, alphas)
    kappa, v = cm.mean, cm.variance
    _check_finite(kappa, alphas, "conditional mean")
    _check_finite(v, alphas, "conditional variance")
    w = rule.normalized_weights
    mom = _assemble(w, kappa, v)

    values = np.column_stack([kappa, kappa * kappa, v])
    slopes = np.column_stack([cm.d_mean, 2.0 * kappa * cm.d_mean, cm.d_variance])
    d_a = _shape_derivative(rule, hyper, values, slopes)
    d_b = -(w * alphas / hyper.b) @ slopes

    jac = np.empty((2, 2))
    for col, (dm1, dm2, dv1) in enumerate((d_a, d_b)):
        jac[0, col] = dm1
        jac[1, col] = dv1 + dm2 - 2.0 * mom.m1 * dm1
    return mom, MomentJacobian(jac)


def moment_jacobian(J, hyper, rule=None):
    return moments_and_jacobian(J, hyper, rule)[1]


def _conditional_pmf_matrix(J, hyper, rule, table):
    if table is None:
        table = log_stirling_table(J)
    alphas = rule.alphas(hyper)
    return alphas, antoniak_pmf(J, alphas, table)


def marginal_pmf(J, hyper, table=None, rule=None):
    """``Pr(K_J = k | a, b)`` for ``k = 1..J`` (index ``k - 1``)."""
    J = _check_J(J)
    rule = _resolve_rule(hyper, rule)
    _, cond = _conditional_pmf_matrix(J, hyper, rule, table)
    p = rule.normalized_weights @ cond
    return p / p.sum()


def marginal_pmf_and_gradient(J, hyper, table=None, rule=None):
    """Marginal pmf and ``d p(k) / d(a, b)`` with shape ``(2, J)``."""
    J = _check_J(J)
    rule = _resolve_rule(hyper, rule)
    alphas, cond = _conditional_pmf_matrix(J, hyper, rule, table)
    w = rule.normalized_weights
    p = w @ cond
    # d Pr(K=k|alpha) / d alpha = Pr(K=k|alpha) (k - kappa(alpha)) / alpha
    kappa = conditional_moments(J, alphas).mean
    k = np.arange(1, J + 1, dtype=float)
    slopes = cond * (k[None, :] - kappa[:, None]) / alphas[:, None]
    grad = np.vstack([_shape_derivative(rule, hyper, cond, slopes),
                      -(w * alphas / hyper.b) @ slopes])
    return p, grad


def marginal_log_pmf_and_gradient(J, hyper, table=None, rule=None):
    """``log p(k)`` and ``d log p(k) / d(a, b)``, evaluated entirely in log space.

    Used where ``p(k)`` may underflow but still carries target mass.
    """
    J = _check_J(J)
    rule = _resolve_rule(hyper, rule)
    if table is None:
        table = log_stirling_table(J)
    alphas = rule.alphas(hyper)
    log_cond = antoniak_log_pmf(J, alphas, table)
    with np.errstate(divide="ignore"):
        log_w = np.log(rule.normalized_weights)
    joint = log_w[:, None] + log_cond
    hi = joint.max(axis=0)
    log_p = hi + np.log(np.exp(joint - hi[None, :]).sum(axis=0))
    # r[m, k] = Pr(K=k | alpha_m) / p(k)
    ratio = np.exp(log_cond - log_p[None, :])
    kappa = conditional_moments(J, alphas).mean
    k = np.arange(1, J + 1, dtype=float)
    centred = ratio * (k[None, :] - kappa[:, None])
    d_nodes, d_weights = shape_sensitivity(rule)
    w = rule.normalized_weights
    grad_a = d_weights @ ratio + (w * d_nodes / (alphas * hyper.b)) @ centred
    grad_b = -(w / hyper.b) @ centred
    return log_p, np.vstack([grad_a, grad_b])


def pmf_summary(pmf):
    """Mean and variance of a pmf supported on ``1..len(pmf)``."""
    k = np.arange(1, len(pmf) + 1, dtype=float)
    mean = float(pmf @ k)
    return mean, float(pmf @ (k - mean) ** 2)


__all__ = [
    "DEFAULT_ORDER", "QuadratureRule", "MixedMoments", "MomentJacobian",
    "GammaHyperprior", "build_rule", "gamma_expectation", "mixed_moments",
    "moment_jacobian", "moments_and_jacobian", "marginal_pmf",
    "marginal_pmf_and_gradient", "marginal_log_pmf_and_gradient", "scores", "shape_sensitivity", "pmf_summary",
]
