"""Scalar special functions: log-gamma, polygamma of order 0-2, log-space sums
and the upper incomplete gamma function.

The polygamma family accepts scalars or numpy arrays; every other routine is
scalar. NaN never propagates silently: it is rejected with :class:`DomainError`.
"""

import math

import numpy as np

from .exceptions import ConvergenceError, DomainError

EULER_GAMMA = 0.57721566490153286061

# B_2k for k = 1..7
_BERNOULLI = (1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0,
              5.0 / 66.0, -691.0 / 2730.0, 7.0 / 6.0)

_SHIFT_THRESHOLD = 10.0
_GAMMA_ITER_CAP = 500
_GAMMA_EPS = 1e-16


def _check_positive_scalar(x, name="x"):
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"{name} must be finite and > 0, got {x!r}")
    return x


def log_gamma(x):
    """Natural log of the gamma function for finite ``x > 0``."""
    x = _check_positive_scalar(x)
    return math.lgamma(x)


def _asymptotic(order, x):
    inv = 1.0 / x
    inv2 = inv * inv
    if order == 0:
        acc = np.zeros_like(x)
        p = inv2.copy()
        for k, b in enumerate(_BERNOULLI, start=1):
            acc += b / (2 * k) * p
            p = p * inv2
        return np.log(x) - 0.5 * inv - acc
    if order == 1:
        acc = np.zeros_like(x)
        p = inv2 * inv
        for b in _BERNOULLI:
            acc += b * p
            p = p * inv2
        return inv + 0.5 * inv2 + acc
    acc = np.zeros_like(x)
    p = inv2 * inv2
    for k, b in enumerate(_BERNOULLI, start=1):
        acc += (2 * k + 1) * b * p
        p = p * inv2
    return -inv2 - inv2 * inv - acc


def polygamma(order, x):
    """Digamma (order 0), trigamma (1) or tetragamma (2) at ``x > 0``.

    Arguments below 10 are pushed upward with the recurrence
    ``psi_n(x) = psi_n(x + 1) - (-1)^n n! / x^(n+1)`` and the shifted value is
    evaluated with a seven-term asymptotic expansion.
    """
    if order not in (0, 1, 2):
        raise DomainError(f"polygamma order must be 0, 1 or 2, got {order!r}")
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise DomainError("polygamma requires finite x > 0")
    scalar = arr.ndim == 0
    z = np.atleast_1d(arr).copy()
    correction = np.zeros_like(z)
    need = z < _SHIFT_THRESHOLD
    while np.any(need):
        zi = z[need]
        if order == 0:
            correction[need] -= 1.0 / zi
        elif order == 1:
            correction[need] += 1.0 / (zi * zi)
        else:
            correction[need] -= 2.0 / (zi * zi * zi)
        z[need] = zi + 1.0
        need = z < _SHIFT_THRESHOLD
    out = _asymptotic(order, z) + correction
    return float(out[0]) if scalar else out.reshape(arr.shape)


def digamma(x):
    return polygamma(0, x)


def trigamma(x):
    return polygamma(1, x)


def tetragamma(x):
    return polygamma(2, x)


def _check_extended(v):
    v = float(v)
    if math.isnan(v) or v == math.inf:
        raise DomainError(f"expected a finite real or -inf, got {v!r}")
    return v


def log_add_exp(u, v):
    """``log(exp(u) + exp(v))`` with ``-inf`` as the identity element."""
    u = _check_extended(u)
    v = _check_extended(v)
    hi, lo = (u, v) if u >= v else (v, u)
    if lo == -math.inf:
        return hi
    return hi + math.log1p(math.exp(lo - hi))


def log_sum_exp(values):
    """Stable ``log(sum(exp(values)))``; ``-inf`` entries contribute nothing."""
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise DomainError("log_sum_exp of an empty sequence")
    if np.any(np.isnan(arr)) or np.any(arr == np.inf):
        raise DomainError("log_sum_exp accepts finite reals or -inf only")
    hi = arr.max()
    if hi == -np.inf:
        return -math.inf
    return float(hi + math.log(math.fsum(np.exp(arr - hi))))


def _lower_series(s, x):
    # gamma(s, x) * exp(x) * x^-s, valid for s > 0
    term = 1.0 / s
    total = term
    for n in range(1, _GAMMA_ITER_CAP + 1):
        term *= x / (s + n)
        total += term
        if abs(term) < abs(total) * _GAMMA_EPS:
            return total
    raise ConvergenceError(f"incomplete-gamma series did not converge (s={s}, x={x})")


def _upper_fraction(s, x):
    # Lentz evaluation of the continued fraction for Gamma(s, x) e^x x^-s
    tiny = 1e-300
    b = x + 1.0 - s
    c = 1.0 / tiny
    d = 1.0 / b if b != 0.0 else 1.0 / tiny
    h = d
    for i in range(1, _GAMMA_ITER_CAP + 1):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _GAMMA_EPS:
            return h
    return None


def _exp1(x):
    # E1(x) = Gamma(0, x) by its convergent power series
    total = 0.0
    term = 1.0
    for k in range(1, _GAMMA_ITER_CAP + 1):
        term *= -x / k
        inc = -term / k
        total += inc
        if abs(inc) < abs(total) * _GAMMA_EPS:
            return -EULER_GAMMA - math.log(x) + total
    raise ConvergenceError(f"E1 series did not converge (x={x})")


def upper_incomplete_gamma(s, x):
    """Upper incomplete gamma ``Gamma(s, x) = int_x^inf t^(s-1) e^-t dt``.

    ``s`` may be any real (including non-positive values, which the
    ``I_c`` functional needs). ``x`` must be positive.
    """
    s = float(s)
    if not math.isfinite(s):
        raise DomainError(f"s must be finite, got {s!r}")
    x = _check_positive_scalar(x)
    log_prefactor = s * math.log(x) - x

    if s > 0.0 and x < s + 1.0:
        lower = math.exp(log_prefactor) * _lower_series(s, x)
        return math.gamma(s) - lower if s < 171.0 else math.exp(
            math.lgamma(s)) - lower
    h = _upper_fraction(s, x)
    if h is not None:
        return math.exp(log_prefactor) * h

    # Continued fraction too slow (small x): recur down from a positive order.
    # Gamma(s, x) = (Gamma(s + 1, x) - x^s e^-x) / s
    if s == round(s):
        n = int(-s)
        value = _exp1(x)
        for m in range(1, n + 1):
            value = (value - math.exp(-m * math.log(x) - x)) / (-m)
        return value
    n = int(math.floor(-s)) + 1
    value = upper_incomplete_gamma(s + n, x)
    for m in range(n, 0, -1):
        order = s + m - 1
        value = (value - math.exp(order * math.log(x) - x)) / order
    return value


def harmonic_number(n):
    """``H_n = sum_{i=1}^n 1/i`` (``H_0 = 0``)."""
    if n < 0:
        raise DomainError(f"harmonic number needs n >= 0, got {n}")
    return math.fsum(1.0 / i for i in range(1, n + 1))
