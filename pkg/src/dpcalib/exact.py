"""Exact law of the occupied-cluster count K_J given the concentration alpha.

Three pieces live here: a cached triangular table of log unsigned Stirling
numbers of the first kind, the Antoniak pmf built from it, and the closed-form
conditional moments of K_J together with their alpha-derivatives.
"""

import math
import os
import threading
from dataclasses import dataclass

import numpy as np

from .exceptions import CalibrationError, DomainError
from .specfun import polygamma

DEFAULT_STIRLING_CAP = 2000
_SUMMATION_DVAR_MAX_J = 64
# alpha/J ratio above which the digamma differences lose too many digits
_LARGE_ALPHA_RATIO = 100.0


def stirling_cap():
    """Largest design size the Stirling table may be built for."""
    raw = os.environ.get("DPCALIB_STIRLING_CAP")
    if raw is None:
        return DEFAULT_STIRLING_CAP
    try:
        cap = int(raw)
    except ValueError:
        raise DomainError(f"DPCALIB_STIRLING_CAP must be an integer, got {raw!r}") from None
    if cap < 1:
        raise DomainError("DPCALIB_STIRLING_CAP must be >= 1")
    return cap


@dataclass(frozen=True)
class LogStirlingTable:
    """``rows[n - 1][k - 1] = log|s(n, k)|`` for ``1 <= k <= n <= j_max``."""

    j_max: int
    rows: tuple

    def row(self, n):
        if not 1 <= n <= self.j_max:
            raise DomainError(f"row {n} outside table of size {self.j_max}")
        return self.rows[n - 1]

    def __getitem__(self, nk):
        n, k = nk
        if not 1 <= k <= n:
            return -math.inf
        return float(self.row(n)[k - 1])


def _extend_rows(rows, j_max):
    rows = list(rows)
    if not rows:
        first = np.zeros(1)
        first.flags.writeable = False
        rows.append(first)
    for n in range(len(rows) + 1, j_max + 1):
        prev = rows[-1]
        cur = np.empty(n)
        # L[n,k] = logaddexp(L[n-1,k-1], log(n-1) + L[n-1,k])
        cur[0] = prev[0] + math.log(n - 1)
        cur[1:n - 1] = np.logaddexp(prev[:-1], math.log(n - 1) + prev[1:])
        cur[n - 1] = 0.0
        cur.flags.writeable = False
        rows.append(cur)
    return tuple(rows)


def build_log_stirling(j_max):
    """Build a fresh table up to ``j_max`` (no caching)."""
    j_max = int(j_max)
    cap = stirling_cap()
    if j_max < 1:
        raise DomainError(f"j_max must be >= 1, got {j_max}")
    if j_max > cap:
        raise DomainError(
            f"j_max={j_max} exceeds the Stirling table cap {cap}; "
            "raise DPCALIB_STIRLING_CAP to allow it")
    return LogStirlingTable(j_max, _extend_rows((), j_max))


_table_lock = threading.Lock()
_table = None


def log_stirling_table(j_max):
    """Shared, lazily grown table covering at least ``j_max`` rows."""
    global _table
    current = _table
    if current is not None and current.j_max >= j_max:
        return current
    cap = stirling_cap()
    if j_max > cap:
        raise DomainError(
            f"J={j_max} exceeds the Stirling table cap {cap}; "
            "raise DPCALIB_STIRLING_CAP to allow it")
    with _table_lock:
        current = _table
        if current is None or current.j_max < j_max:
            target = min(cap, max(j_max, 64))
            rows = current.rows if current is not None else ()
            _table = current = LogStirlingTable(target, _extend_rows(rows, target))
    return current


def _check_alpha(alpha):
    arr = np.asarray(alpha, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise DomainError("alpha must be finite and > 0")
    return arr


def _check_J(J, minimum=1):
    if isinstance(J, bool) or int(J) != J or J < minimum:
        raise DomainError(f"J must be an integer >= {minimum}, got {J!r}")
    return int(J)


def log_rising_factorial(alpha, J):
    """``log(alpha (alpha+1) ... (alpha+J-1))`` for an array of alphas."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    r = np.arange(J, dtype=float)
    return np.log(alpha[:, None] + r[None, :]).sum(axis=1)


def antoniak_log_pmf(J, alpha, table=None):
    """Rows of ``log Pr(K_J = k | alpha_m)``, shape ``(len(alpha), J)``.

    Each row is renormalised; the raw log-normaliser must already be within
    1e-8 of zero or a :class:`CalibrationError` is raised.
    """
    J = _check_J(J)
    alphas = np.atleast_1d(_check_alpha(alpha))
    if table is None:
        table = log_stirling_table(J)
    elif J > table.j_max:
        raise DomainError(f"J={J} exceeds table size {table.j_max}")
    k = np.arange(1, J + 1, dtype=float)
    logp = (table.row(J)[None, :] + k[None, :] * np.log(alphas)[:, None]
            - log_rising_factorial(alphas, J)[:, None])
    hi = logp.max(axis=1, keepdims=True)
    log_z = hi[:, 0] + np.log(np.exp(logp - hi).sum(axis=1))
    if np.any(np.abs(log_z) > 1e-8):
        worst = int(np.argmax(np.abs(log_z)))
        raise CalibrationError(
            f"Antoniak log-normaliser {log_z[worst]:.3e} at alpha={alphas[worst]!r}, J={J}")
    return logp - log_z[:, None]


def antoniak_pmf(J, alpha, table=None):
    """``Pr(K_J = k | alpha)`` for ``k = 1..J`` (index ``k - 1``)."""
    scalar = np.ndim(alpha) == 0
    p = np.exp(antoniak_log_pmf(J, alpha, table))
    return p[0] if scalar else p


@dataclass(frozen=True)
class ConditionalMoments:
    """Mean, variance and their alpha-derivatives of ``K_J | alpha``."""

    mean: object
    variance: object
    d_mean: object
    d_variance: object


def _summation_moments(J, alpha):
    r = np.arange(1, J, dtype=float)[None, :]
    a = alpha[:, None]
    q = a + r
    mean = 1.0 + (a / q).sum(axis=1)
    var = (a * r / (q * q)).sum(axis=1)
    d_mean = (r / (q * q)).sum(axis=1)
    d_var = (r * (r - a) / (q * q * q)).sum(axis=1)
    return mean, var, d_mean, d_var


def conditional_moments(J, alpha):
    """Closed-form ``E[K_J|alpha]``, ``Var(K_J|alpha)`` and their derivatives.

    Works on scalars or arrays of ``alpha``. The r = 0 unit (always a new
    cluster) is split off before taking digamma differences, which removes the
    leading cancellation without changing the value.
    """
    J = _check_J(J)
    arr = _check_alpha(alpha)
    scalar = arr.ndim == 0
    a = np.atleast_1d(arr)
    if J == 1:
        one = np.ones_like(a)
        zero = np.zeros_like(a)
        out = (one, zero, zero, zero)
    else:
        lam = a * (polygamma(0, a + J) - polygamma(0, a + 1.0))
        tri = polygamma(1, a + 1.0) - polygamma(1, a + J)
        mean = 1.0 + lam
        var = lam - a * a * tri
        d_mean = lam / a - a * tri
        if J <= _SUMMATION_DVAR_MAX_J:
            d_var = _summation_moments(J, a)[3]
        else:
            tetra = polygamma(2, a + 1.0) - polygamma(2, a + J)
            d_var = d_mean - 2.0 * a * tri - a * a * tetra
        big = a > _LARGE_ALPHA_RATIO * J
        if np.any(big):
            sm = _summation_moments(J, a[big])
            mean[big], var[big], d_mean[big], d_var[big] = sm
        out = (mean, var, d_mean, d_var)
    if scalar:
        out = tuple(float(v[0]) for v in out)
    return ConditionalMoments(*out)


def conditional_moments_by_summation(J, alpha):
    """Direct O(J) sums of the Bernoulli-indicator representation."""
    J = _check_J(J)
    arr = _check_alpha(alpha)
    scalar = arr.ndim == 0
    a = np.atleast_1d(arr)
    if J == 1:
        z = np.zeros_like(a)
        out = (np.ones_like(a), z, z, z)
    else:
        out = _summation_moments(J, a)
    if scalar:
        out = tuple(float(v[0]) for v in out)
    return ConditionalMoments(*out)


def stirling_row_by_recursion(n):
    """Exact integer row ``|s(n, k)|, k = 1..n`` (small-n reference)."""
    row = [1]  # n = 1
    for m in range(2, n + 1):
        nxt = [0] * m
        for k in range(1, m + 1):
            left = row[k - 2] if k >= 2 else 0
            right = row[k - 1] if k <= m - 1 else 0
            nxt[k - 1] = left + (m - 1) * right
        row = nxt
    return row


__all__ = [
    "LogStirlingTable", "ConditionalMoments", "build_log_stirling",
    "log_stirling_table", "antoniak_pmf", "antoniak_log_pmf",
    "conditional_moments", "conditional_moments_by_summation",
    "stirling_cap", "stirling_row_by_recursion",
]
