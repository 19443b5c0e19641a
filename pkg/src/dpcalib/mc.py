"""Monte-Carlo reference samplers used to cross-check the closed forms.

Every sampler takes an explicit ``numpy.random.Generator``; :func:`make_rng`
derives one reproducibly from ``(seed, stream)`` so independent streams can be
run in parallel and their summaries merged.
"""

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConvergenceError, DomainError

MAX_STICKS = 1_000_000
_CHUNK = 100_000


@dataclass(frozen=True)
class McConfig:
    draws: int = 100_000
    seed: int = 0
    stick_truncation_tail: float = 1e-12
    stream: int = 0

    def __post_init__(self):
        if isinstance(self.draws, bool) or int(self.draws) != self.draws or self.draws < 1:
            raise DomainError(f"draws must be a positive integer, got {self.draws!r}")
        if not 0.0 < self.stick_truncation_tail <= 1e-6:
            raise DomainError("stick_truncation_tail must lie in (0, 1e-6]")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise DomainError("seed must be an unsigned 64-bit integer")

    def rng(self):
        return make_rng(self.seed, self.stream)


def make_rng(seed, stream=0):
    """PCG64 generator keyed by ``(seed, stream)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(stream),))))


@dataclass(frozen=True)
class McSummary:
    estimate: float
    std_error: float
    draws: int

    def z_score(self, reference):
        if self.std_error == 0.0:
            return 0.0 if self.estimate == reference else math.inf
        return (self.estimate - reference) / self.std_error


@dataclass(frozen=True)
class RunningMoments:
    """Count, mean and centred sum of squares; merges associatively."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @classmethod
    def of(cls, values):
        x = np.asarray(values, dtype=float)
        if x.size == 0:
            return cls()
        mu = float(x.mean())
        return cls(int(x.size), mu, float(((x - mu) ** 2).sum()))

    def merge(self, other):
        n = self.count + other.count
        if n == 0:
            return RunningMoments()
        d = other.mean - self.mean
        mean = self.mean + d * other.count / n
        m2 = self.m2 + other.m2 + d * d * self.count * other.count / n
        return RunningMoments(n, mean, m2)

    @property
    def variance(self):
        return self.m2 / (self.count - 1) if self.count > 1 else 0.0

    def summary(self):
        return McSummary(self.mean, math.sqrt(self.variance / self.count) if self.count else 0.0,
                         self.count)


def mean_summary(values):
    return RunningMoments.of(values).summary()


def variance_summary(values):
    """Sample variance with its large-sample standard error ``sqrt((m4 - s^4) / n)``."""
    x = np.asarray(values, dtype=float)
    n = x.size
    c = x - x.mean()
    s2 = float((c * c).sum() / (n - 1))
    m4 = float((c ** 4).mean())
    return McSummary(s2, math.sqrt(max(m4 - s2 * s2, 0.0) / n), n)


def sample_K_crp(J, alpha, rng, size=None):
    """``K_J = 1 + sum_{i=2}^J Bernoulli(alpha / (alpha + i - 1))``.

    ``alpha`` may be a scalar or an array (one draw per entry).
    """
    if isinstance(J, bool) or int(J) != J or J < 1:
        raise DomainError(f"J must be an integer >= 1, got {J!r}")
    J = int(J)
    arr = np.asarray(alpha, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0):
        raise DomainError("alpha must be finite and > 0")
    scalar = arr.ndim == 0 and size is None
    alphas = np.broadcast_to(arr, (size,) if size is not None else arr.shape).ravel()
    out = np.ones(alphas.shape, dtype=np.int64)
    for i in range(2, J + 1):
        out += rng.random(alphas.shape) < alphas / (alphas + (i - 1))
    return int(out[0]) if scalar else out


def sample_alpha(hyper, rng, size):
    return rng.gamma(hyper.a, 1.0 / hyper.b, size=size)


def sample_prior_predictive_K(J, hyper, cfg, rng=None):
    """Histogram ``counts[k - 1]`` of ``K_J`` draws with alpha ~ Gamma(a, b)."""
    rng = rng or cfg.rng()
    counts = np.zeros(J, dtype=np.int64)
    left = cfg.draws
    while left:
        n = min(left, _CHUNK)
        k = sample_K_crp(J, sample_alpha(hyper, rng, n), rng)
        counts += np.bincount(k - 1, minlength=J)
        left -= n
    return counts


def histogram_moments(counts):
    """Mean and variance summaries from a ``K`` histogram."""
    n = int(counts.sum())
    k = np.arange(1, len(counts) + 1, dtype=float)
    p = counts / n
    mean = float(p @ k)
    c = k - mean
    var_pop = float(p @ (c * c))
    var = var_pop * n / (n - 1)
    m4 = float(p @ c ** 4)
    return (McSummary(mean, math.sqrt(var / n), n),
            McSummary(var, math.sqrt(max(m4 - var * var, 0.0) / n), n))


def sample_w1(hyper, rng, size=None):
    """``w1 = 1 - U^(1/alpha)`` after drawing alpha from the hyperprior."""
    n = 1 if size is None else size
    alpha = sample_alpha(hyper, rng, n)
    w = -np.expm1(np.log(rng.random(n)) / alpha)
    return float(w[0]) if size is None else w


def sample_rho(hyper, cfg, rng=None, size=None):
    """Co-clustering index ``sum_h w_h^2`` from truncated stick-breaking.

    Sticks are drawn until the unallocated mass falls below the configured
    tail; that remainder is added as one final atom, which biases each draw
    upward by at most ``tail^2``.
    """
    rng = rng or cfg.rng()
    n = 1 if size is None else size
    alpha = sample_alpha(hyper, rng, n)
    tail = cfg.stick_truncation_tail
    rho = np.zeros(n)
    remaining = np.ones(n)
    active = np.arange(n)
    sticks = 0
    while active.size:
        sticks += 1
        if sticks > MAX_STICKS:
            raise ConvergenceError(
                f"stick-breaking exceeded {MAX_STICKS} sticks (alpha={alpha[active[0]]!r})")
        a = alpha[active]
        v = -np.expm1(np.log(rng.random(active.size)) / a)
        w = remaining[active] * v
        rho[active] += w * w
        remaining[active] -= w
        active = active[remaining[active] >= tail]
    rho += remaining * remaining
    return float(rho[0]) if size is None else rho


def sample_rho_many(hyper, cfg, rng=None):
    rng = rng or cfg.rng()
    parts = []
    left = cfg.draws
    while left:
        m = min(left, _CHUNK)
        parts.append(sample_rho(hyper, cfg, rng, size=m))
        left -= m
    return np.concatenate(parts)


__all__ = [
    "McConfig", "McSummary", "RunningMoments", "make_rng", "sample_K_crp",
    "sample_alpha", "sample_prior_predictive_K", "histogram_moments", "sample_w1",
    "sample_rho", "sample_rho_many", "mean_summary", "variance_summary",
]
