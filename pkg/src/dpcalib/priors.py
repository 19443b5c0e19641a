"""The Gamma hyperprior on the DP concentration parameter."""

import math
from dataclasses import dataclass

from .exceptions import DomainError


@dataclass(frozen=True)
class GammaHyperprior:
    """``alpha ~ Gamma(a, b)`` in the shape-rate convention (mean ``a / b``)."""

    a: float
    b: float

    def __post_init__(self):
        for name in ("a", "b"):
            v = getattr(self, name)
            try:
                v = float(v)
            except (TypeError, ValueError):
                raise DomainError(f"{name} must be a real number, got {v!r}") from None
            if not math.isfinite(v) or v <= 0.0:
                raise DomainError(f"Gamma {name} must be finite and > 0, got {v!r}")
            object.__setattr__(self, name, v)

    @property
    def mean(self):
        return self.a / self.b

    @property
    def variance(self):
        return self.a / (self.b * self.b)

    @property
    def sd(self):
        return math.sqrt(self.a) / self.b

    @property
    def log_params(self):
        return (math.log(self.a), math.log(self.b))

    @classmethod
    def from_log_params(cls, eta):
        return cls(math.exp(eta[0]), math.exp(eta[1]))

    def to_dict(self):
        return {"a": self.a, "b": self.b, "parameterization": "shape-rate"}

    def __str__(self):
        return f"Gamma({self.a:.4g}, {self.b:.4g})"
