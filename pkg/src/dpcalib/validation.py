"""Argument checks shared by the estimator wrappers and the CLI."""

import math
import numbers

from .exceptions import DomainError
from .tsmm import ElicitationTarget


def check_design_size(J, minimum=2):
    if isinstance(J, bool) or not isinstance(J, numbers.Integral) or J < minimum:
        raise DomainError(f"J must be an integer >= {minimum}, got {J!r}")
    return int(J)


def check_positive(value, name):
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise DomainError(f"{name} must be finite and > 0, got {value!r}")
    return value


def check_open_unit(value, name):
    value = float(value)
    if not 0.0 < value < 1.0:
        raise DomainError(f"{name} must lie in (0, 1), got {value!r}")
    return value


def check_target(target):
    """Accept an :class:`ElicitationTarget` or a ``(J, mu_K, var_K)`` triple."""
    if isinstance(target, ElicitationTarget):
        return target
    try:
        J, mu_K, var_K = target
    except (TypeError, ValueError):
        raise DomainError(
            "expected an ElicitationTarget or a (J, mu_K, var_K) triple") from None
    return ElicitationTarget(check_design_size(J), float(mu_K), float(var_K))


def parse_interval(text):
    """``"lo,hi,q"`` -> ``(lo, hi, q)``."""
    parts = [p.strip() for p in str(text).split(",")]
    if len(parts) != 3:
        raise DomainError(f"interval must look like 'lo,hi,q', got {text!r}")
    try:
        lo, hi, q = (float(p) for p in parts)
    except ValueError:
        raise DomainError(f"interval entries must be numbers, got {text!r}") from None
    return lo, hi, q


def parse_grid(text):
    """``"start:stop:step"`` (inclusive) or a comma list -> sorted floats."""
    text = str(text).strip()
    if ":" in text:
        try:
            start, stop, step = (float(p) for p in text.split(":"))
        except ValueError:
            raise DomainError(f"grid must look like 'start:stop:step', got {text!r}") from None
        if step <= 0.0 or stop < start:
            raise DomainError(f"grid needs step > 0 and stop >= start, got {text!r}")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        values = [round(start + i * step, 12) for i in range(n)]
    else:
        try:
            values = [float(p) for p in text.split(",") if p.strip()]
        except ValueError:
            raise DomainError(f"grid entries must be numbers, got {text!r}") from None
    if not values:
        raise DomainError("grid is empty")
    return sorted(values)


__all__ = ["check_design_size", "check_positive", "check_open_unit", "check_target",
           "parse_interval", "parse_grid"]
