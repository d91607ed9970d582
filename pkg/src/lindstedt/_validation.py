"""Small input-validation helpers shared by the public entry points."""

from __future__ import annotations

import numbers
from contextlib import contextmanager

import mpmath

from .exceptions import ConfigurationError

DEFAULT_PRECISION_BITS = 256
MIN_PRECISION_BITS = 64


def check_int(value, name, *, minimum=None, maximum=None, exc=ConfigurationError):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise exc(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if minimum is not None and value < minimum:
        raise exc(f"{name} must be >= {minimum}, got {value}")
    if maximum is not None and value > maximum:
        raise exc(f"{name} must be <= {maximum}, got {value}")
    return value


def check_positive(value, name, *, allow_zero=False, exc=ConfigurationError):
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise exc(f"{name} must be a real number, got {value!r}") from None
    if x != x or (x < 0 if allow_zero else x <= 0):
        bound = "nonnegative" if allow_zero else "positive"
        raise exc(f"{name} must be {bound}, got {value!r}")
    return value


def check_precision(bits):
    return check_int(bits, "precision_bits", minimum=MIN_PRECISION_BITS)


def check_window(window, name="window"):
    try:
        lo, hi = window
    except (TypeError, ValueError):
        raise ConfigurationError(f"{name} must be a pair (k_min, k_max)") from None
    lo = check_int(lo, f"{name}[0]", minimum=1)
    hi = check_int(hi, f"{name}[1]", minimum=lo)
    return lo, hi


@contextmanager
def workprec(bits):
    """Run a block at ``bits`` of mpmath working precision."""
    with mpmath.workprec(int(bits)):
        yield


def to_mpf(x):
    """Parse ints, floats, Fractions, decimal strings and mpmath numbers."""
    if isinstance(x, str):
        return mpmath.mpf(x.strip())
    if hasattr(x, "numerator") and hasattr(x, "denominator") and not isinstance(x, int):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)
