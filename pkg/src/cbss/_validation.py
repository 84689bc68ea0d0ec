"""Input validation helpers shared by the estimators and the functional API."""

import numbers

import numpy as np


class NumericalError(RuntimeError):
    """Raised when a quadrature or iterative solve fails to converge.

    Carries a ``diagnostics`` dict so callers (and the CLI) can report what
    went wrong without parsing the message.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


def check_alpha(alpha):
    """Return ``alpha`` as float, rejecting values outside the open interval (0, 2)."""
    if not isinstance(alpha, numbers.Real) or isinstance(alpha, bool):
        raise TypeError(f"alpha must be a real number, got {type(alpha).__name__}")
    alpha = float(alpha)
    if not (0.0 < alpha < 2.0) or not np.isfinite(alpha):
        raise ValueError(f"alpha must lie in the open interval (0, 2), got {alpha}")
    return alpha


def check_positive(value, name, *, allow_zero=False, allow_inf=False):
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if np.isnan(value) or (np.isinf(value) and not allow_inf):
        raise ValueError(f"{name} must be finite, got {value}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ValueError(f"{name} must be {bound}, got {value}")
    return value


def check_count(value, name, *, minimum=1):
    if not isinstance(value, numbers.Integral) or isinstance(value, bool):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    value = int(value)
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_rng(rng):
    """Turn ``None``, an int seed or a Generator into a ``numpy.random.Generator``."""
    if rng is None:
        return np.random.default_rng()
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, numbers.Integral):
        return np.random.default_rng(int(rng))
    raise TypeError(f"cannot use {rng!r} as a random generator")


def kernel_seed(rng):
    """Draw a 32-bit seed for a compiled kernel from ``rng``."""
    return int(check_rng(rng).integers(0, 2**32 - 1))


def check_array_1d(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr
