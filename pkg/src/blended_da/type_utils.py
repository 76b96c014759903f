"""Array aliases and value checks shared across the package."""

from __future__ import annotations

import math
from typing import Any, TypeAlias

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigError

FloatArray: TypeAlias = NDArray[np.float64]
IntArray: TypeAlias = NDArray[np.intp]


def require_positive(key: str, value: float) -> float:
    """Return ``value`` if it is finite and strictly positive.

    Raises:
        ConfigError: If the value is zero, negative or not finite.
    """
    if not math.isfinite(value) or value <= 0.0:
        raise ConfigError(key, f"must be a positive finite number, got {value!r}")
    return value


def require_non_negative(key: str, value: float) -> float:
    if not math.isfinite(value) or value < 0.0:
        raise ConfigError(key, f"must be a non-negative finite number, got {value!r}")
    return value


def as_float_array(value: Any) -> FloatArray:
    """Coerce ``value`` to a contiguous float64 array."""
    return np.ascontiguousarray(value, dtype=np.float64)
