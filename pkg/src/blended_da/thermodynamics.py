"""Equation of state linking pressure, Exner pressure and ``P = rho Theta``.

The SI functions take and return dimensional quantities. The ``nondim_``
variants work on the solver-internal scaling where ``P = pi**(1/(gamma-1))``.
"""

from __future__ import annotations

from typing import TypeVar

import numpy as np

from .constants import PhysConstants
from .errors import ThermodynamicsError

ArrayOrFloat = TypeVar("ArrayOrFloat", float, np.ndarray)


def _require_positive(name: str, value: ArrayOrFloat) -> None:
    array = np.asarray(value)
    if not np.all(np.isfinite(array)) or np.any(array <= 0.0):
        raise ThermodynamicsError(
            f"{name} must be positive and finite, minimum is {np.min(array)!r}"
        )


def eos_pi_from_p(p: ArrayOrFloat, consts: PhysConstants) -> ArrayOrFloat:
    """Exner pressure ``(p/p_ref)**(R/c_p)``."""
    _require_positive("pressure", p)
    return (p / consts.p_ref) ** (consts.R / consts.c_p)  # type: ignore[no-any-return]


def eos_p_from_pi(pi: ArrayOrFloat, consts: PhysConstants) -> ArrayOrFloat:
    """Pressure ``p_ref * pi**(c_p/R)``."""
    _require_positive("Exner pressure", pi)
    return consts.p_ref * pi ** (consts.c_p / consts.R)  # type: ignore[no-any-return]


def P_from_pi(pi: ArrayOrFloat, consts: PhysConstants) -> ArrayOrFloat:
    """Mass-weighted potential temperature ``(p_ref/R) * pi**(1/(gamma-1))``.

    Example:
        >>> round(P_from_pi(1.0, PhysConstants()), 2)
        347.95
    """
    _require_positive("Exner pressure", pi)
    return (consts.p_ref / consts.R) * pi ** (  # type: ignore[no-any-return]
        1.0 / (consts.gamma - 1.0)
    )


def dP_dpi(pi: ArrayOrFloat, consts: PhysConstants) -> ArrayOrFloat:
    """Derivative of :func:`P_from_pi` with respect to ``pi``."""
    _require_positive("Exner pressure", pi)
    gamma = consts.gamma
    return (  # type: ignore[no-any-return]
        (consts.p_ref / consts.R)
        / (gamma - 1.0)
        * pi ** ((2.0 - gamma) / (gamma - 1.0))
    )


def pi_from_P(P: ArrayOrFloat, consts: PhysConstants) -> ArrayOrFloat:
    """Inverse of :func:`P_from_pi`."""
    _require_positive("P", P)
    return (P * consts.R / consts.p_ref) ** (  # type: ignore[no-any-return]
        consts.gamma - 1.0
    )


def nondim_P_from_pi(pi: np.ndarray, gamma: float) -> np.ndarray:
    _require_positive("Exner pressure", pi)
    return np.asarray(pi) ** (1.0 / (gamma - 1.0))


def nondim_pi_from_P(P: np.ndarray, gamma: float) -> np.ndarray:
    _require_positive("P", P)
    return np.asarray(P) ** (gamma - 1.0)


def nondim_dP_dpi(P: np.ndarray, gamma: float) -> np.ndarray:
    """``dP/dpi`` expressed through ``P``: ``P**(2-gamma) / (gamma-1)``."""
    _require_positive("P", P)
    return np.asarray(P) ** (2.0 - gamma) / (gamma - 1.0)
