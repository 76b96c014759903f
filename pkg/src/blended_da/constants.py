"""Physical constants and the reference set used for nondimensionalisation.

The reference set ``{p_ref, R, T_ref, u_ref, h_ref}`` fixes every scale:

* density ``rho_ref = p_ref / (R T_ref)``,
* sound speed ``c_ref = sqrt(R T_ref)``,
* Mach number ``Ma = u_ref / c_ref``,
* time ``t_ref = h_ref / u_ref``.

With ``T_ref = 300 K`` and ``R = 287.4`` the reference velocities 100 m/s and
10 m/s give ``Ma`` of about 0.341 and 0.0341.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

from .errors import ConfigError
from .type_utils import require_non_negative, require_positive


@dataclass(frozen=True)
class NondimParameters:
    """Dimensionless coefficients of the solver-internal equations.

    Attributes:
        gamma: Isentropic exponent.
        Ma2: Squared reference Mach number.
        pressure_coeff: ``c_p / R``, multiplies ``P grad(pi)`` in the momentum
            equations when ``pi`` is the scaled Exner perturbation.
        gravity: ``g h_ref / u_ref**2``.
        coriolis: ``f t_ref``.
    """

    gamma: float
    Ma2: float
    pressure_coeff: float
    gravity: float
    coriolis: float = 0.0

    @property
    def Ma(self) -> float:
        return math.sqrt(self.Ma2)


@dataclass(frozen=True)
class PhysConstants:
    """Dry-air constants and reference scales, all in SI units.

    Example:
        >>> PhysConstants(u_ref=100.0).Ma  # doctest: +ELLIPSIS
        0.3405...
    """

    p_ref: float = 1.0e5
    R: float = 287.4
    gamma: float = 1.4
    g: float = 9.81
    f: float = 0.0
    T_ref: float = 300.0
    u_ref: float = 100.0
    h_ref: float = 1.0e4

    def __post_init__(self) -> None:
        for key in ("p_ref", "R", "gamma", "T_ref", "u_ref", "h_ref"):
            require_positive(f"constants.{key}", getattr(self, key))
        require_non_negative("constants.g", self.g)
        if not math.isfinite(self.f):
            raise ConfigError("constants.f", f"must be finite, got {self.f!r}")
        if self.gamma <= 1.0:
            raise ConfigError(
                "constants.gamma", f"must exceed 1 for a finite c_v, got {self.gamma}"
            )

    @property
    def c_v(self) -> float:
        return self.R / (self.gamma - 1.0)

    @property
    def c_p(self) -> float:
        return self.gamma * self.c_v

    @property
    def c_ref(self) -> float:
        return math.sqrt(self.R * self.T_ref)

    @property
    def Ma(self) -> float:
        return self.u_ref / self.c_ref

    @property
    def rho_ref(self) -> float:
        return self.p_ref / (self.R * self.T_ref)

    @property
    def t_ref(self) -> float:
        return self.h_ref / self.u_ref

    @property
    def P_ref(self) -> float:
        """Scale of the mass-weighted potential temperature, ``rho_ref T_ref``."""
        return self.rho_ref * self.T_ref

    def nondimensional(self) -> NondimParameters:
        return NondimParameters(
            gamma=self.gamma,
            Ma2=self.Ma**2,
            pressure_coeff=self.c_p / self.R,
            gravity=self.g * self.h_ref / self.u_ref**2,
            coriolis=self.f * self.t_ref,
        )

    def manifest(self) -> dict[str, Any]:
        """Reference set and derived scales for run manifests."""
        return {
            "p_ref": self.p_ref,
            "R": self.R,
            "gamma": self.gamma,
            "c_p": self.c_p,
            "c_v": self.c_v,
            "g": self.g,
            "f": self.f,
            "T_ref": self.T_ref,
            "u_ref": self.u_ref,
            "h_ref": self.h_ref,
            "c_ref": self.c_ref,
            "Ma": self.Ma,
            "t_ref": self.t_ref,
        }
