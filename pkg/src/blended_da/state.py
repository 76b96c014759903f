"""Model state container and conversion between SI and solver units."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import Enum
from functools import singledispatch
from typing import Any, Final

import numpy as np

from .constants import PhysConstants
from .errors import ThermodynamicsError
from .grid import Grid
from .hydrostatics import HydroBackground
from .operators import nodes_to_cells
from .type_utils import FloatArray

CELL_FIELDS: Final[tuple[str, ...]] = ("rho", "rho_u", "rho_w", "P", "chi_p")
"""Cell-centred prognostic fields in storage order."""

STATE_VARIABLES: Final[tuple[str, ...]] = ("rho", "rho_u", "rho_w", "P", "pi")
"""Variables of the assimilated state vector."""


class Regime(Enum):
    """Dynamical regime selected by the blending switch ``alpha_P``."""

    COMPRESSIBLE = "compressible"
    PSINC = "pseudo-incompressible"

    @property
    def alpha_P(self) -> int:
        return 1 if self is Regime.COMPRESSIBLE else 0

    @classmethod
    def from_alpha(cls, alpha_P: int) -> Regime:
        if alpha_P == 1:
            return cls.COMPRESSIBLE
        if alpha_P == 0:
            return cls.PSINC
        raise ValueError(f"alpha_P must be 0 or 1, got {alpha_P!r}")


class Units(Enum):
    SI = "si"
    NONDIMENSIONAL = "nondimensional"


@dataclass(frozen=True, eq=False)
class ModelState:
    """Prognostic fields of one model integration.

    Cell fields have shape ``(Nx, Nz)``; ``pi`` is the Exner perturbation on the
    full ``(Nx+1, Nz+1)`` node array. In SI units ``pi`` is the physical
    perturbation ``pi'``; in solver units it is ``pi' / Ma**2``. ``chi_p`` is the
    advected perturbation of the inverse potential temperature, ``chi - chi_bar``.
    """

    rho: FloatArray
    rho_u: FloatArray
    rho_w: FloatArray
    P: FloatArray
    chi_p: FloatArray
    pi: FloatArray
    t: float = 0.0
    regime: Regime = Regime.COMPRESSIBLE
    step: int = 0
    units: Units = Units.NONDIMENSIONAL

    @property
    def chi(self) -> FloatArray:
        return self.rho / self.P  # type: ignore[no-any-return]

    @property
    def theta(self) -> FloatArray:
        return self.P / self.rho  # type: ignore[no-any-return]

    @property
    def u(self) -> FloatArray:
        return self.rho_u / self.rho  # type: ignore[no-any-return]

    @property
    def w(self) -> FloatArray:
        return self.rho_w / self.rho  # type: ignore[no-any-return]

    @property
    def shape(self) -> tuple[int, int]:
        return self.rho.shape  # type: ignore[return-value]

    def replace(self, **changes: Any) -> ModelState:
        return dataclasses.replace(self, **changes)

    def field(self, name: str) -> FloatArray:
        """Cell values of a named variable; ``pi`` is averaged to cells."""
        if name == "pi":
            return nodes_to_cells(self.pi)
        if name in CELL_FIELDS:
            return getattr(self, name)  # type: ignore[no-any-return]
        raise KeyError(f"unknown state variable {name!r}")

    def check(self) -> ModelState:
        """Return ``self`` after verifying positivity and finiteness.

        Raises:
            ThermodynamicsError: If ``rho`` or ``P`` is not positive, or any field
                is not finite.
        """
        for name in (*CELL_FIELDS, "pi"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ThermodynamicsError(f"{name} not finite at t={self.t}")
        for name in ("rho", "P"):
            value = getattr(self, name)
            if np.any(value <= 0.0):
                raise ThermodynamicsError(
                    f"{name} must stay positive, minimum {value.min()!r} at t={self.t}"
                )
        return self

    def copy(self) -> ModelState:
        return self.replace(**{name: getattr(self, name).copy() for name in (*CELL_FIELDS, "pi")})


def _scales(consts: PhysConstants) -> dict[str, float]:
    return {
        "rho": consts.rho_ref,
        "rho_u": consts.rho_ref * consts.u_ref,
        "rho_w": consts.rho_ref * consts.u_ref,
        "P": consts.P_ref,
        "chi_p": 1.0 / consts.T_ref,
        "pi": consts.Ma**2,
    }


@singledispatch
def nondimensionalise(obj: Any, consts: PhysConstants) -> Any:
    """Convert an SI object to solver units.

    Supported are :class:`ModelState`, :class:`Grid` and
    :class:`HydroBackground`.
    """
    raise TypeError(f"cannot nondimensionalise {type(obj).__name__}")


@nondimensionalise.register
def _(obj: ModelState, consts: PhysConstants) -> ModelState:
    if obj.units is not Units.SI:
        raise ValueError("state is already nondimensional")
    scales = _scales(consts)
    fields = {name: getattr(obj, name) / scale for name, scale in scales.items()}
    return obj.replace(t=obj.t / consts.t_ref, units=Units.NONDIMENSIONAL, **fields)


@nondimensionalise.register
def _(obj: Grid, consts: PhysConstants) -> Grid:
    return obj.scaled(consts.h_ref)


@nondimensionalise.register
def _(obj: HydroBackground, consts: PhysConstants) -> HydroBackground:
    return obj.nondimensional(consts)


def dimensionalise(state: ModelState, consts: PhysConstants) -> ModelState:
    """Inverse of :func:`nondimensionalise` for states."""
    if state.units is not Units.NONDIMENSIONAL:
        raise ValueError("state is already in SI units")
    scales = _scales(consts)
    fields = {name: getattr(state, name) * scale for name, scale in scales.items()}
    return state.replace(t=state.t * consts.t_ref, units=Units.SI, **fields)
