"""Hydrostatically balanced background column."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, replace

import numpy as np

from .constants import PhysConstants
from .grid import Grid
from .thermodynamics import P_from_pi
from .type_utils import FloatArray, as_float_array

ThetaProfile = Callable[[FloatArray], FloatArray]


@dataclass(frozen=True, eq=False)
class HydroBackground:
    """Column profiles of the balanced background on cell and node levels.

    ``pressure_coeff`` and ``gravity`` are the coefficients of the discrete
    balance ``pressure_coeff * P * d(pi)/dz + rho * gravity = 0`` in the units of
    the profiles: ``c_p`` and ``g`` for SI profiles, ``(c_p/R)/Ma**2`` and
    ``g h_ref/u_ref**2`` for nondimensional ones.
    """

    z_nodes: FloatArray
    z_cells: FloatArray
    pi_nodes: FloatArray
    pi_cells: FloatArray
    P_nodes: FloatArray
    P_cells: FloatArray
    rho_nodes: FloatArray
    rho_cells: FloatArray
    theta_nodes: FloatArray
    theta_cells: FloatArray
    chi_nodes: FloatArray
    chi_cells: FloatArray
    dchi_dz: FloatArray
    pressure_coeff: float
    gravity: float

    def residual(self) -> FloatArray:
        """Discrete hydrostatic residual per cell level."""
        dz = self.z_nodes[1] - self.z_nodes[0]
        dpi = np.diff(self.pi_nodes) / dz
        return self.pressure_coeff * self.P_cells * dpi + self.rho_cells * self.gravity  # type: ignore[no-any-return]

    def buoyancy_frequency_squared(self) -> FloatArray:
        """``N**2 = -g dchi/dz / chi`` per cell level."""
        return -self.gravity * self.dchi_dz / self.chi_cells  # type: ignore[no-any-return]

    def nondimensional(self, consts: PhysConstants) -> HydroBackground:
        params = consts.nondimensional()
        return replace(
            self,
            z_nodes=self.z_nodes / consts.h_ref,
            z_cells=self.z_cells / consts.h_ref,
            P_nodes=self.P_nodes / consts.P_ref,
            P_cells=self.P_cells / consts.P_ref,
            rho_nodes=self.rho_nodes / consts.rho_ref,
            rho_cells=self.rho_cells / consts.rho_ref,
            theta_nodes=self.theta_nodes / consts.T_ref,
            theta_cells=self.theta_cells / consts.T_ref,
            chi_nodes=self.chi_nodes * consts.T_ref,
            chi_cells=self.chi_cells * consts.T_ref,
            dchi_dz=self.dchi_dz * consts.T_ref * consts.h_ref,
            pressure_coeff=params.pressure_coeff / params.Ma2,
            gravity=params.gravity,
        )


def build_hydrostatic_background(
    theta_profile: ThetaProfile, grid: Grid, consts: PhysConstants
) -> HydroBackground:
    """Integrate ``d(pi)/dz = -g/(c_p Theta)`` upwards from ``pi = 1``.

    Node values use the midpoint rule with ``Theta`` at the cell centre between
    two nodes. Cell values integrate half a cell from the node below with
    ``Theta`` at the quarter level. Cell densities follow from ``P/Theta`` so
    the discrete balance holds to round-off.

    Args:
        theta_profile: Potential temperature in K as a function of height in m.
        grid: SI grid; only the vertical axis is used.
        consts: Physical constants.

    Returns:
        The SI background column.

    Raises:
        ValueError: If the profile is not strictly positive.
    """
    dz = grid.dz
    z_nodes = grid.node_z
    z_cells = grid.cell_z
    theta_cells = as_float_array(theta_profile(z_cells))
    theta_nodes = as_float_array(theta_profile(z_nodes))
    theta_quarter = as_float_array(theta_profile(z_nodes[:-1] + 0.25 * dz))
    for theta in (theta_cells, theta_nodes, theta_quarter):
        if np.any(theta <= 0.0):
            raise ValueError(f"potential temperature must be positive, got {theta.min()}")

    slope = consts.g / consts.c_p
    pi_nodes = 1.0 - np.concatenate(([0.0], np.cumsum(dz * slope / theta_cells)))
    pi_cells = pi_nodes[:-1] - 0.5 * dz * slope / theta_quarter
    P_nodes = P_from_pi(pi_nodes, consts)
    P_cells = P_from_pi(pi_cells, consts)
    chi_nodes = 1.0 / theta_nodes
    return HydroBackground(
        z_nodes=z_nodes,
        z_cells=z_cells,
        pi_nodes=pi_nodes,
        pi_cells=pi_cells,
        P_nodes=P_nodes,
        P_cells=P_cells,
        rho_nodes=P_nodes / theta_nodes,
        rho_cells=P_cells / theta_cells,
        theta_nodes=theta_nodes,
        theta_cells=theta_cells,
        chi_nodes=chi_nodes,
        chi_cells=1.0 / theta_cells,
        dchi_dz=np.diff(chi_nodes) / dz,
        pressure_coeff=consts.c_p,
        gravity=consts.g,
    )


def uniform_theta(theta0: float) -> ThetaProfile:
    """Constant potential temperature profile."""

    def profile(z: FloatArray) -> FloatArray:
        return np.full_like(np.asarray(z, dtype=np.float64), theta0)

    return profile
