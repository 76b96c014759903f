"""Initial states of the travelling vortex and the rising bubble.

All builders work in SI units and return SI states; :func:`nondimensionalise`
turns them into solver states.
"""

from __future__ import annotations

from typing import Final

import numpy as np
from numpy.polynomial import Chebyshev

from .constants import PhysConstants
from .errors import ConfigError
from .grid import Grid
from .hydrostatics import ThetaProfile, build_hydrostatic_background, uniform_theta
from .state import ModelState, Regime, Units
from .type_utils import FloatArray

VORTEX_RADIUS: Final = 4000.0
"""Support radius of the vortex in m."""

VORTEX_MAX_SPEED: Final = 25.0
"""Peak tangential velocity in m/s."""

VORTEX_BACKGROUND_WIND: Final = 100.0
"""Uniform background wind in both directions in m/s."""

VORTEX_THETA: Final = 600.0
"""Potential temperature outside the vortex in K."""

BUBBLE_THETA: Final = 300.0
BUBBLE_RADIUS: Final = 2000.0
BUBBLE_HEIGHT: Final = 2000.0

# (1-s)**6 s**6 peaks at s = 1/2 with value 1/4096
_PROFILE_PEAK: Final = 4096.0


def vortex_background() -> ThetaProfile:
    return uniform_theta(VORTEX_THETA)


def bubble_background() -> ThetaProfile:
    return uniform_theta(BUBBLE_THETA)


def _radius() -> Chebyshev:
    return Chebyshev.identity(domain=[0.0, 1.0])


def _density_ratio() -> Chebyshev:
    """``rho / rho_ref`` inside the vortex as a polynomial of ``s = r/R``."""
    s = _radius()
    return 0.5 + 0.5 * (1.0 - s**2) ** 6  # type: ignore[no-any-return]


def _pressure_deficit() -> Chebyshev:
    """Antiderivative of ``(rho/rho_ref) (1-s)**12 s**11``.

    Cyclostrophic balance ``dp/dr = rho u_theta**2 / r`` with the polynomial
    tangential profile integrates to ``p(s) = p_ref - rho_ref U**2 (Q(1) - Q(s))``.
    Chebyshev coefficients on ``[0, 1]`` keep ``Q(1) - Q(s)`` accurate where
    power-basis terms cancel.
    """
    s = _radius()
    return (_density_ratio() * (1.0 - s) ** 12 * s**11).integ()  # type: ignore[no-any-return]


def _periodic_offset(coord: FloatArray, centre: float, lo: float, hi: float, periodic: bool) -> FloatArray:
    delta = coord - centre
    if periodic:
        length = hi - lo
        delta = (delta + 0.5 * length) % length - 0.5 * length
    return delta


def _vortex_fields(
    x: FloatArray, z: FloatArray, grid: Grid, consts: PhysConstants, center: tuple[float, float]
) -> tuple[FloatArray, FloatArray, FloatArray, FloatArray, FloatArray]:
    """Density, velocities, pressure and scaled radius at the given points."""
    dx = _periodic_offset(x, center[0], grid.x_min, grid.x_max, grid.periodic_x)
    dz = _periodic_offset(z, center[1], grid.z_min, grid.z_max, grid.periodic_z)
    r = np.hypot(dx, dz)
    s = r / VORTEX_RADIUS
    inside = s < 1.0
    s_in = np.where(inside, s, 1.0)

    amplitude = _PROFILE_PEAK * VORTEX_MAX_SPEED
    u_theta = np.where(inside, amplitude * (1.0 - s_in) ** 6 * s_in**6, 0.0)
    rho = consts.rho_ref * np.where(inside, _density_ratio()(s_in), 0.5)
    Q = _pressure_deficit()
    p = consts.p_ref - consts.rho_ref * amplitude**2 * (Q(1.0) - Q(s_in))

    with np.errstate(invalid="ignore", divide="ignore"):
        swirl = np.where(r > 0.0, u_theta / r, 0.0)
    u = VORTEX_BACKGROUND_WIND - swirl * dz
    w = VORTEX_BACKGROUND_WIND + swirl * dx
    return rho, u, w, p, s


def init_vortex(grid: Grid, consts: PhysConstants, center: tuple[float, float] = (0.0, 0.0)) -> ModelState:
    """Balanced travelling vortex on an SI grid.

    The tangential velocity ``4096 U (1-s)**6 s**6`` peaks at ``U = 25 m/s``
    halfway to the support radius; the pressure is in exact cyclostrophic
    balance and ``pi'`` is evaluated at the nodes from the same closed form.

    Raises:
        ConfigError: If the centre lies outside the domain.
    """
    if not grid.contains(*center):
        raise ConfigError("run.center", f"vortex centre {center} outside the domain")
    x, z = grid.cell_coordinates()
    rho, u, w, p, _ = _vortex_fields(x, z, grid, consts, center)
    P = consts.p_ref / consts.R * (p / consts.p_ref) ** (1.0 / consts.gamma)

    xn, zn = grid.node_coordinates()
    _, _, _, p_nodes, _ = _vortex_fields(xn, zn, grid, consts, center)
    pi = (p_nodes / consts.p_ref) ** (consts.R / consts.c_p) - 1.0
    return ModelState(
        rho=rho,
        rho_u=rho * u,
        rho_w=rho * w,
        P=P,
        chi_p=rho / P - 1.0 / VORTEX_THETA,
        pi=pi,
        regime=Regime.COMPRESSIBLE,
        units=Units.SI,
    )


def init_vortex_imbalanced(
    grid: Grid, consts: PhysConstants, center: tuple[float, float] = (0.0, 0.0)
) -> ModelState:
    """Vortex whose pressure is reset to ``p_ref`` and ``pi' = 0`` everywhere."""
    state = init_vortex(grid, consts, center)
    P = np.full(grid.cell_shape, consts.p_ref / consts.R)
    return state.replace(
        P=P, pi=np.zeros(grid.node_shape), chi_p=state.rho / P - 1.0 / VORTEX_THETA
    )


def bubble_theta(x: FloatArray, z: FloatArray, amplitude: float) -> FloatArray:
    """``Theta_0 + amplitude cos(pi r / 2)`` inside the unit scaled radius."""
    r = np.hypot(x, z - BUBBLE_HEIGHT) / BUBBLE_RADIUS
    return np.where(  # type: ignore[no-any-return]
        r <= 1.0, BUBBLE_THETA + amplitude * np.cos(0.5 * np.pi * np.minimum(r, 1.0)), BUBBLE_THETA
    )


def init_bubble(grid: Grid, consts: PhysConstants, amplitude: float = 2.0) -> ModelState:
    """Warm bubble at rest in a hydrostatic column of constant ``Theta_0``.

    The pressure is the background pressure, so ``pi' = 0`` and the bubble
    starts out of balance.

    Raises:
        ConfigError: If ``amplitude`` is negative.
    """
    if amplitude < 0.0:
        raise ConfigError("run.amplitude", f"must not be negative, got {amplitude}")
    background = build_hydrostatic_background(bubble_background(), grid, consts)
    x, z = grid.cell_coordinates()
    theta = bubble_theta(x, z, amplitude)
    P = np.broadcast_to(background.P_cells, grid.cell_shape).copy()
    rho = P / theta
    zero = np.zeros(grid.cell_shape)
    return ModelState(
        rho=rho,
        rho_u=zero,
        rho_w=zero.copy(),
        P=P,
        chi_p=1.0 / theta - 1.0 / BUBBLE_THETA,
        pi=np.zeros(grid.node_shape),
        regime=Regime.COMPRESSIBLE,
        units=Units.SI,
    )
