"""Conservative advection of ``P Psi`` by prescribed face fluxes.

``Psi = (chi, chi u, chi w, chi')`` so ``P Psi = (rho, rho u, rho w, P chi')``.
The half step uses an unsplit first-order upwind update. The full step is a
Strang sequence of one-dimensional sweeps, x over ``dt/2``, z over ``dt``,
x over ``dt/2``, with piecewise-linear reconstruction, a slope limiter and
characteristic tracing of the face states.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import CflViolationError, RegimeError
from .grid import Grid
from .operators import face_divergence, face_fluxes
from .state import ModelState
from .type_utils import FloatArray

CFL_SLACK = 1e-12


class Limiter(Enum):
    """Slope limiter of the full-step reconstruction."""

    MC = "mc"
    NONE = "none"


class FluxTime(Enum):
    N = "n"
    HALF = "n+1/2"


@dataclass(frozen=True, eq=False)
class AdvectiveFlux:
    """Mass-weighted face fluxes ``P u`` on x-faces and ``P w`` on z-faces."""

    pu: FloatArray
    pw: FloatArray
    time: FluxTime

    @classmethod
    def from_cells(
        cls, pu: FloatArray, pw: FloatArray, grid: Grid, time: FluxTime
    ) -> AdvectiveFlux:
        fx, fz = face_fluxes(pu, pw, grid)
        return cls(fx, fz, time)

    @classmethod
    def zero(cls, grid: Grid, time: FluxTime = FluxTime.N) -> AdvectiveFlux:
        return cls(
            np.zeros((grid.Nx + 1, grid.Nz)), np.zeros((grid.Nx, grid.Nz + 1)), time
        )

    def divergence(self, grid: Grid) -> FloatArray:
        return face_divergence(self.pu, self.pw, grid)


@dataclass(frozen=True, eq=False)
class Transported:
    """The advected pair ``P`` and ``P Psi``; ``PPsi`` has shape ``(4, Nx, Nz)``."""

    P: FloatArray
    PPsi: FloatArray

    @classmethod
    def from_state(cls, state: ModelState) -> Transported:
        return cls(
            state.P,
            np.stack((state.rho, state.rho_u, state.rho_w, state.P * state.chi_p)),
        )

    @property
    def psi(self) -> FloatArray:
        return self.PPsi / self.P  # type: ignore[no-any-return]


@dataclass(frozen=True)
class AdvectionReport:
    """Largest Courant numbers met during one advection call."""

    cfl_x: float
    cfl_z: float

    @property
    def cfl(self) -> float:
        return max(self.cfl_x, self.cfl_z)


def _face_average(P: FloatArray, axis: int, periodic: bool) -> FloatArray:
    width = [(0, 0)] * P.ndim
    width[axis] = (1, 1)
    padded = np.pad(P, width, mode="wrap" if periodic else "edge")
    lo = np.take(padded, np.arange(padded.shape[axis] - 1), axis=axis)
    hi = np.take(padded, np.arange(1, padded.shape[axis]), axis=axis)
    return 0.5 * (lo + hi)  # type: ignore[no-any-return]


def _courant(
    flux: FloatArray, P: FloatArray, dt: float, spacing: float, axis: int, periodic: bool
) -> FloatArray:
    return flux / _face_average(P, axis, periodic) * dt / spacing  # type: ignore[no-any-return]


def _check_cfl(nu: FloatArray, where: str) -> float:
    cfl = float(np.max(np.abs(nu))) if nu.size else 0.0
    if cfl > 1.0 + CFL_SLACK:
        raise CflViolationError(cfl, where)
    return cfl


def _require_time(flux: AdvectiveFlux, expected: FluxTime, operator: str) -> None:
    if flux.time is not expected:
        raise RegimeError(
            f"{operator} needs fluxes at time level {expected.value}, got {flux.time.value}"
        )


def advect_half(
    transported: Transported, flux: AdvectiveFlux, dt: float, grid: Grid
) -> tuple[Transported, AdvectionReport]:
    """Forward-Euler upwind update over ``dt`` (the half step length).

    Raises:
        CflViolationError: If a face Courant number exceeds one.
        RegimeError: If ``flux`` is not tagged with time level ``n``.
    """
    _require_time(flux, FluxTime.N, "advect_half")
    P = transported.P
    psi = transported.psi
    nu_x = _courant(flux.pu, P, dt, grid.dx, -2, grid.periodic_x)
    nu_z = _courant(flux.pw, P, dt, grid.dz, -1, grid.periodic_z)
    report = AdvectionReport(
        _check_cfl(nu_x, "advect_half (x)"), _check_cfl(nu_z, "advect_half (z)")
    )

    px = np.pad(psi, ((0, 0), (1, 1), (0, 0)), mode="wrap" if grid.periodic_x else "edge")
    upwind_x = np.where(flux.pu >= 0.0, px[:, :-1, :], px[:, 1:, :])
    pz = np.pad(psi, ((0, 0), (0, 0), (1, 1)), mode="wrap" if grid.periodic_z else "edge")
    upwind_z = np.where(flux.pw >= 0.0, pz[:, :, :-1], pz[:, :, 1:])

    PPsi = transported.PPsi - dt * face_divergence(
        flux.pu * upwind_x, flux.pw * upwind_z, grid
    )
    P_new = P - dt * flux.divergence(grid)
    return Transported(P_new, PPsi), report


def _limited_slopes(psi_padded: FloatArray, limiter: Limiter) -> FloatArray:
    """Undivided slopes for cells ``-1 .. N`` along the last axis."""
    centre = psi_padded[..., 1:-1]
    if limiter is Limiter.NONE:
        return np.zeros_like(centre)
    fwd = psi_padded[..., 2:] - centre
    bwd = centre - psi_padded[..., :-2]
    magnitude = np.minimum(
        np.minimum(2.0 * np.abs(fwd), 2.0 * np.abs(bwd)), 0.5 * np.abs(fwd + bwd)
    )
    return np.where(fwd * bwd > 0.0, np.sign(fwd) * magnitude, 0.0)  # type: ignore[no-any-return]


def _sweep(
    P: FloatArray,
    PPsi: FloatArray,
    flux: FloatArray,
    dt: float,
    spacing: float,
    *,
    periodic: bool,
    limiter: Limiter,
    where: str,
) -> tuple[FloatArray, FloatArray, float]:
    """One-dimensional conservative update along the last axis."""
    mode = "wrap" if periodic else "edge"
    P_pad = np.pad(P, ((0, 0), (1, 1)), mode=mode)
    nu = flux / (0.5 * (P_pad[:, :-1] + P_pad[:, 1:])) * dt / spacing
    cfl = _check_cfl(nu, where)

    psi = PPsi / P
    psi_pad = np.pad(psi, ((0, 0), (0, 0), (2, 2)), mode=mode)
    sigma = _limited_slopes(psi_pad, limiter)
    centre = psi_pad[..., 1:-1]
    left = centre[..., :-1] + 0.5 * (1.0 - nu) * sigma[..., :-1]
    right = centre[..., 1:] - 0.5 * (1.0 + nu) * sigma[..., 1:]
    face_flux = flux * np.where(flux >= 0.0, left, right)

    PPsi_new = PPsi - dt / spacing * (face_flux[..., 1:] - face_flux[..., :-1])
    P_new = P - dt / spacing * (flux[:, 1:] - flux[:, :-1])
    return P_new, PPsi_new, cfl


def advect_full(
    transported: Transported,
    flux: AdvectiveFlux,
    dt: float,
    grid: Grid,
    limiter: Limiter = Limiter.MC,
) -> tuple[Transported, AdvectionReport]:
    """Strang-split x(dt/2), z(dt), x(dt/2) second-order advection.

    Raises:
        CflViolationError: If a directional Courant number exceeds one.
        RegimeError: If ``flux`` is not tagged with time level ``n+1/2``.
    """
    _require_time(flux, FluxTime.HALF, "advect_full")
    P, PPsi = transported.P, transported.PPsi

    def sweep_x(P: FloatArray, PPsi: FloatArray, tau: float) -> tuple[FloatArray, FloatArray, float]:
        P_t, PPsi_t, cfl = _sweep(
            P.T,
            np.swapaxes(PPsi, -1, -2),
            flux.pu.T,
            tau,
            grid.dx,
            periodic=grid.periodic_x,
            limiter=limiter,
            where="advect_full (x)",
        )
        return P_t.T, np.swapaxes(PPsi_t, -1, -2), cfl

    P, PPsi, cfl_x1 = sweep_x(P, PPsi, 0.5 * dt)
    P, PPsi, cfl_z = _sweep(
        P,
        PPsi,
        flux.pw,
        dt,
        grid.dz,
        periodic=grid.periodic_z,
        limiter=limiter,
        where="advect_full (z)",
    )
    P, PPsi, cfl_x2 = sweep_x(P, PPsi, 0.5 * dt)
    return Transported(P, PPsi), AdvectionReport(max(cfl_x1, cfl_x2), cfl_z)
