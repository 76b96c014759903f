import numpy as np
import pytest
from numpy.testing import assert_allclose

from blended_da.advection import (
    AdvectiveFlux,
    FluxTime,
    Limiter,
    Transported,
    advect_full,
    advect_half,
)
from blended_da.errors import CflViolationError, RegimeError
from blended_da.grid import Grid

from .fixtures import random_state, unit_grid


def _flux(grid, rng, time, scale=0.2):
    return AdvectiveFlux.from_cells(
        scale * rng.standard_normal(grid.cell_shape),
        scale * rng.standard_normal(grid.cell_shape),
        grid,
        time,
    )


@pytest.mark.parametrize("wall_z", [False, True])
def test_half_step_conserves_totals(wall_z):
    grid = unit_grid(8, 6, wall_z=wall_z)
    rng = np.random.default_rng(20)
    transported = Transported.from_state(random_state(grid, rng))
    advected, report = advect_half(transported, _flux(grid, rng, FluxTime.N), 0.05, grid)
    assert advected.P.sum() == pytest.approx(transported.P.sum(), rel=1e-12)
    assert_allclose(advected.PPsi.sum(axis=(1, 2)), transported.PPsi.sum(axis=(1, 2)), rtol=1e-12, atol=1e-12)
    assert 0.0 < report.cfl < 1.0


@pytest.mark.parametrize("wall_z", [False, True])
def test_full_step_conserves_totals(wall_z):
    grid = unit_grid(8, 6, wall_z=wall_z)
    rng = np.random.default_rng(21)
    transported = Transported.from_state(random_state(grid, rng))
    advected, _ = advect_full(transported, _flux(grid, rng, FluxTime.HALF), 0.1, grid)
    assert advected.P.sum() == pytest.approx(transported.P.sum(), rel=1e-12)
    assert_allclose(advected.PPsi.sum(axis=(1, 2)), transported.PPsi.sum(axis=(1, 2)), rtol=1e-12, atol=1e-12)


def test_uniform_tracer_stays_uniform():
    """A constant Psi is transported exactly by any admissible flux field."""
    grid = unit_grid(8, 6)
    rng = np.random.default_rng(22)
    P = 1.0 + 0.1 * rng.random(grid.cell_shape)
    psi = np.array([0.5, 1.5, -2.0, 0.25])
    transported = Transported(P, psi[:, None, None] * P)
    advected, _ = advect_full(transported, _flux(grid, rng, FluxTime.HALF), 0.1, grid)
    assert_allclose(advected.psi, np.broadcast_to(psi[:, None, None], advected.psi.shape), rtol=1e-12)
    half, _ = advect_half(transported, _flux(grid, rng, FluxTime.N), 0.05, grid)
    assert_allclose(half.psi, np.broadcast_to(psi[:, None, None], half.psi.shape), rtol=1e-12)


def test_zero_flux_changes_nothing():
    grid = unit_grid(6, 4, wall_z=True)
    transported = Transported.from_state(random_state(grid, np.random.default_rng(23)))
    advected, report = advect_full(transported, AdvectiveFlux.zero(grid, FluxTime.HALF), 0.5, grid)
    assert_allclose(advected.PPsi, transported.PPsi)
    assert report.cfl == 0.0


def test_courant_number_above_one_is_rejected():
    grid = unit_grid(8, 6)
    rng = np.random.default_rng(24)
    transported = Transported.from_state(random_state(grid, rng))
    with pytest.raises(CflViolationError) as info:
        advect_half(transported, _flux(grid, rng, FluxTime.N, scale=5.0), 1.0, grid)
    assert info.value.cfl > 1.0


def test_flux_time_level_is_enforced():
    grid = unit_grid(4, 4)
    transported = Transported.from_state(random_state(grid, np.random.default_rng(25)))
    with pytest.raises(RegimeError, match="n\\+1/2"):
        advect_full(transported, AdvectiveFlux.zero(grid, FluxTime.N), 0.1, grid)
    with pytest.raises(RegimeError):
        advect_half(transported, AdvectiveFlux.zero(grid, FluxTime.HALF), 0.1, grid)


def _advection_error(n: int, limiter: Limiter) -> float:
    """L1 error after one period of a sine wave advected along x."""
    grid = Grid(Nx=n, Nz=2, x_min=0.0, x_max=1.0, z_min=0.0, z_max=1.0)
    x = np.broadcast_to(grid.cell_x[:, None], grid.cell_shape)
    # cell averages of sin(2 pi x)
    exact = (np.cos(2 * np.pi * (x - 0.5 * grid.dx)) - np.cos(2 * np.pi * (x + 0.5 * grid.dx))) / (
        2 * np.pi * grid.dx
    )
    P = np.ones(grid.cell_shape)
    transported = Transported(P, np.stack([exact] * 4))
    flux = AdvectiveFlux(
        np.ones((grid.Nx + 1, grid.Nz)), np.zeros((grid.Nx, grid.Nz + 1)), FluxTime.HALF
    )
    steps = int(round(2.5 * n))
    dt = 1.0 / steps
    for _ in range(steps):
        transported, _ = advect_full(transported, flux, dt, grid, limiter)
    return float(np.mean(np.abs(transported.psi[1] - exact)))


def test_limited_advection_converges_at_second_order():
    errors = [_advection_error(n, Limiter.MC) for n in (32, 64, 128)]
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert orders.mean() >= 1.8


def test_unlimited_advection_is_first_order_upwind():
    coarse, fine = (_advection_error(n, Limiter.NONE) for n in (32, 64))
    assert 0.7 <= np.log2(coarse / fine) <= 1.3


def test_limited_advection_keeps_a_square_pulse_within_bounds():
    """MC slopes create no new extrema under a uniform diagonal flow."""
    grid = Grid(Nx=32, Nz=32, x_min=0.0, x_max=1.0, z_min=0.0, z_max=1.0)
    x = np.broadcast_to(grid.cell_x[:, None], grid.cell_shape)
    z = np.broadcast_to(grid.cell_z[None, :], grid.cell_shape)
    pulse = np.where((np.abs(x - 0.3) < 0.15) & (np.abs(z - 0.4) < 0.1), 1.0, 0.0)
    P = np.ones(grid.cell_shape)
    start = Transported(P, np.stack([pulse, -pulse, 2.0 * pulse + 1.0, pulse]))
    flux = AdvectiveFlux(
        np.ones((grid.Nx + 1, grid.Nz)), np.full((grid.Nx, grid.Nz + 1), 0.5), FluxTime.HALF
    )
    transported = start
    for _ in range(40):
        transported, report = advect_full(transported, flux, 0.8 * grid.dx, grid, Limiter.MC)
        assert report.cfl <= 1.0
    low = start.psi.min(axis=(1, 2))
    high = start.psi.max(axis=(1, 2))
    assert np.all(transported.psi.min(axis=(1, 2)) >= low - 1e-12)
    assert np.all(transported.psi.max(axis=(1, 2)) <= high + 1e-12)
    assert not np.allclose(transported.psi[0], pulse)
