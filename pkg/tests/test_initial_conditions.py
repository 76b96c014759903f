import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import quad

from blended_da.constants import PhysConstants
from blended_da.errors import ConfigError
from blended_da.grid import Boundary, Grid
from blended_da.initial_conditions import (
    BUBBLE_HEIGHT,
    BUBBLE_THETA,
    VORTEX_BACKGROUND_WIND,
    VORTEX_MAX_SPEED,
    VORTEX_RADIUS,
    _pressure_deficit,
    _vortex_fields,
    bubble_theta,
    init_bubble,
    init_vortex,
    init_vortex_imbalanced,
)
from blended_da.state import Regime, Units

VORTEX_CONSTANTS = PhysConstants(g=0.0)


def _vortex_grid(n=32):
    return Grid(Nx=n, Nz=n, x_min=-5000.0, x_max=5000.0, z_min=-5000.0, z_max=5000.0)


def _bubble_grid():
    return Grid(
        Nx=40, Nz=20, x_min=-10000.0, x_max=10000.0, z_min=0.0, z_max=10000.0, bc_z=Boundary.WALL
    )


def test_vortex_ranges():
    consts = VORTEX_CONSTANTS
    state = init_vortex(_vortex_grid(), consts)
    assert state.units is Units.SI
    assert state.regime is Regime.COMPRESSIBLE
    assert state.rho.min() == pytest.approx(0.5 * consts.rho_ref)
    assert state.rho.max() <= consts.rho_ref
    speed = np.hypot(state.rho_u / state.rho - VORTEX_BACKGROUND_WIND, state.rho_w / state.rho - VORTEX_BACKGROUND_WIND)
    assert speed.max() <= VORTEX_MAX_SPEED * (1.0 + 1e-12)
    assert speed.max() > 0.9 * VORTEX_MAX_SPEED


def test_vortex_is_at_rest_pressure_outside_its_support():
    consts = VORTEX_CONSTANTS
    grid = _vortex_grid()
    state = init_vortex(grid, consts)
    x, z = grid.cell_coordinates()
    outside = np.hypot(x, z) > VORTEX_RADIUS
    assert_allclose(state.P[outside], consts.p_ref / consts.R)
    assert state.P[~outside].min() < consts.p_ref / consts.R
    xn, zn = grid.node_coordinates()
    assert_allclose(state.pi[np.hypot(xn, zn) > VORTEX_RADIUS], 0.0, atol=1e-14)
    assert state.pi.min() < 0.0


def test_vortex_pressure_is_cyclostrophic():
    consts = VORTEX_CONSTANTS
    grid = _vortex_grid()
    r = np.linspace(200.0, 3800.0, 20001)
    rho, _, w, p, _ = _vortex_fields(r, np.zeros_like(r), grid, consts, (0.0, 0.0))
    u_theta = w - VORTEX_BACKGROUND_WIND
    dpdr = np.gradient(p, r)
    assert_allclose(dpdr[1:-1], (rho * u_theta**2 / r)[1:-1], rtol=1e-4, atol=1e-6)


def test_pressure_deficit_matches_quadrature():
    Q = _pressure_deficit()

    def integrand(t):
        return (0.5 + 0.5 * (1.0 - t**2) ** 6) * (1.0 - t) ** 12 * t**11

    total = quad(integrand, 0.0, 1.0, epsabs=0.0, epsrel=1e-13)[0]
    for s in np.linspace(0.0, 0.95, 20):
        expected = quad(integrand, s, 1.0, epsabs=0.0, epsrel=1e-13)[0]
        assert Q(1.0) - Q(s) == pytest.approx(expected, rel=1e-9, abs=1e-12 * total)


def test_vortex_wraps_across_periodic_boundaries():
    consts = VORTEX_CONSTANTS
    grid = _vortex_grid()
    centred = init_vortex(grid, consts, (0.0, 0.0))
    shifted = init_vortex(grid, consts, (-5000.0, 0.0))
    assert_allclose(np.roll(centred.rho, grid.Nx // 2, axis=0), shifted.rho, rtol=1e-12)


def test_vortex_centre_outside_domain():
    with pytest.raises(ConfigError, match="outside"):
        init_vortex(_vortex_grid(), VORTEX_CONSTANTS, (6000.0, 0.0))


def test_imbalanced_vortex_drops_the_pressure_perturbation():
    consts = VORTEX_CONSTANTS
    grid = _vortex_grid()
    balanced = init_vortex(grid, consts)
    state = init_vortex_imbalanced(grid, consts)
    assert_allclose(state.rho, balanced.rho)
    assert_allclose(state.rho_u, balanced.rho_u)
    assert_allclose(state.P, consts.p_ref / consts.R)
    assert not state.pi.any()


def test_bubble_starts_at_rest_with_a_warm_anomaly():
    consts = PhysConstants(u_ref=10.0)
    grid = _bubble_grid()
    state = init_bubble(grid, consts, amplitude=2.0)
    assert not state.rho_u.any()
    assert not state.rho_w.any()
    assert not state.pi.any()
    theta = state.P / state.rho
    assert theta.max() <= BUBBLE_THETA + 2.0
    assert theta.max() > BUBBLE_THETA + 1.5
    assert theta.min() == pytest.approx(BUBBLE_THETA)
    assert_allclose(state.chi_p, 1.0 / theta - 1.0 / BUBBLE_THETA, atol=1e-15)
    assert np.all(np.diff(state.P, axis=1) < 0.0)


def test_bubble_without_amplitude_is_the_background():
    state = init_bubble(_bubble_grid(), PhysConstants(u_ref=10.0), amplitude=0.0)
    assert_allclose(state.chi_p, 0.0, atol=1e-15)


def test_bubble_theta_profile():
    x = np.array([0.0, 1000.0, 2000.0, 5000.0])
    z = np.full_like(x, BUBBLE_HEIGHT)
    assert_allclose(bubble_theta(x, z, 2.0), [302.0, 300.0 + 2.0 * np.cos(np.pi / 4.0), 300.0, 300.0])


def test_negative_bubble_amplitude():
    with pytest.raises(ConfigError, match="amplitude"):
        init_bubble(_bubble_grid(), PhysConstants(u_ref=10.0), amplitude=-1.0)
