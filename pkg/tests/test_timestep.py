import numpy as np
import pytest

from blended_da.errors import ConfigError
from blended_da.state import Regime
from blended_da.timestep import DtPolicy, StepPlan, compute_dt

from .fixtures import random_state, unit_grid


def test_cfl_step_uses_largest_pointwise_speed():
    grid = unit_grid(8, 4)
    state = random_state(grid, np.random.default_rng(40), velocity=0.0)
    rho_u = np.zeros(grid.cell_shape)
    rho_u[2, 1] = 2.0 * state.rho[2, 1]
    state = state.replace(rho_u=rho_u)
    plan = StepPlan(cfl_target=0.45)
    assert compute_dt(state, plan, grid) == pytest.approx(0.45 * grid.dx / 2.0)


def test_vortex_step_length():
    """||u|| = 100 sqrt(2) + 25 m/s on dx = 156.25 m at CFL 0.45."""
    speed = 100.0 * np.sqrt(2.0) + 25.0
    assert 0.45 * 156.25 / speed == pytest.approx(0.423, abs=1e-3)


def test_overrides_take_precedence_by_step_counter():
    grid = unit_grid()
    state = random_state(grid, np.random.default_rng(41))
    plan = StepPlan(dt_policy=DtPolicy.FIXED, dt=0.5, dt_overrides=(0.1, 0.2))
    assert compute_dt(state, plan, grid) == 0.1
    assert compute_dt(state.replace(step=1), plan, grid) == 0.2
    assert compute_dt(state.replace(step=2), plan, grid) == 0.5


def test_cfl_step_is_capped():
    grid = unit_grid()
    state = random_state(grid, np.random.default_rng(42), velocity=1e-6)
    assert compute_dt(state, StepPlan(dt_max=0.01), grid) == 0.01


def test_fluid_at_rest_needs_a_cap():
    grid = unit_grid()
    state = random_state(grid, np.random.default_rng(43), velocity=0.0)
    with pytest.raises(ConfigError, match="dt_max"):
        compute_dt(state, StepPlan(), grid)
    assert compute_dt(state, StepPlan(dt_max=0.3), grid) == 0.3


@pytest.mark.parametrize(
    "kwargs",
    [
        {"alpha_P": 2},
        {"dt_policy": DtPolicy.FIXED},
        {"cfl_target": 1.5},
        {"dt_overrides": (0.1, -0.1)},
        {"dt_max": 0.0},
    ],
)
def test_invalid_plans_are_rejected(kwargs):
    with pytest.raises(ConfigError):
        StepPlan(**kwargs)


def test_plan_regime_switch():
    plan = StepPlan()
    assert plan.regime is Regime.COMPRESSIBLE
    assert plan.with_regime(Regime.PSINC).alpha_P == 0
