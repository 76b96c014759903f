import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from blended_da.config import Mode, ScenarioSpec
from blended_da.constants import PhysConstants
from blended_da.grid import Boundary, Grid
from blended_da.scenario import (
    ScenarioResult,
    _output_times,
    gen_observations,
    make_ensemble,
    observation_mask,
    spawn_streams,
)
from blended_da.state import STATE_VARIABLES, Units

from .fixtures import bubble_config, random_state, simulation, unit_grid, vortex_config

VORTEX_GRID = Grid(Nx=16, Nz=16, x_min=-5000.0, x_max=5000.0, z_min=-5000.0, z_max=5000.0)
BUBBLE_GRID = Grid(
    Nx=16, Nz=8, x_min=-10000.0, x_max=10000.0, z_min=0.0, z_max=10000.0, bc_z=Boundary.WALL
)


def _scenario(config, mode):
    return simulation(config.with_overrides(mode=mode)).experiment.run_scenario()


def test_streams_are_reproducible_and_independent():
    first = [rng.random(4) for rng in spawn_streams(5)]
    second = [rng.random(4) for rng in spawn_streams(5)]
    for a, b in zip(first, second):
        assert_array_equal(a, b)
    assert not np.allclose(first[0], first[1])
    assert not np.allclose(first[0], [rng.random(4) for rng in spawn_streams(6)][0])


@pytest.mark.parametrize(("n", "fraction"), [(100, 0.1), (30, 0.05), (7, 1.0)])
def test_observation_mask_size(n, fraction):
    mask = observation_mask(n, fraction, np.random.default_rng(90))
    assert mask.shape == (n,)
    assert mask.sum() == math.ceil(n * fraction)


def test_vortex_ensemble_draws_centres():
    spec = ScenarioSpec(case=vortex_config().case, K=4, center_range=(-1000.0, 1000.0))
    consts = PhysConstants(g=0.0)
    setup = make_ensemble(spec, VORTEX_GRID, consts, np.random.default_rng(91))
    assert setup.parameters.shape == (4, 2)
    assert np.all((setup.parameters >= -1000.0) & (setup.parameters < 1000.0))
    assert setup.ensemble.K == 4
    assert all(m.units is Units.NONDIMENSIONAL for m in setup.ensemble.members)
    assert not setup.obs_is_truth
    assert_array_equal(setup.obs.rho, setup.truth.rho)
    assert not np.array_equal(setup.ensemble.members[0].rho, setup.ensemble.members[1].rho)


def test_bubble_observations_come_from_the_truth():
    spec = ScenarioSpec(case=bubble_config().case, K=3)
    setup = make_ensemble(spec, BUBBLE_GRID, PhysConstants(u_ref=10.0), np.random.default_rng(92))
    assert setup.obs_is_truth
    assert setup.parameters.shape == (3,)
    assert np.all((setup.parameters >= 2.0) & (setup.parameters < 12.0))
    assert 2.0 <= float(setup.reference_parameter) < 12.0


def test_observations_sample_the_obs_run():
    config = vortex_config()
    setup = make_ensemble(config.scenario, VORTEX_GRID, config.constants, np.random.default_rng(93))
    spec = config.scenario
    batch = gen_observations(setup.obs, spec, 2.0, np.random.default_rng(1), np.random.default_rng(2))
    assert batch.variables == spec.letkf.observed_vars
    assert len(batch.indices) == math.ceil(VORTEX_GRID.n_cells * spec.obs_fraction)
    assert batch.time == 2.0
    for row, name in enumerate(batch.variables):
        field = setup.obs.field(name).ravel()
        expected = max(spec.noise_frac * np.ptp(field), 1e-12 * max(np.ptp(field), 1.0))
        assert_allclose(batch.noise_std[row], expected)


def test_noise_free_observations_are_exact():
    config = vortex_config()
    spec = ScenarioSpec(case=config.case, noise_frac=0.0, K=3)
    setup = make_ensemble(spec, VORTEX_GRID, config.constants, np.random.default_rng(94))
    batch = gen_observations(setup.obs, spec, 25.0, np.random.default_rng(3), np.random.default_rng(4))
    for row, name in enumerate(batch.variables):
        assert_array_equal(batch.values[row], setup.obs.field(name).ravel()[batch.indices])
        assert np.all(batch.noise_std[row] > 0.0)


def test_observation_noise_has_the_configured_spread():
    grid = unit_grid(100, 100)
    state = random_state(grid, np.random.default_rng(95))
    spec = ScenarioSpec(case=vortex_config().case, noise_frac=0.05, obs_fraction=1.0, K=3)
    batch = gen_observations(state, spec, 25.0, np.random.default_rng(5), np.random.default_rng(6))
    assert batch.indices.size == 10_000
    for row, name in enumerate(batch.variables):
        field = state.field(name).ravel()
        residual = batch.values[row] - field[batch.indices]
        sigma = spec.noise_frac * np.ptp(field)
        assert np.std(residual, ddof=1) == pytest.approx(sigma, rel=0.05)
        assert abs(np.mean(residual)) < 0.05 * sigma


def test_output_times():
    assert _output_times(10.0, None) == [10.0]
    assert _output_times(10.0, 4.0, [5.0, 12.0, 0.0]) == [4.0, 5.0, 8.0, 10.0]
    assert _output_times(300.0, 100.0, [100.0 + 1e-12]) == [100.0, 200.0, 300.0]


def test_result_series_puts_analyses_after_forecasts():
    result = ScenarioResult(ScenarioSpec())
    result.times = [0.0, 2.0]
    result.rmse["rho"] = [3.0, 2.0]
    result.analysis_times = [2.0]
    result.rmse_analysis["rho"] = [1.0]
    assert result.series("rho") == [(0.0, 3.0, 0), (2.0, 2.0, 0), (2.0, 1.0, 1)]


def test_scenario_without_assimilation():
    result = _scenario(vortex_config(), Mode.ENNODA)
    assert result.times == [0.0, 2.0, 4.0]
    assert result.analysis_times == []
    assert result.imbalance == []
    assert len(result.members) == 3
    assert result.truth.t == pytest.approx(4.0)
    for name in STATE_VARIABLES:
        assert all(np.isfinite(result.rmse[name]))


def test_free_ensemble_shares_the_observation_time_axis():
    config = vortex_config()
    free = _scenario(config, Mode.ENNODA)
    enda = _scenario(config, Mode.ENDA)
    assert free.times == enda.times
    assert free.times[1:] == list(config.scenario.observation_times())


def test_scenario_with_assimilation():
    config = vortex_config()
    free = _scenario(config, Mode.ENNODA)
    enda = _scenario(config, Mode.ENDA)
    assert enda.analysis_times == [2.0, 4.0]
    assert [t for t, _ in enda.imbalance] == [2.0, 4.0]
    assert all(value >= 0.0 for _, value in enda.imbalance)
    for name in STATE_VARIABLES:
        assert enda.rmse[name][0] == free.rmse[name][0]
    assert enda.rmse_analysis["rho_u"][0] != enda.rmse["rho_u"][1]


def test_blending_after_analysis_changes_the_forecast():
    config = vortex_config()
    enda = _scenario(config, Mode.ENDA)
    endab = _scenario(config, Mode.ENDAB)
    assert enda.rmse_analysis["rho"][0] == endab.rmse_analysis["rho"][0]
    assert enda.rmse["P"][2] != endab.rmse["P"][2]


def test_scenarios_are_reproducible():
    config = vortex_config()
    first = _scenario(config, Mode.ENDA)
    second = _scenario(config, Mode.ENDA)
    assert first.rmse == second.rmse
    assert first.rmse_analysis == second.rmse_analysis


def test_ensemble_mean():
    result = _scenario(vortex_config(), Mode.ENNODA)
    mean = result.ensemble_mean()
    assert_allclose(mean.rho, np.mean([m.rho for m in result.members], axis=0))
    assert mean.units is Units.SI


def test_bubble_single_run_records_every_step():
    config = bubble_config()
    record = simulation(config).experiment.run_single()
    assert record.times[0] == 0.0
    assert record.times[-1] == pytest.approx(20.0)
    assert len(record.pressure) == len(record.times)
    assert len(record.dts) == len(record.times) - 1
    assert_allclose(record.dts, 5.0)
    assert sorted(record.snapshots) == [0.0, 20.0]
    assert record.final.units is Units.SI
    assert np.all(record.pressure[0] > 0.0)
