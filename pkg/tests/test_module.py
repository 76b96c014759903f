"""Wiring of the simulation components through the composition root."""

from __future__ import annotations

import threading

import pytest

from blended_da.config import Mode
from blended_da.module import SimulationModule
from blended_da.state import Units

from .fixtures import bubble_config, vortex_config


def test_components_are_cached():
    """Repeated access returns the same component instances."""
    simulation = SimulationModule(vortex_config())
    assert simulation.stepper is simulation.stepper
    assert simulation.experiment is simulation.experiment
    assert simulation.grid is simulation.grid


def test_components_share_their_collaborators():
    """The blender, runner and assimilator resolve the module's shared instances."""
    simulation = SimulationModule(vortex_config())
    assert simulation.blender._stepper is simulation.stepper
    assert simulation.experiment._blender is simulation.blender
    assert simulation.experiment._assimilator is simulation.assimilator
    assert simulation.assimilator._grid is simulation.grid


def test_configuration_is_forwarded():
    """Configuration sections reach the components through their parent object."""
    config = vortex_config().with_overrides(region=7, mode=Mode.ENDA)
    simulation = SimulationModule(config)
    assert simulation.assimilator._letkf.region == 7
    assert simulation.blender._blend.apply_after_da is False
    assert simulation.experiment._workers == config.workers
    assert simulation.stepper._numerics is config.numerics


def test_grid_is_in_solver_units():
    """The module grid is the configured domain scaled by the reference length."""
    config = bubble_config()
    simulation = SimulationModule(config)
    assert simulation.grid.Nx == config.domain.Nx
    assert simulation.grid.z_max == pytest.approx(config.domain.z_max / config.constants.h_ref)


def test_background_matches_the_case():
    """The bubble sits in a stratified column, the vortex in a uniform one."""
    bubble = SimulationModule(bubble_config()).background
    vortex = SimulationModule(vortex_config()).background
    assert bubble.pi_cells.max() > bubble.pi_cells.min()
    assert vortex.pi_cells.max() == pytest.approx(vortex.pi_cells.min())


def test_concurrent_access_single_instantiation():
    """Worker threads racing for the runner all get the same instance."""
    simulation = SimulationModule(vortex_config())
    num_threads = 8
    results: list = []
    barrier = threading.Barrier(num_threads)

    def access() -> None:
        barrier.wait()
        results.append(simulation.experiment._stepper)

    threads = [threading.Thread(target=access) for _ in range(num_threads)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    assert len(results) == num_threads
    assert all(r is results[0] for r in results)


def test_parallel_members_match_serial_members():
    """Running the members in a thread pool does not change the result."""
    serial = SimulationModule(vortex_config(workers=1)).experiment.run_scenario()
    parallel = SimulationModule(vortex_config(workers=3)).experiment.run_scenario()
    assert serial.rmse == parallel.rmse
    assert serial.rmse_analysis == parallel.rmse_analysis
    assert all(m.units is Units.SI for m in parallel.members)
