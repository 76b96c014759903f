"""Composition root wiring the configuration into the simulation components."""

from __future__ import annotations

from reactor_di import CachingStrategy, module, thread_safe_cached_property

from .blending import Blender
from .config import Case, RunConfig, ScenarioSpec
from .constants import NondimParameters
from .grid import Grid
from .hydrostatics import HydroBackground, build_hydrostatic_background
from .initial_conditions import bubble_background, vortex_background
from .letkf import Assimilator
from .scenario import ExperimentRunner
from .state import nondimensionalise
from .stepper import Stepper


@module(CachingStrategy.THREAD_SAFE)
class SimulationModule:
    """Provides the solver-unit grid, background and parameters of a run.

    Components are created on first access and shared afterwards, also across
    the ensemble worker threads.

    Example:
        >>> simulation = SimulationModule(load_config("configs/bubble.yaml"))  # doctest: +SKIP
        >>> record = simulation.experiment.run_single()  # doctest: +SKIP
    """

    stepper: Stepper
    blender: Blender
    assimilator: Assimilator
    experiment: ExperimentRunner

    def __init__(self, config: RunConfig) -> None:
        self.config = config

    @thread_safe_cached_property
    def grid(self) -> Grid:
        grid: Grid = nondimensionalise(self.config.domain, self.config.constants)
        return grid

    @thread_safe_cached_property
    def background(self) -> HydroBackground:
        profile = vortex_background() if self.config.case is Case.VORTEX else bubble_background()
        consts = self.config.constants
        return build_hydrostatic_background(profile, self.config.domain, consts).nondimensional(
            consts
        )

    @thread_safe_cached_property
    def nondim(self) -> NondimParameters:
        return self.config.constants.nondimensional()

    @thread_safe_cached_property
    def scenario(self) -> ScenarioSpec:
        return self.config.scenario
