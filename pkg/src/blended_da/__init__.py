from .blending import Blender, to_comp, to_psinc
from .config import RunConfig, ScenarioSpec, config_from_mapping, load_config
from .constants import NondimParameters, PhysConstants
from .errors import (
    BlendedDaError,
    ConfigError,
    ConversionError,
    EnsembleError,
    NumericalError,
    RegimeError,
)
from .grid import Boundary, Grid
from .letkf import Assimilator, ObservationBatch
from .module import SimulationModule
from .scenario import ExperimentRunner, make_ensemble
from .state import ModelState, Regime, dimensionalise, nondimensionalise
from .stepper import Stepper

__all__: list[str] = [
    "Assimilator",
    "BlendedDaError",
    "Blender",
    "Boundary",
    "ConfigError",
    "ConversionError",
    "EnsembleError",
    "ExperimentRunner",
    "Grid",
    "ModelState",
    "NondimParameters",
    "NumericalError",
    "ObservationBatch",
    "PhysConstants",
    "Regime",
    "RegimeError",
    "RunConfig",
    "ScenarioSpec",
    "SimulationModule",
    "Stepper",
    "config_from_mapping",
    "dimensionalise",
    "load_config",
    "make_ensemble",
    "nondimensionalise",
    "to_comp",
    "to_psinc",
]
