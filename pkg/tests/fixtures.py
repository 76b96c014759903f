"""Builders shared by the tests.

Grids are kept small so every test runs in well under a second, except where a
test needs a particular resolution.
"""

from __future__ import annotations

from typing import Any

import numpy as np

from blended_da.config import RunConfig, config_from_mapping
from blended_da.grid import Boundary, Grid
from blended_da.module import SimulationModule
from blended_da.operators import full_nodes
from blended_da.state import ModelState, Regime, Units


def merge(base: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    """Recursive dictionary update returning a new mapping."""
    result = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(result.get(key), dict):
            result[key] = merge(result[key], value)
        else:
            result[key] = value
    return result


def vortex_mapping(n: int = 16, **overrides: Any) -> dict[str, Any]:
    base: dict[str, Any] = {
        "name": "vortex_test",
        "case": "vortex",
        "domain": {
            "Nx": n,
            "Nz": n,
            "x_min": -5000.0,
            "x_max": 5000.0,
            "z_min": -5000.0,
            "z_max": 5000.0,
            "bc_x": "periodic",
            "bc_z": "periodic",
        },
        "constants": {"u_ref": 100.0, "g": 0.0},
        "time": {"t_final": 5.0, "dt_policy": "cfl", "cfl_target": 0.45},
        "run": {"probes": {"center": [0.0, 0.0]}},
        "scenario": {
            "K": 3,
            "t_first": 2.0,
            "dt_obs": 2.0,
            "t_final": 4.0,
            "letkf": {"region": 5, "observed_vars": ["rho", "rho_u", "rho_w", "P", "pi"]},
        },
    }
    return merge(base, overrides)


def bubble_mapping(nx: int = 16, nz: int = 8, **overrides: Any) -> dict[str, Any]:
    base: dict[str, Any] = {
        "name": "bubble_test",
        "case": "bubble",
        "domain": {
            "Nx": nx,
            "Nz": nz,
            "x_min": -10000.0,
            "x_max": 10000.0,
            "z_min": 0.0,
            "z_max": 10000.0,
            "bc_x": "periodic",
            "bc_z": "wall",
        },
        "constants": {"u_ref": 10.0, "g": 9.81},
        "time": {"t_final": 20.0, "dt_policy": "fixed", "dt": 5.0},
        "run": {"amplitude": 2.0, "probes": {"top": [0.0, 5000.0]}},
        "scenario": {
            "K": 3,
            "t_first": 10.0,
            "dt_obs": 10.0,
            "t_final": 20.0,
            "letkf": {"region": 5},
        },
    }
    return merge(base, overrides)


def vortex_config(n: int = 16, **overrides: Any) -> RunConfig:
    return config_from_mapping(vortex_mapping(n, **overrides))


def bubble_config(nx: int = 16, nz: int = 8, **overrides: Any) -> RunConfig:
    return config_from_mapping(bubble_mapping(nx, nz, **overrides))


def simulation(config: RunConfig) -> SimulationModule:
    return SimulationModule(config)


def unit_grid(nx: int = 8, nz: int = 6, *, wall_z: bool = False) -> Grid:
    return Grid(
        Nx=nx,
        Nz=nz,
        x_min=0.0,
        x_max=1.0,
        z_min=0.0,
        z_max=1.0,
        bc_z=Boundary.WALL if wall_z else Boundary.PERIODIC,
    )


def random_nodes(grid: Grid, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Full node field consistent with periodic aliasing."""
    return full_nodes(scale * rng.standard_normal(grid.unique_node_shape), grid)


def random_state(
    grid: Grid,
    rng: np.random.Generator,
    *,
    regime: Regime = Regime.COMPRESSIBLE,
    velocity: float = 0.1,
    pi_scale: float = 0.1,
) -> ModelState:
    """Nondimensional state with ``rho, P`` near one and small velocities."""
    shape = grid.cell_shape
    rho = 1.0 + 0.1 * rng.random(shape)
    P = 1.0 + 0.1 * rng.random(shape)
    return ModelState(
        rho=rho,
        rho_u=rho * velocity * rng.standard_normal(shape),
        rho_w=rho * velocity * rng.standard_normal(shape),
        P=P,
        chi_p=0.01 * rng.standard_normal(shape),
        pi=random_nodes(grid, rng, pi_scale),
        regime=regime,
        units=Units.NONDIMENSIONAL,
    )
