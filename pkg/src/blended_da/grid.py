"""Uniform vertical-slice grid with cell-centred and node-centred points.

Cells are indexed ``(i, j)`` with ``i`` along x (axis 0) and ``j`` along z
(axis 1). Nodes sit at cell corners, so the node grid has ``(Nx+1, Nz+1)``
points. On a periodic axis node ``Nx`` (or ``Nz``) aliases node 0; the
*unique* nodes are then the first ``Nx`` (or ``Nz``) of them.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property

import numpy as np

from .errors import ConfigError
from .type_utils import FloatArray


class Boundary(Enum):
    """Boundary kind of one grid axis."""

    PERIODIC = "periodic"
    WALL = "wall"


@dataclass(frozen=True)
class Grid:
    """Uniform rectangular grid.

    Extents are in metres for the configured grid and dimensionless for the
    solver-internal copy returned by :meth:`scaled`.
    """

    Nx: int
    Nz: int
    x_min: float
    x_max: float
    z_min: float
    z_max: float
    bc_x: Boundary = Boundary.PERIODIC
    bc_z: Boundary = Boundary.PERIODIC

    def __post_init__(self) -> None:
        if self.Nx < 1 or self.Nz < 1:
            raise ConfigError(
                "domain.Nx" if self.Nx < 1 else "domain.Nz",
                f"cell counts must be positive, got ({self.Nx}, {self.Nz})",
            )
        if not self.x_max > self.x_min:
            raise ConfigError("domain.x_max", "must exceed domain.x_min")
        if not self.z_max > self.z_min:
            raise ConfigError("domain.z_max", "must exceed domain.z_min")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.Nx

    @property
    def dz(self) -> float:
        return (self.z_max - self.z_min) / self.Nz

    @property
    def periodic_x(self) -> bool:
        return self.bc_x is Boundary.PERIODIC

    @property
    def periodic_z(self) -> bool:
        return self.bc_z is Boundary.PERIODIC

    @property
    def cell_shape(self) -> tuple[int, int]:
        return self.Nx, self.Nz

    @property
    def node_shape(self) -> tuple[int, int]:
        return self.Nx + 1, self.Nz + 1

    @property
    def unique_node_shape(self) -> tuple[int, int]:
        nxn = self.Nx if self.periodic_x else self.Nx + 1
        nzn = self.Nz if self.periodic_z else self.Nz + 1
        return nxn, nzn

    @property
    def n_cells(self) -> int:
        return self.Nx * self.Nz

    @property
    def n_unique_nodes(self) -> int:
        nxn, nzn = self.unique_node_shape
        return nxn * nzn

    @cached_property
    def cell_x(self) -> FloatArray:
        return self.x_min + (np.arange(self.Nx) + 0.5) * self.dx

    @cached_property
    def cell_z(self) -> FloatArray:
        return self.z_min + (np.arange(self.Nz) + 0.5) * self.dz

    @cached_property
    def node_x(self) -> FloatArray:
        return self.x_min + np.arange(self.Nx + 1) * self.dx

    @cached_property
    def node_z(self) -> FloatArray:
        return self.z_min + np.arange(self.Nz + 1) * self.dz

    def cell_coordinates(self) -> tuple[FloatArray, FloatArray]:
        """Cell-centre coordinates as two ``(Nx, Nz)`` arrays."""
        x, z = np.meshgrid(self.cell_x, self.cell_z, indexing="ij")
        return x, z

    def node_coordinates(self) -> tuple[FloatArray, FloatArray]:
        x, z = np.meshgrid(self.node_x, self.node_z, indexing="ij")
        return x, z

    def scaled(self, length: float) -> Grid:
        """Return the grid with all extents divided by ``length``."""
        return replace(
            self,
            x_min=self.x_min / length,
            x_max=self.x_max / length,
            z_min=self.z_min / length,
            z_max=self.z_max / length,
        )

    def contains(self, x: float, z: float) -> bool:
        return self.x_min <= x <= self.x_max and self.z_min <= z <= self.z_max

    def nearest_cell(self, x: float, z: float) -> tuple[int, int]:
        """Index of the cell whose centre is closest to ``(x, z)``.

        Raises:
            ValueError: If the point lies outside the domain.
        """
        if not self.contains(x, z):
            raise ValueError(
                f"point ({x}, {z}) outside domain "
                f"[{self.x_min}, {self.x_max}] x [{self.z_min}, {self.z_max}]"
            )
        i = int(np.argmin(np.abs(self.cell_x - x)))
        j = int(np.argmin(np.abs(self.cell_z - z)))
        return i, j
