"""Discrete differential and averaging operators on the cell/node grid.

The node-to-cell gradient and the cell-to-node divergence are exact negative
adjoints of each other with respect to the plain sums over cells and unique
nodes. The elliptic assembly and the momentum correction rely on this.

Cell arrays have shape ``(..., Nx, Nz)``; node arrays are stored in full,
``(..., Nx+1, Nz+1)``, with aliased copies on periodic axes.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .grid import Grid
from .type_utils import FloatArray


def _pad_axis(field: FloatArray, axis: int, *, periodic: bool, wall: str) -> FloatArray:
    width = [(0, 0)] * field.ndim
    width[axis] = (1, 1)
    if periodic:
        return np.pad(field, width, mode="wrap")
    if wall == "zero":
        return np.pad(field, width, mode="constant")
    return np.pad(field, width, mode="edge")


def pad_cells(field: FloatArray, grid: Grid, *, wall: str = "zero") -> FloatArray:
    """Add one ghost layer around the cell array.

    Periodic axes wrap. Wall axes get zero ghosts (``wall="zero"``) or copies of
    the boundary cells (``wall="edge"``).
    """
    padded = _pad_axis(field, -2, periodic=grid.periodic_x, wall=wall)
    return _pad_axis(padded, -1, periodic=grid.periodic_z, wall=wall)


def node_gradient(pi: FloatArray, grid: Grid) -> tuple[FloatArray, FloatArray]:
    """Gradient of a full node field, evaluated at cell centres."""
    gx = (pi[..., 1:, :-1] + pi[..., 1:, 1:] - pi[..., :-1, :-1] - pi[..., :-1, 1:]) / (
        2.0 * grid.dx
    )
    gz = (pi[..., :-1, 1:] + pi[..., 1:, 1:] - pi[..., :-1, :-1] - pi[..., 1:, :-1]) / (
        2.0 * grid.dz
    )
    return gx, gz


def node_divergence(fx: FloatArray, fz: FloatArray, grid: Grid) -> FloatArray:
    """Divergence of a cell vector field, evaluated at nodes.

    Cells outside a wall contribute zero, which imposes zero normal flux.
    """
    px = pad_cells(fx, grid)
    pz = pad_cells(fz, grid)
    div_x = (px[..., 1:, :-1] + px[..., 1:, 1:] - px[..., :-1, :-1] - px[..., :-1, 1:]) / (
        2.0 * grid.dx
    )
    div_z = (pz[..., :-1, 1:] + pz[..., 1:, 1:] - pz[..., :-1, :-1] - pz[..., 1:, :-1]) / (
        2.0 * grid.dz
    )
    return div_x + div_z  # type: ignore[no-any-return]


def cells_to_nodes(field: FloatArray, grid: Grid) -> FloatArray:
    """Average the four cells around each node, replicating cells at walls."""
    p = pad_cells(field, grid, wall="edge")
    return 0.25 * (p[..., :-1, :-1] + p[..., 1:, :-1] + p[..., :-1, 1:] + p[..., 1:, 1:])  # type: ignore[no-any-return]


def nodes_to_cells(pi: FloatArray) -> FloatArray:
    """Average the four nodes around each cell."""
    return 0.25 * (pi[..., :-1, :-1] + pi[..., 1:, :-1] + pi[..., :-1, 1:] + pi[..., 1:, 1:])  # type: ignore[no-any-return]


def node_volume_fraction(grid: Grid) -> FloatArray:
    """Control-volume fraction of each node: 1/2 per wall it sits on."""
    weight = np.ones(grid.node_shape)
    if not grid.periodic_x:
        weight[0, :] *= 0.5
        weight[-1, :] *= 0.5
    if not grid.periodic_z:
        weight[:, 0] *= 0.5
        weight[:, -1] *= 0.5
    return weight


def unique_nodes(pi: FloatArray, grid: Grid) -> FloatArray:
    nxn, nzn = grid.unique_node_shape
    return pi[..., :nxn, :nzn]


def full_nodes(values: FloatArray, grid: Grid) -> FloatArray:
    """Expand unique node values to the full node array."""
    width = [(0, 0)] * (values.ndim - 2)
    width.append((0, 1 if grid.periodic_x else 0))
    width.append((0, 1 if grid.periodic_z else 0))
    return np.pad(values, width, mode="wrap")


def _unique_index(i: np.ndarray, j: np.ndarray, grid: Grid) -> np.ndarray:
    nxn, nzn = grid.unique_node_shape
    if grid.periodic_x:
        i = i % nxn
    if grid.periodic_z:
        j = j % nzn
    return i * nzn + j  # type: ignore[no-any-return]


@lru_cache(maxsize=16)
def gradient_matrices(grid: Grid) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Sparse versions of :func:`node_gradient` acting on flattened unique nodes.

    Returns:
        ``(Gx, Gz)``, each of shape ``(Nx*Nz, n_unique_nodes)`` and mapping to
        cells flattened in ``(i, j)`` row-major order.
    """
    i, j = np.meshgrid(np.arange(grid.Nx), np.arange(grid.Nz), indexing="ij")
    rows = np.arange(grid.n_cells)
    corners = {
        (0, 0): _unique_index(i, j, grid).ravel(),
        (1, 0): _unique_index(i + 1, j, grid).ravel(),
        (0, 1): _unique_index(i, j + 1, grid).ravel(),
        (1, 1): _unique_index(i + 1, j + 1, grid).ravel(),
    }
    shape = (grid.n_cells, grid.n_unique_nodes)

    def assemble(signs: dict[tuple[int, int], float], scale: float) -> sp.csr_matrix:
        data = np.concatenate([np.full(grid.n_cells, s * scale) for s in signs.values()])
        cols = np.concatenate([corners[c] for c in signs])
        row_idx = np.tile(rows, len(signs))
        return sp.coo_matrix((data, (row_idx, cols)), shape=shape).tocsr()

    gx = assemble({(1, 0): 1.0, (1, 1): 1.0, (0, 0): -1.0, (0, 1): -1.0}, 0.5 / grid.dx)
    gz = assemble({(0, 1): 1.0, (1, 1): 1.0, (0, 0): -1.0, (1, 0): -1.0}, 0.5 / grid.dz)
    return gx, gz


def null_modes(grid: Grid) -> list[FloatArray]:
    """Orthonormal null modes of the node Laplacian ``G^T C G`` (unique nodes).

    The constant is always present. The checkerboard ``(-1)**(i+j)`` has zero
    gradient as well, and is admissible unless a periodic axis has an odd cell
    count.
    """
    nxn, nzn = grid.unique_node_shape
    modes = [np.ones((nxn, nzn))]
    odd_periodic = (grid.periodic_x and grid.Nx % 2) or (grid.periodic_z and grid.Nz % 2)
    if not odd_periodic:
        i, j = np.meshgrid(np.arange(nxn), np.arange(nzn), indexing="ij")
        modes.append(np.where((i + j) % 2 == 0, 1.0, -1.0))
    return [m / np.linalg.norm(m) for m in modes]


def project_out_null_modes(values: FloatArray, grid: Grid) -> FloatArray:
    """Remove the null-mode components from unique node values."""
    result = np.array(values, dtype=np.float64)
    for mode in null_modes(grid):
        result -= np.sum(result * mode) * mode
    return result


def face_fluxes(
    pu: FloatArray, pw: FloatArray, grid: Grid
) -> tuple[FloatArray, FloatArray]:
    """Average cell momenta onto faces; wall faces carry zero normal flux.

    Returns:
        ``(fx, fz)`` with shapes ``(Nx+1, Nz)`` and ``(Nx, Nz+1)``.
    """
    px = _pad_axis(pu, -2, periodic=grid.periodic_x, wall="edge")
    fx = 0.5 * (px[..., :-1, :] + px[..., 1:, :])
    if not grid.periodic_x:
        fx[..., 0, :] = 0.0
        fx[..., -1, :] = 0.0
    pz = _pad_axis(pw, -1, periodic=grid.periodic_z, wall="edge")
    fz = 0.5 * (pz[..., :, :-1] + pz[..., :, 1:])
    if not grid.periodic_z:
        fz[..., :, 0] = 0.0
        fz[..., :, -1] = 0.0
    return fx, fz


def face_divergence(fx: FloatArray, fz: FloatArray, grid: Grid) -> FloatArray:
    """Finite-volume divergence of face fluxes, per cell."""
    return (  # type: ignore[no-any-return]
        (fx[..., 1:, :] - fx[..., :-1, :]) / grid.dx
        + (fz[..., :, 1:] - fz[..., :, :-1]) / grid.dz
    )


def cell_divergence(u: FloatArray, w: FloatArray, grid: Grid) -> FloatArray:
    """Centred divergence of a cell vector field, per cell.

    Walls mirror the normal component so it vanishes on the boundary.
    """
    px = _pad_axis(u, -2, periodic=grid.periodic_x, wall="edge")
    if not grid.periodic_x:
        px[..., 0, :] = -px[..., 1, :]
        px[..., -1, :] = -px[..., -2, :]
    pz = _pad_axis(w, -1, periodic=grid.periodic_z, wall="edge")
    if not grid.periodic_z:
        pz[..., :, 0] = -pz[..., :, 1]
        pz[..., :, -1] = -pz[..., :, -2]
    return (  # type: ignore[no-any-return]
        (px[..., 2:, :] - px[..., :-2, :]) / (2.0 * grid.dx)
        + (pz[..., :, 2:] - pz[..., :, :-2]) / (2.0 * grid.dz)
    )
