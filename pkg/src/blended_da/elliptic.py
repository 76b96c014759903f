"""Node-centred Helmholtz/Poisson problems for the Exner perturbation.

Each implicit stage solves, on the unique nodes,

    H pi + dt_i**2 * G^T (C G pi) = H pi_ref - alpha + dt_i * G^T (P v)_in

with ``dt_i = dt/2``, ``G`` the node-to-cell gradient, ``C = (c_p/R) P Theta``
per cell and direction, and ``H`` the volume-weighted ``dP/dpi`` (zero in the
pseudo-incompressible regime). ``alpha`` carries the level-``n`` divergence of
the compressible full stage. The corrected momentum is
``(P v)_out = (P v)_in - dt_i C G pi``, so ``H (pi - pi_ref) = -alpha - dt_i D
(P v)_out`` with ``D = -G^T``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import bicgstab

from .errors import RegimeError, SolverError
from .grid import Grid
from .operators import (
    cells_to_nodes,
    full_nodes,
    gradient_matrices,
    node_divergence,
    node_gradient,
    node_volume_fraction,
    project_out_null_modes,
    unique_nodes,
)
from .state import Regime
from .type_utils import FloatArray

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 1000


class Stage(Enum):
    HALF = "half"
    FULL = "full"


@dataclass(frozen=True, eq=False)
class PressureProblem:
    """One assembled elliptic problem together with its correction data.

    Attributes:
        stage: Half or full step.
        regime: Compressible or pseudo-incompressible.
        grid: Solver grid.
        helmholtz_coeff: Full node array of volume-weighted ``dP/dpi``.
        laplace_coeff_x: Cell coefficient of the x-gradient.
        laplace_coeff_z: Cell coefficient of the z-gradient, including the
            implicit buoyancy factor.
        rhs: Full node array of the right-hand side.
        dt_implicit: Implicit step length ``dt/2``.
        momenta_in: Cell ``(P u, P w)`` entering the correction.
        pi_guess: Initial iterate.
        tol: Relative residual tolerance.
        max_iter: Iteration cap.
    """

    stage: Stage
    regime: Regime
    grid: Grid
    helmholtz_coeff: FloatArray
    laplace_coeff_x: FloatArray
    laplace_coeff_z: FloatArray
    rhs: FloatArray
    dt_implicit: float
    momenta_in: tuple[FloatArray, FloatArray]
    pi_guess: FloatArray
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self) -> None:
        if np.any(self.laplace_coeff_x <= 0.0) or np.any(self.laplace_coeff_z <= 0.0):
            raise RegimeError("Laplace coefficients must be positive")
        if self.regime is Regime.COMPRESSIBLE:
            if np.any(self.helmholtz_coeff <= 0.0):
                raise RegimeError("compressible stages need a positive Helmholtz term")
        elif np.any(self.helmholtz_coeff != 0.0):
            raise RegimeError("pseudo-incompressible stages have no Helmholtz term")

    def apply(self, pi: FloatArray) -> FloatArray:
        """Operator applied to a full node field, returned on full nodes."""
        gx, gz = node_gradient(pi, self.grid)
        flux_div = node_divergence(
            self.laplace_coeff_x * gx, self.laplace_coeff_z * gz, self.grid
        )
        return self.helmholtz_coeff * pi - self.dt_implicit**2 * flux_div  # type: ignore[no-any-return]

    def matrix(self) -> sp.csr_matrix:
        """Sparse operator on flattened unique nodes."""
        gx, gz = gradient_matrices(self.grid)
        cx = sp.diags(self.laplace_coeff_x.ravel())
        cz = sp.diags(self.laplace_coeff_z.ravel())
        laplace = gx.T @ cx @ gx + gz.T @ cz @ gz
        diag = sp.diags(unique_nodes(self.helmholtz_coeff, self.grid).ravel())
        return (diag + self.dt_implicit**2 * laplace).tocsr()

    @property
    def rhs_scale(self) -> float:
        return float(np.max(np.abs(self.rhs))) if self.rhs.size else 0.0


@dataclass(frozen=True, eq=False)
class PressureSolution:
    pi: FloatArray
    iterations: int
    residual: float


def assemble(
    grid: Grid,
    stage: Stage,
    regime: Regime,
    dt: float,
    *,
    momenta_in: tuple[FloatArray, FloatArray],
    p_theta: FloatArray,
    pressure_coeff: float,
    buoyancy_factor: FloatArray | None = None,
    helmholtz: FloatArray | None = None,
    pi_ref: FloatArray | None = None,
    momenta_n: tuple[FloatArray, FloatArray] | None = None,
    pi_guess: FloatArray | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> PressureProblem:
    """Assemble the elliptic problem of one implicit stage.

    Args:
        grid: Solver grid.
        stage: Half or full step.
        regime: Dynamical regime of the step.
        dt: Full time step; the implicit stage spans ``dt/2``.
        momenta_in: Cell ``(P u, P w)`` after advection and explicit sources,
            with the buoyancy already folded into ``P w``.
        p_theta: Cell ``P Theta`` entering the Laplace coefficient.
        pressure_coeff: ``c_p / R`` in solver units.
        buoyancy_factor: Cell factor ``1/(1 + dt_i**2 N**2)`` of the vertically
            implicit buoyancy; ones when omitted.
        helmholtz: Cell ``dP/dpi`` (compressible only).
        pi_ref: Full node ``pi`` at level ``n`` (compressible only).
        momenta_n: Cell ``(P u, P w)`` at level ``n`` (compressible full stage).
        pi_guess: Initial iterate; defaults to ``pi_ref`` or zero.
        tol: Relative residual tolerance.
        max_iter: Iteration cap.

    Raises:
        RegimeError: If the inputs do not match the stage and regime.
    """
    if not isinstance(stage, Stage) or not isinstance(regime, Regime):
        raise RegimeError(f"invalid stage/regime combination {stage!r}/{regime!r}")
    compressible = regime is Regime.COMPRESSIBLE
    if compressible and (helmholtz is None or pi_ref is None):
        raise RegimeError("compressible stages need dP/dpi and the level-n pi")
    if compressible and stage is Stage.FULL and momenta_n is None:
        raise RegimeError("the compressible full stage needs the level-n momenta")
    if not compressible and (helmholtz is not None or momenta_n is not None):
        raise RegimeError("pseudo-incompressible stages take no Helmholtz or level-n terms")

    dt_i = 0.5 * dt
    factor = np.ones(grid.cell_shape) if buoyancy_factor is None else buoyancy_factor
    coeff = pressure_coeff * p_theta
    pu, pw = momenta_in
    rhs = -dt_i * node_divergence(pu, pw, grid)

    if compressible:
        assert helmholtz is not None and pi_ref is not None
        h_nodes = cells_to_nodes(helmholtz, grid) * node_volume_fraction(grid)
        rhs = rhs + h_nodes * pi_ref
        if stage is Stage.FULL:
            assert momenta_n is not None
            rhs = rhs - dt_i * node_divergence(momenta_n[0], momenta_n[1], grid)
        guess = pi_ref if pi_guess is None else pi_guess
    else:
        h_nodes = np.zeros(grid.node_shape)
        guess = np.zeros(grid.node_shape) if pi_guess is None else pi_guess

    return PressureProblem(
        stage=stage,
        regime=regime,
        grid=grid,
        helmholtz_coeff=h_nodes,
        laplace_coeff_x=coeff,
        laplace_coeff_z=coeff * factor,
        rhs=rhs,
        dt_implicit=dt_i,
        momenta_in=momenta_in,
        pi_guess=guess,
        tol=tol,
        max_iter=max_iter,
    )


def solve(problem: PressureProblem) -> PressureSolution:
    """Solve with Jacobi-preconditioned BiCGSTAB.

    Pseudo-incompressible solutions are projected off the operator null space,
    which fixes the zero-mean gauge.

    Raises:
        SolverError: If the relative residual stays above ``problem.tol``.
    """
    grid = problem.grid
    A = problem.matrix()
    b = unique_nodes(problem.rhs, grid).ravel()
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return PressureSolution(np.zeros(grid.node_shape), 0, 0.0)

    diagonal = A.diagonal()
    preconditioner = sp.diags(1.0 / diagonal)
    x0 = unique_nodes(problem.pi_guess, grid).ravel()
    iterations = 0

    def count(_: np.ndarray) -> None:
        nonlocal iterations
        iterations += 1

    x, info = bicgstab(
        A,
        b,
        x0=x0,
        rtol=problem.tol,
        atol=0.0,
        maxiter=problem.max_iter,
        M=preconditioner,
        callback=count,
    )
    residual = float(np.linalg.norm(b - A @ x)) / b_norm
    if info != 0 or not np.isfinite(residual) or residual > 10.0 * problem.tol:
        reason = "breakdown" if info < 0 else "iteration cap reached"
        raise SolverError(residual, iterations, reason)

    values = x.reshape(grid.unique_node_shape)
    if problem.regime is Regime.PSINC:
        values = project_out_null_modes(values, grid)
    logger.debug(
        "%s/%s solve: %d iterations, residual %.3e",
        problem.regime.value,
        problem.stage.value,
        iterations,
        residual,
    )
    return PressureSolution(full_nodes(values, grid), iterations, residual)


def correct_momentum(
    momenta_in: tuple[FloatArray, FloatArray],
    pi_out: FloatArray,
    coeff_x: FloatArray,
    coeff_z: FloatArray,
    dt_implicit: float,
    grid: Grid,
) -> tuple[FloatArray, FloatArray]:
    """``(P v)_out = (P v)_in - dt_i C grad(pi_out)`` per cell."""
    gx, gz = node_gradient(pi_out, grid)
    pu, pw = momenta_in
    return pu - dt_implicit * coeff_x * gx, pw - dt_implicit * coeff_z * gz


def correct(problem: PressureProblem, solution: PressureSolution) -> tuple[FloatArray, FloatArray]:
    """Momentum correction with the coefficients stored in ``problem``."""
    return correct_momentum(
        problem.momenta_in,
        solution.pi,
        problem.laplace_coeff_x,
        problem.laplace_coeff_z,
        problem.dt_implicit,
        problem.grid,
    )
