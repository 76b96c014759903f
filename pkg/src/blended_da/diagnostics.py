"""Probe series, error metrics and the imbalance scale estimate."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .constants import NondimParameters, PhysConstants
from .grid import Grid
from .hydrostatics import HydroBackground
from .operators import cell_divergence, nodes_to_cells
from .state import ModelState, Units
from .type_utils import FloatArray


class ProbeVariable(Enum):
    PRESSURE = "p"
    PERTURBATION = "p_prime"


def cell_pressure(
    state: ModelState, background: HydroBackground, nondim: NondimParameters, p_ref: float
) -> FloatArray:
    """Pressure in Pa per cell, reconstructed from the Exner field.

    ``p = p_ref (pi_bar + Ma**2 pi)**(gamma/(gamma-1))`` with the scaled
    perturbation averaged to cells. Unlike ``P``, this also carries the
    pressure of pseudo-incompressible states.
    """
    if state.units is not Units.NONDIMENSIONAL:
        raise ValueError("cell_pressure expects a nondimensional state")
    exner = background.pi_cells + nondim.Ma2 * nodes_to_cells(state.pi)
    return p_ref * exner ** (nondim.gamma / (nondim.gamma - 1.0))  # type: ignore[no-any-return]


def background_pressure(
    background: HydroBackground, nondim: NondimParameters, p_ref: float, grid: Grid
) -> FloatArray:
    column = p_ref * background.pi_cells ** (nondim.gamma / (nondim.gamma - 1.0))
    return np.broadcast_to(column, grid.cell_shape).copy()


@dataclass(eq=False)
class RunRecord:
    """Per-step history of one deterministic run, in SI units.

    Attributes:
        grid: SI grid.
        p_bar: Background pressure per cell.
        times: Time of every stored level, starting with the initial one.
        dts: Length of every step.
        pressure: Cell pressure at every stored level.
        snapshots: States at the output times.
    """

    grid: Grid
    p_bar: FloatArray
    times: list[float] = field(default_factory=list)
    dts: list[float] = field(default_factory=list)
    pressure: list[FloatArray] = field(default_factory=list)
    snapshots: dict[float, ModelState] = field(default_factory=dict)

    def append(self, t: float, p: FloatArray, dt: float | None = None) -> None:
        self.times.append(t)
        self.pressure.append(p)
        if dt is not None:
            self.dts.append(dt)

    @property
    def final(self) -> ModelState:
        return self.snapshots[max(self.snapshots)]


@dataclass(frozen=True, eq=False)
class ProbeSeries:
    """Increments ``psi^{n+1} - psi^n`` of a probed variable.

    The first increment of a run started from rest or from an imbalanced
    state carries the spin-up adjustment; ``spin_up`` flags it.
    """

    name: str
    x: float
    z: float
    variable: ProbeVariable
    times: FloatArray
    increments: FloatArray
    dts: FloatArray
    spin_up: bool = True

    @property
    def values(self) -> FloatArray:
        """Increments without the spin-up one."""
        return self.increments[1:] if self.spin_up else self.increments


def probe_series(
    name: str,
    location: tuple[float, float],
    variable: ProbeVariable,
    times: Sequence[float] | FloatArray,
    levels: Sequence[float] | FloatArray,
    *,
    spin_up: bool = True,
) -> ProbeSeries:
    """Increments of a probed variable from its values at every stored level."""
    t = np.asarray(times, dtype=np.float64)
    values = np.asarray(levels, dtype=np.float64)
    if t.shape != values.shape:
        raise ValueError(f"{t.size} times but {values.size} values")
    return ProbeSeries(
        name=name,
        x=location[0],
        z=location[1],
        variable=variable,
        times=t[1:],
        increments=np.diff(values),
        dts=np.diff(t),
        spin_up=spin_up,
    )


def probe_levels(
    record: RunRecord, location: tuple[float, float], variable: ProbeVariable
) -> FloatArray:
    """Probed variable at every stored level, sampled at the nearest cell.

    Raises:
        ValueError: If the location lies outside the domain.
    """
    i, j = record.grid.nearest_cell(*location)
    levels = np.array([p[i, j] for p in record.pressure])
    if variable is ProbeVariable.PERTURBATION:
        levels = levels - record.p_bar[i, j]
    return levels


def probe_increments(
    record: RunRecord,
    location: tuple[float, float],
    variable: ProbeVariable = ProbeVariable.PRESSURE,
    *,
    name: str = "probe",
    spin_up: bool = True,
) -> ProbeSeries:
    """Increments at the cell nearest to ``location`` (metres).

    Raises:
        ValueError: If the location lies outside the domain.
    """
    levels = probe_levels(record, location, variable)
    return probe_series(name, location, variable, record.times, levels, spin_up=spin_up)


def relative_error(series: FloatArray | ProbeSeries, reference: FloatArray | ProbeSeries) -> float:
    """``||series - reference|| / ||reference||`` over the increment series.

    Probe series enter without their spin-up increment.

    Raises:
        ValueError: On length mismatch or a reference with zero norm.
    """
    a = series.values if isinstance(series, ProbeSeries) else np.asarray(series, dtype=np.float64)
    b = (
        reference.values
        if isinstance(reference, ProbeSeries)
        else np.asarray(reference, dtype=np.float64)
    )
    if a.shape != b.shape:
        raise ValueError(f"series lengths differ: {a.shape} and {b.shape}")
    norm = float(np.linalg.norm(b))
    if norm == 0.0:
        raise ValueError("reference series has zero norm")
    return float(np.linalg.norm(a - b)) / norm


def rmse(members: FloatArray | Sequence[FloatArray], truth: FloatArray) -> float:
    """Root mean square error over members and grid points.

    Example:
        >>> rmse(np.array([[0.0, 0.0], [2.0, 2.0]]), np.array([1.0, 1.0]))
        1.0
    """
    stack = np.asarray(members, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if stack.shape[1:] != truth.shape:
        raise ValueError(f"member shape {stack.shape[1:]} does not match truth {truth.shape}")
    return float(np.sqrt(np.mean((stack - truth) ** 2)))


def acoustic_timescale(dx: float, c_ref: float, region: int) -> float:
    """Crossing time of sound over half a localisation region."""
    return 0.5 * region * dx / c_ref


def imbalance_estimate(
    pre: Sequence[ModelState],
    post: Sequence[ModelState],
    grid: Grid,
    consts: PhysConstants,
    region: int,
) -> float:
    """Scale estimate of the ``P`` imbalance injected by an analysis.

    The velocity increment of each member is turned into a pressure amplitude
    ``p_hat = (2 t_ac / pi) div(dv) rho c_ref**2`` that builds up over the
    acoustic time ``t_ac`` of the localisation region. Its ``P`` counterpart
    follows from the linearised state equation, ``dP = P p_hat / (gamma p)``.
    Returns the ensemble mean of the spatial RMS.

    Args:
        pre: SI forecast members.
        post: SI analysis members.
        grid: SI grid.
        consts: Physical constants.
        region: Localisation region width in grid points.
    """
    if len(pre) != len(post):
        raise ValueError("pre and post ensembles differ in size")
    t_ac = acoustic_timescale(grid.dx, consts.c_ref, region)
    norms = []
    for before, after in zip(pre, post):
        if before.units is not Units.SI or after.units is not Units.SI:
            raise ValueError("imbalance_estimate expects SI states")
        du = after.u - before.u
        dw = after.w - before.w
        p_hat = 2.0 * t_ac / math.pi * cell_divergence(du, dw, grid) * after.rho * consts.c_ref**2
        p = consts.p_ref * (after.P * consts.R / consts.p_ref) ** consts.gamma
        dP = after.P * p_hat / (consts.gamma * p)
        norms.append(float(np.sqrt(np.mean(dP**2))))
    return float(np.mean(norms)) if norms else 0.0
