"""Local ensemble transform Kalman filter.

Every analysis location (each cell centre and each unique node) gathers the
observations inside a square patch around it, tapers their influence with the
configured localisation function and computes a ``K x K`` transform in
ensemble space:

    A      = (K-1)/b I + sum_o w_o / r_o  Yf_o Yf_o^T
    W^a    = [(K-1) A^{-1}]^{1/2}         (symmetric square root)
    w_mean = A^{-1} sum_o w_o / r_o  Yf_o d_o
    x^a_k  = x_mean + X^f (W^a[:, k] + w_mean)

``Yf_o`` holds the member anomalies of observation ``o``, ``d_o`` its
innovation and ``r_o`` its error variance. Cell-centred variables use the
cell transforms, ``pi`` uses the node transforms.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from reactor_di import law_of_demeter

from .config import LetkfConfig, LocFn, ScenarioSpec
from .errors import EnsembleError, ObservationError
from .grid import Grid
from .operators import full_nodes, unique_nodes
from .state import CELL_FIELDS, STATE_VARIABLES, ModelState
from .type_utils import FloatArray, IntArray

logger = logging.getLogger(__name__)

EIGEN_SLACK = 1e-8
"""Relative shortfall below ``(K-1)/b`` at which a clipped spectrum is reported."""


@dataclass(frozen=True, eq=False)
class ObservationBatch:
    """Observed values at a sparse set of cells.

    Attributes:
        variables: Observed state variables, in the order of ``values`` rows.
        indices: Flattened ``i * Nz + j`` cell indices.
        values: Observations, shape ``(len(variables), len(indices))``.
        noise_std: Observation error standard deviations, same shape.
        time: Observation time in seconds.
    """

    variables: tuple[str, ...]
    indices: IntArray
    values: FloatArray
    noise_std: FloatArray
    time: float

    def __post_init__(self) -> None:
        unknown = set(self.variables) - set(STATE_VARIABLES)
        if unknown:
            raise ValueError(f"unknown observed variables {sorted(unknown)}")
        expected = (len(self.variables), len(self.indices))
        if self.values.shape != expected or self.noise_std.shape != expected:
            raise ValueError(
                f"values {self.values.shape} and noise_std {self.noise_std.shape} "
                f"must have shape {expected}"
            )
        if len(np.unique(self.indices)) != len(self.indices):
            raise ValueError("observation indices must be unique")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("observation values must be finite")
        if np.any(self.noise_std <= 0.0):
            raise ValueError("noise_std must be positive")

    def __len__(self) -> int:
        return self.values.size

    @property
    def y(self) -> FloatArray:
        """Observation vector, variable-major."""
        return self.values.ravel()

    @property
    def variance(self) -> FloatArray:
        return (self.noise_std**2).ravel()


def forward_operator(state: ModelState, batch: ObservationBatch) -> FloatArray:
    """Project ``state`` onto the observation space of ``batch``.

    ``pi`` is observed through its four-node cell average.

    Raises:
        ObservationError: If an index lies outside the grid.
    """
    n_cells = state.rho.size
    indices = np.asarray(batch.indices)
    if indices.size and (indices.min() < 0 or indices.max() >= n_cells):
        raise ObservationError(
            f"observation index outside [0, {n_cells}): {indices.min()}..{indices.max()}"
        )
    if not batch.variables:
        return np.zeros(0)
    return np.concatenate([state.field(name).ravel()[indices] for name in batch.variables])


def localisation_weight(
    distance: FloatArray | float, region: int, loc_fn: LocFn
) -> FloatArray:
    """Taper of an observation at ``distance`` grid points.

    The truncated Gaussian has ``sigma = half/2`` and vanishes beyond
    ``half = region // 2``; Gaspari-Cohn has half-width ``half/2`` and so the
    same support.
    """
    d = np.asarray(distance, dtype=np.float64)
    half = region // 2
    if loc_fn is LocFn.NONE:
        return np.ones_like(d)
    if half == 0:
        return np.where(d == 0.0, 1.0, 0.0)
    if loc_fn is LocFn.TRUNCATED_GAUSSIAN:
        sigma = 0.5 * half
        return np.where(d <= half, np.exp(-(d**2) / (2.0 * sigma**2)), 0.0)
    r = d / (0.5 * half)
    inner = 1.0 - 5.0 / 3.0 * r**2 + 5.0 / 8.0 * r**3 + 0.5 * r**4 - 0.25 * r**5
    with np.errstate(divide="ignore"):
        outer = (
            4.0
            - 5.0 * r
            + 5.0 / 3.0 * r**2
            + 5.0 / 8.0 * r**3
            - 0.5 * r**4
            + 1.0 / 12.0 * r**5
            - 2.0 / (3.0 * np.where(r > 0.0, r, 1.0))
        )
    return np.clip(np.where(r <= 1.0, inner, np.where(r < 2.0, outer, 0.0)), 0.0, 1.0)  # type: ignore[no-any-return]


def ensemble_transform(
    hx: FloatArray,
    y: FloatArray,
    variance: FloatArray,
    weights: FloatArray,
    b: float = 1.0,
) -> FloatArray:
    """Transform matrices ``W^a + w_mean`` for a block of locations.

    Args:
        hx: Forecast observations per member, shape ``(K, n_obs)``.
        y: Observations, shape ``(n_obs,)``.
        variance: Observation error variances, shape ``(n_obs,)``.
        weights: Localisation weights, shape ``(L, n_obs)``.
        b: Multiplicative inflation.

    Returns:
        Array ``T`` of shape ``(L, K, K)``; member ``k`` of the analysis is
        ``x_mean + X^f @ T[l, :, k]``.

    Raises:
        EnsembleError: For fewer than two members.
    """
    K = hx.shape[0]
    if K < 2:
        raise EnsembleError(f"the transform needs at least 2 members, got {K}")
    anomalies = hx - hx.mean(axis=0)
    innovation = y - hx.mean(axis=0)
    scaled = weights / variance
    A = np.einsum("ko,lo,jo->lkj", anomalies, scaled, anomalies)
    lower = (K - 1) / b
    A += lower * np.eye(K)
    eigenvalues, vectors = np.linalg.eigh(A)

    # A >= (K-1)/b I; smaller eigenvalues are roundoff of an ill-conditioned A
    short = np.any(eigenvalues < lower * (1.0 - EIGEN_SLACK), axis=1)
    if np.any(short):
        logger.warning(
            "regularising %d ill-conditioned local gain solves", int(np.sum(short))
        )
    eigenvalues = np.maximum(eigenvalues, lower)

    gain = np.einsum("lkm,lm,ljm->lkj", vectors, 1.0 / eigenvalues, vectors)
    root = np.einsum(
        "lkm,lm,ljm->lkj", vectors, np.sqrt((K - 1) / eigenvalues), vectors
    )
    mean_weight = np.einsum(
        "lkj,lj->lk", gain, np.einsum("jo,lo->lj", anomalies, scaled * innovation)
    )
    return root + mean_weight[:, :, None]  # type: ignore[no-any-return]


def apply_transform(members: FloatArray, transform: FloatArray) -> FloatArray:
    """Analysis members from forecast members.

    Args:
        members: Shape ``(K, n, L)``: ``n`` quantities at ``L`` locations.
        transform: Shape ``(L, K, K)`` from :func:`ensemble_transform`.
    """
    mean = members.mean(axis=0)
    anomalies = members - mean
    return mean + np.einsum("jnl,ljk->knl", anomalies, transform)  # type: ignore[no-any-return]


def _wrapped(delta: FloatArray, n: int, periodic: bool) -> FloatArray:
    if not periodic:
        return delta
    return (delta + 0.5 * n) % n - 0.5 * n  # type: ignore[no-any-return]


def _location_weights(
    x: FloatArray,
    z: FloatArray,
    obs_i: FloatArray,
    obs_j: FloatArray,
    cfg: LetkfConfig,
    grid: Grid,
) -> FloatArray:
    """Weights ``(L, n_points)`` of observation points for analysis locations."""
    di = _wrapped(obs_i[None, :] - x[:, None], grid.Nx, grid.periodic_x)
    dj = _wrapped(obs_j[None, :] - z[:, None], grid.Nz, grid.periodic_z)
    half = cfg.half_width
    inside = (np.abs(di) <= half) & (np.abs(dj) <= half)
    return np.where(  # type: ignore[no-any-return]
        inside, localisation_weight(np.hypot(di, dj), cfg.region, cfg.loc_fn), 0.0
    )


def _check_ensemble(forecasts: Sequence[ModelState], batch: ObservationBatch) -> None:
    if len(forecasts) < 2:
        raise EnsembleError(f"analysis needs at least 2 members, got {len(forecasts)}")
    if len(batch) == 0:
        raise EnsembleError("analysis needs a non-empty observation batch")


def analyse(
    forecasts: Sequence[ModelState],
    batch: ObservationBatch,
    cfg: LetkfConfig,
    grid: Grid,
) -> list[ModelState]:
    """Localised analysis of a forecast ensemble.

    Raises:
        EnsembleError: For fewer than two members or an empty batch.
        ObservationError: If an observation index lies outside the grid.
    """
    _check_ensemble(forecasts, batch)
    hx = np.stack([forward_operator(member, batch) for member in forecasts])
    y, variance = batch.y, batch.variance
    n_vars = len(batch.variables)
    obs_i, obs_j = np.divmod(np.asarray(batch.indices), grid.Nz)
    obs_i = obs_i.astype(np.float64)
    obs_j = obs_j.astype(np.float64)

    cells = np.stack([np.stack([getattr(m, f) for f in CELL_FIELDS]) for m in forecasts])
    cells = cells.reshape(len(forecasts), len(CELL_FIELDS), -1)
    nodes = np.stack([unique_nodes(m.pi, grid) for m in forecasts])
    node_shape = nodes.shape[1:]
    nodes = nodes.reshape(len(forecasts), 1, -1)

    ci, cj = np.meshgrid(np.arange(grid.Nx), np.arange(grid.Nz), indexing="ij")
    ni, nj = np.meshgrid(
        np.arange(node_shape[0]) - 0.5, np.arange(node_shape[1]) - 0.5, indexing="ij"
    )

    def analyse_block(values: FloatArray, x: FloatArray, z: FloatArray) -> FloatArray:
        result = np.empty_like(values)
        for start in range(0, x.size, cfg.chunk):
            block = slice(start, start + cfg.chunk)
            weights = _location_weights(x[block], z[block], obs_i, obs_j, cfg, grid)
            transform = ensemble_transform(
                hx, y, variance, np.tile(weights, (1, n_vars)), cfg.b
            )
            result[..., block] = apply_transform(values[..., block], transform)
        return result

    cells_a = analyse_block(cells, ci.ravel().astype(np.float64), cj.ravel().astype(np.float64))
    nodes_a = analyse_block(nodes, ni.ravel(), nj.ravel())

    analysis = []
    for k, member in enumerate(forecasts):
        fields = cells_a[k].reshape(len(CELL_FIELDS), *grid.cell_shape)
        pi = full_nodes(nodes_a[k, 0].reshape(node_shape), grid)
        analysis.append(
            member.replace(**dict(zip(CELL_FIELDS, fields)), pi=pi).check()
        )
    return analysis


def global_analysis(
    forecasts: Sequence[ModelState],
    batch: ObservationBatch,
    b: float,
    grid: Grid,
) -> list[ModelState]:
    """Unlocalised analysis of the complete state vector with one transform."""
    _check_ensemble(forecasts, batch)
    hx = np.stack([forward_operator(member, batch) for member in forecasts])
    transform = ensemble_transform(hx, batch.y, batch.variance, np.ones((1, len(batch))), b)
    vectors = np.stack([state_vector(member, grid) for member in forecasts])
    analysed = apply_transform(vectors[:, :, None], transform)[:, :, 0]
    return [
        from_state_vector(vector, member, grid).check()
        for vector, member in zip(analysed, forecasts)
    ]


def state_vector(state: ModelState, grid: Grid) -> FloatArray:
    """Cell fields followed by ``pi`` on the unique nodes."""
    return np.concatenate(
        [getattr(state, f).ravel() for f in CELL_FIELDS]
        + [unique_nodes(state.pi, grid).ravel()]
    )


def from_state_vector(vector: FloatArray, template: ModelState, grid: Grid) -> ModelState:
    """Inverse of :func:`state_vector`; clock and regime come from ``template``."""
    n = grid.n_cells
    fields = {
        f: vector[i * n : (i + 1) * n].reshape(grid.cell_shape)
        for i, f in enumerate(CELL_FIELDS)
    }
    nodes = vector[len(CELL_FIELDS) * n :].reshape(grid.unique_node_shape)
    return template.replace(pi=full_nodes(nodes, grid), **fields)


@law_of_demeter("_scenario")
class Assimilator:
    """Applies the configured LETKF to forecast ensembles."""

    _scenario: ScenarioSpec
    _letkf: LetkfConfig
    _grid: Grid

    def analyse(
        self, forecasts: Sequence[ModelState], batch: ObservationBatch
    ) -> list[ModelState]:
        logger.info(
            "assimilation t=%.6g observations=%d variables=%s region=%d",
            batch.time,
            len(batch),
            ",".join(batch.variables),
            self._letkf.region,
        )
        return analyse(forecasts, batch, self._letkf, self._grid)
