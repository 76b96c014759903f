"""Ensembles, synthetic observations and the experiment runner.

Random numbers come from three substreams of the scenario seed: initial
perturbations, observation masks and observation noise. Ensemble members run
in a thread pool between assimilation times; the analysis is the
synchronisation point.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from reactor_di import law_of_demeter

from .blending import Blender, to_psinc
from .config import (
    Case,
    InitialCondition,
    Mode,
    Model,
    RunConfig,
    ScenarioSpec,
    SingleRunConfig,
    TimeConfig,
)
from .constants import NondimParameters, PhysConstants
from .diagnostics import (
    RunRecord,
    background_pressure,
    cell_pressure,
    imbalance_estimate,
    rmse,
)
from .errors import ConfigError, EnsembleError
from .grid import Grid
from .hydrostatics import HydroBackground
from .initial_conditions import init_bubble, init_vortex, init_vortex_imbalanced
from .letkf import Assimilator, ObservationBatch
from .state import STATE_VARIABLES, ModelState, Regime, dimensionalise, nondimensionalise
from .stepper import Stepper, StepStats
from .type_utils import FloatArray

logger = logging.getLogger(__name__)

Progress = Callable[[float], None]

NOISE_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class Ensemble:
    members: tuple[ModelState, ...]
    mode: Mode | None = None

    def __post_init__(self) -> None:
        if len(self.members) < 2:
            raise EnsembleError(f"ensembles need at least 2 members, got {len(self.members)}")

    def __len__(self) -> int:
        return len(self.members)

    @property
    def K(self) -> int:
        return len(self.members)

    def stack(self, name: str) -> FloatArray:
        """``(K, Nx, Nz)`` cell values of one variable."""
        return np.stack([member.field(name) for member in self.members])


@dataclass(frozen=True, eq=False)
class EnsembleSetup:
    """Initial states of one scenario in solver units.

    Attributes:
        ensemble: The forecast members.
        truth: Reference run the errors are measured against.
        obs: Run the observations are drawn from; the truth itself for the
            bubble.
        parameters: Drawn vortex centres ``(K, 2)`` in m or bubble
            amplitudes ``(K,)`` in K.
        reference_parameter: The extra draw shared by truth and obs.
    """

    ensemble: Ensemble
    truth: ModelState
    obs: ModelState
    parameters: FloatArray
    reference_parameter: FloatArray

    @property
    def obs_is_truth(self) -> bool:
        return self.obs is self.truth


def spawn_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Independent generators for initial perturbations, masks and noise."""
    init, mask, noise = np.random.SeedSequence(seed).spawn(3)
    return np.random.default_rng(init), np.random.default_rng(mask), np.random.default_rng(noise)


def initial_state(
    case: Case,
    grid: Grid,
    consts: PhysConstants,
    parameter: FloatArray | float,
    initial: InitialCondition = InitialCondition.BALANCED,
) -> ModelState:
    """SI initial state for a vortex centre or a bubble amplitude."""
    if case is Case.VORTEX:
        x, z = np.asarray(parameter, dtype=np.float64)
        builder = init_vortex_imbalanced if initial is InitialCondition.IMBALANCED else init_vortex
        return builder(grid, consts, (float(x), float(z)))
    return init_bubble(grid, consts, float(np.asarray(parameter)))


def make_ensemble(
    spec: ScenarioSpec, grid: Grid, consts: PhysConstants, rng: np.random.Generator
) -> EnsembleSetup:
    """Draw the members and the reference run of a scenario.

    Vortex centres are uniform in ``center_range`` per coordinate, bubble
    amplitudes uniform in ``amplitude_range``; both intervals are half open.
    One extra draw defines the truth and obs runs.

    Args:
        spec: Scenario; ``spec.case`` must be set.
        grid: SI grid.
        consts: Physical constants.
        rng: Generator of the initial-perturbation stream.

    Raises:
        EnsembleError: If ``spec.K`` is below 2.
    """
    if spec.K < 2:
        raise EnsembleError(f"ensembles need at least 2 members, got {spec.K}")
    if spec.case is None:
        raise ConfigError("scenario.case", "must be set")
    case = spec.case
    if case is Case.VORTEX:
        lo, hi = spec.center_range
        draws = rng.uniform(lo, hi, size=(spec.K + 1, 2))
    else:
        lo, hi = spec.amplitude_range
        draws = rng.uniform(lo, hi, size=spec.K + 1)
    def build(parameter: FloatArray) -> ModelState:
        state: ModelState = nondimensionalise(initial_state(case, grid, consts, parameter), consts)
        return state

    members = tuple(build(draw) for draw in draws[:-1])
    truth = build(draws[-1])
    obs = truth if case is Case.BUBBLE else build(draws[-1])
    return EnsembleSetup(
        ensemble=Ensemble(members, spec.mode),
        truth=truth,
        obs=obs,
        parameters=draws[:-1],
        reference_parameter=draws[-1],
    )


def observation_mask(n_points: int, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Boolean mask with ``ceil(n_points * fraction)`` entries set, in random order."""
    mask = np.zeros(n_points, dtype=bool)
    mask[: math.ceil(n_points * fraction)] = True
    rng.shuffle(mask)
    return mask


def gen_observations(
    obs_state: ModelState,
    spec: ScenarioSpec,
    time: float,
    mask_rng: np.random.Generator,
    noise_rng: np.random.Generator,
) -> ObservationBatch:
    """Sparse noisy observations of ``obs_state``.

    The noise standard deviation of each variable is ``noise_frac`` times the
    peak-to-peak amplitude of that variable at this time.
    """
    variables = spec.letkf.observed_vars
    mask = observation_mask(obs_state.rho.size, spec.obs_fraction, mask_rng)
    indices = np.flatnonzero(mask)
    values = np.empty((len(variables), indices.size))
    noise_std = np.empty_like(values)
    for row, name in enumerate(variables):
        truth = obs_state.field(name).ravel()
        amplitude = float(np.ptp(truth))
        sigma = spec.noise_frac * amplitude
        values[row] = truth[indices] + sigma * noise_rng.standard_normal(indices.size)
        noise_std[row] = max(sigma, NOISE_FLOOR * max(amplitude, 1.0))
    return ObservationBatch(
        variables=tuple(variables),
        indices=indices,
        values=values,
        noise_std=noise_std,
        time=time,
    )


def _output_times(t_final: float, interval: float | None, extra: Sequence[float] = ()) -> list[float]:
    times = {round(t, 9) for t in extra if 0.0 < t <= t_final}
    if interval is not None:
        times.update(round(k * interval, 9) for k in range(1, int(t_final / interval + 1e-9) + 1))
    times.add(round(t_final, 9))
    return sorted(times)


@dataclass(eq=False)
class ScenarioResult:
    """Error history of one ensemble scenario, in SI units.

    ``rmse`` holds forecast errors at ``times``; ``rmse_analysis`` holds the
    errors right after each analysis at ``analysis_times``.
    """

    spec: ScenarioSpec
    times: list[float] = field(default_factory=list)
    rmse: dict[str, list[float]] = field(default_factory=lambda: {v: [] for v in STATE_VARIABLES})
    analysis_times: list[float] = field(default_factory=list)
    rmse_analysis: dict[str, list[float]] = field(
        default_factory=lambda: {v: [] for v in STATE_VARIABLES}
    )
    imbalance: list[tuple[float, float]] = field(default_factory=list)
    members: list[ModelState] = field(default_factory=list)
    truth: ModelState | None = None

    def record(self, t: float, members: Sequence[ModelState], truth: ModelState, *, analysis: bool = False) -> None:
        target = self.rmse_analysis if analysis else self.rmse
        (self.analysis_times if analysis else self.times).append(t)
        for name in STATE_VARIABLES:
            target[name].append(rmse([m.field(name) for m in members], truth.field(name)))

    def series(self, name: str) -> list[tuple[float, float, int]]:
        """``(time, rmse, is_analysis)`` rows merged in time order."""
        rows = [(t, e, 0) for t, e in zip(self.times, self.rmse[name])]
        rows += [(t, e, 1) for t, e in zip(self.analysis_times, self.rmse_analysis[name])]
        return sorted(rows, key=lambda row: (row[0], row[2]))

    def ensemble_mean(self) -> ModelState:
        if not self.members:
            raise EnsembleError("no members recorded")
        template = self.members[0]
        names = ("rho", "rho_u", "rho_w", "P", "chi_p", "pi")
        return template.replace(
            **{name: np.mean([getattr(m, name) for m in self.members], axis=0) for name in names}
        )


@law_of_demeter("_config")
class ExperimentRunner:
    """Runs single deterministic simulations and ensemble scenarios."""

    _config: RunConfig
    _constants: PhysConstants
    _domain: Grid
    _time: TimeConfig
    _run: SingleRunConfig
    _scenario: ScenarioSpec
    _workers: int
    _background: HydroBackground
    _nondim: NondimParameters
    _stepper: Stepper
    _blender: Blender
    _assimilator: Assimilator

    def pressure(self, state: ModelState) -> FloatArray:
        return cell_pressure(state, self._background, self._nondim, self._constants.p_ref)

    def run_single(self, progress: Progress | None = None) -> RunRecord:
        """Integrate the configured single run and record the cell pressure of every step."""
        consts = self._constants
        run = self._run
        t_ref = consts.t_ref
        parameter = np.asarray(run.center if self._config.case is Case.VORTEX else run.amplitude)
        state: ModelState = nondimensionalise(
            initial_state(self._config.case, self._domain, consts, parameter, run.initial), consts
        )
        record = RunRecord(
            self._domain, background_pressure(self._background, self._nondim, consts.p_ref, self._domain)
        )
        record.append(0.0, self.pressure(state))
        record.snapshots[0.0] = dimensionalise(state, consts)

        def observe(new: ModelState, stats: StepStats) -> None:
            record.append(new.t * t_ref, self.pressure(new), stats.dt * t_ref)
            if progress is not None:
                progress(new.t * t_ref)

        plan = self._time.plan(consts)
        logger.info(
            "run case=%s model=%s initial=%s t_final=%.6g",
            self._config.case.value,
            run.model.value,
            run.initial.value,
            self._time.t_final,
        )
        if run.model is Model.PSINC:
            state = to_psinc(state, self._nondim)
            plan = plan.with_regime(Regime.PSINC)
        first = True
        for t_out in _output_times(self._time.t_final, self._time.output_interval):
            if run.model is Model.BLENDED:
                state = self._blender.run_window(state, t_out / t_ref, plan, enabled=first, observer=observe)
            else:
                state = self._stepper.march(state, t_out / t_ref, plan, observe)
            first = False
            record.snapshots[t_out] = dimensionalise(state, consts)
        logger.info("run finished after %d steps", state.step)
        return record

    def run_scenario(self, progress: Progress | None = None) -> ScenarioResult:
        """Run the configured ensemble scenario.

        Forecast windows end at observation times, output times and the final
        time in every mode, so EnNoDA errors share the time axis of EnDA and
        EnDAB. In modes EnDA and EnDAB every assimilation time draws
        observations from the obs run and analyses the members; EnDAB starts
        the following window with a blended step.
        """
        spec = self._scenario
        consts = self._constants
        blend = spec.blend
        t_ref = consts.t_ref
        init_rng, mask_rng, noise_rng = spawn_streams(spec.seed)
        setup = make_ensemble(spec, self._domain, consts, init_rng)
        members = list(setup.ensemble.members)
        truth, obs = setup.truth, setup.obs
        plan = self._time.plan(consts)
        events = spec.assimilation_times()
        windows = _output_times(spec.t_final, spec.output_interval, spec.observation_times())
        event_keys = {round(t, 9) for t in events}
        result = ScenarioResult(spec)
        logger.info(
            "scenario case=%s mode=%s K=%d seed=%d events=%d",
            spec.case.value if spec.case else None,
            spec.mode.value,
            spec.K,
            spec.seed,
            len(events),
        )
        result.record(0.0, self._si(members), dimensionalise(truth, consts))

        members_blend = blend.apply_at_init
        reference_blend = True
        with ThreadPoolExecutor(max_workers=self._workers) as pool:
            for t_end in windows:
                jobs = [(m, members_blend) for m in members] + [(truth, reference_blend)]
                if not setup.obs_is_truth:
                    jobs.append((obs, False))
                advanced = list(
                    pool.map(
                        lambda job: self._blender.run_window(job[0], t_end / t_ref, plan, enabled=job[1]),
                        jobs,
                    )
                )
                members = advanced[: len(members)]
                truth = advanced[len(members)]
                obs = truth if setup.obs_is_truth else advanced[-1]
                members_blend = False
                reference_blend = False

                truth_si = dimensionalise(truth, consts)
                forecast_si = self._si(members)
                result.record(t_end, forecast_si, truth_si)
                if round(t_end, 9) in event_keys:
                    batch = gen_observations(obs, spec, t_end, mask_rng, noise_rng)
                    members = self._assimilator.analyse(members, batch)
                    analysis_si = self._si(members)
                    result.record(t_end, analysis_si, truth_si, analysis=True)
                    estimate = imbalance_estimate(
                        forecast_si, analysis_si, self._domain, consts, spec.letkf.region
                    )
                    result.imbalance.append((t_end, estimate))
                    logger.info("analysis t=%.6g imbalance=%.6g", t_end, estimate)
                    members_blend = bool(blend.apply_after_da)
                if progress is not None:
                    progress(t_end)

        result.members = self._si(members)
        result.truth = dimensionalise(truth, consts)
        logger.info("scenario finished at t=%.6g", spec.t_final)
        return result

    def _si(self, states: Sequence[ModelState]) -> list[ModelState]:
        return [dimensionalise(state, self._constants) for state in states]
