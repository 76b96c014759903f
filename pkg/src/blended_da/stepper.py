"""Semi-implicit one-step integrator with the compressible/psinc switch.

One step of length ``dt`` from level ``n``:

1. upwind advection of ``P Psi`` over ``dt/2`` with the level-``n`` fluxes,
2. implicit half stage yielding ``pi`` at ``n+1/2`` and the fluxes
   ``(P v)^{n+1/2}``,
3. explicit source half step on level ``n`` (compressible: the pressure
   gradient of ``pi^n``, so ``pi`` restarts from level ``n``; psinc: the
   pressure gradient of the half-stage ``pi``),
4. Strang-split advection over ``dt`` with the half-level fluxes,
5. implicit full stage yielding ``pi`` and the momenta at ``n+1``.

Buoyancy enters both implicit stages through the vertically implicit coupling
of ``w`` and ``chi'``; the background stratification folds into the vertical
Laplace coefficient.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from reactor_di import law_of_demeter

from .advection import (
    AdvectionReport,
    AdvectiveFlux,
    FluxTime,
    Transported,
    advect_full,
    advect_half,
)
from .config import NumericsConfig, RunConfig
from .constants import NondimParameters
from .elliptic import PressureSolution, Stage, assemble, correct, solve
from .errors import RegimeError
from .grid import Grid
from .hydrostatics import HydroBackground
from .operators import node_divergence, node_gradient, unique_nodes
from .state import ModelState, Regime, Units
from .thermodynamics import nondim_dP_dpi
from .timestep import StepPlan
from .timestep import compute_dt as plan_dt
from .type_utils import FloatArray

logger = logging.getLogger(__name__)

TIME_EPS = 1e-12

StepObserver = Callable[[ModelState, "StepStats"], None]


@dataclass(frozen=True)
class StepStats:
    """Diagnostics of one step.

    Attributes:
        dt: Step length in solver units.
        cfl: Largest advective Courant number of both advection calls.
        iterations_half: Krylov iterations of the half stage.
        iterations_full: Krylov iterations of the full stage.
        divergence: ``max |D (P v)_out|`` of the full stage relative to
            ``||D (P v)_in||``; bounded by the solver tolerance in psinc steps.
    """

    dt: float
    cfl: float
    iterations_half: int
    iterations_full: int
    divergence: float


@dataclass(frozen=True, eq=False)
class StepResult:
    state: ModelState
    stats: StepStats


@dataclass(frozen=True, eq=False)
class _Stage:
    """Outcome of one implicit stage."""

    solution: PressureSolution
    momenta: tuple[FloatArray, FloatArray]
    chi_p: FloatArray
    p_theta: FloatArray
    helmholtz: FloatArray | None
    divergence: float


@law_of_demeter("_config")
class Stepper:
    """Advances single model states.

    Instances hold no per-state data, so one stepper serves all ensemble
    members concurrently.
    """

    _config: RunConfig
    _numerics: NumericsConfig
    _grid: Grid
    _background: HydroBackground
    _nondim: NondimParameters

    def compute_dt(self, state: ModelState, plan: StepPlan) -> float:
        return plan_dt(state, plan, self._grid)

    def step(self, state: ModelState, plan: StepPlan, dt: float | None = None) -> StepResult:
        """Advance ``state`` by one step.

        Args:
            state: Nondimensional state in the regime of ``plan``.
            plan: Step plan.
            dt: Step length; taken from :meth:`compute_dt` when omitted.

        Raises:
            RegimeError: If the state regime differs from the plan.
            CflViolationError: If an advection Courant number exceeds one.
            SolverError: If an elliptic solve fails.
            ThermodynamicsError: If the new state has non-positive ``rho`` or ``P``.
        """
        self._require(state, plan)
        if dt is None:
            dt = self.compute_dt(state, plan)
        regime = plan.regime
        grid = self._grid
        current = Transported.from_state(state)
        pu_n, pw_n = state.P * state.u, state.P * state.w

        half, half_report = self._half_stage(state, current, (pu_n, pw_n), regime, dt)
        flux_half = AdvectiveFlux.from_cells(*half.momenta, grid, FluxTime.HALF)

        pi_source = state.pi if regime is Regime.COMPRESSIBLE else half.solution.pi
        sourced = self._explicit_source(state, pi_source, 0.5 * dt)
        advected, full_report = advect_full(
            sourced, flux_half, dt, grid, self._numerics.limiter
        )
        full = self._implicit_stage(
            Stage.FULL,
            regime,
            advected,
            dt,
            pi_ref=state.pi,
            P_stage=advected.P if regime is Regime.COMPRESSIBLE else state.P,
            p_theta=half.p_theta if regime is Regime.COMPRESSIBLE else None,
            helmholtz=half.helmholtz,
            momenta_n=(pu_n, pw_n) if regime is Regime.COMPRESSIBLE else None,
        )

        # rho keeps its flux form in both regimes; psinc holds P at level n
        rho_new = advected.PPsi[0]
        P_new = advected.P if regime is Regime.COMPRESSIBLE else state.P
        pu_out, pw_out = full.momenta
        new_state = ModelState(
            rho=rho_new,
            rho_u=rho_new * pu_out / P_new,
            rho_w=rho_new * pw_out / P_new,
            P=P_new,
            chi_p=full.chi_p,
            pi=full.solution.pi,
            t=state.t + dt,
            regime=regime,
            step=state.step + 1,
            units=Units.NONDIMENSIONAL,
        ).check()

        stats = StepStats(
            dt=dt,
            cfl=max(half_report.cfl, full_report.cfl),
            iterations_half=half.solution.iterations,
            iterations_full=full.solution.iterations,
            divergence=full.divergence,
        )
        logger.debug(
            "step %d t=%.6g dt=%.6g cfl=%.3f iterations=%d/%d divergence=%.3e",
            new_state.step,
            new_state.t,
            dt,
            stats.cfl,
            stats.iterations_half,
            stats.iterations_full,
            stats.divergence,
        )
        return StepResult(new_state, stats)

    def march(
        self,
        state: ModelState,
        t_end: float,
        plan: StepPlan,
        observer: StepObserver | None = None,
    ) -> ModelState:
        """Step until ``t_end``, shortening the last step to land on it.

        ``observer`` is called after every step with the new state and its
        statistics.
        """
        while state.t < t_end - TIME_EPS:
            dt = min(self.compute_dt(state, plan), t_end - state.t)
            result = self.step(state, plan, dt)
            state = result.state
            if observer is not None:
                observer(state, result.stats)
        return state

    def harvest_half_pi(
        self, state: ModelState, plan: StepPlan, dt: float | None = None
    ) -> FloatArray:
        """``pi`` of one extra psinc half stage started from ``state``.

        The advected fields are discarded and the clock does not move.
        """
        plan = plan.with_regime(Regime.PSINC)
        self._require(state, plan)
        if dt is None:
            dt = self.compute_dt(state, plan)
        momenta_n = (state.P * state.u, state.P * state.w)
        half, _ = self._half_stage(
            state, Transported.from_state(state), momenta_n, Regime.PSINC, dt
        )
        return half.solution.pi

    def _require(self, state: ModelState, plan: StepPlan) -> None:
        if state.units is not Units.NONDIMENSIONAL:
            raise RegimeError("the stepper works on nondimensional states")
        if state.regime is not plan.regime:
            raise RegimeError(
                f"state is {state.regime.value} but the plan steps {plan.regime.value}"
            )

    def _half_stage(
        self,
        state: ModelState,
        current: Transported,
        momenta_n: tuple[FloatArray, FloatArray],
        regime: Regime,
        dt: float,
    ) -> tuple[_Stage, AdvectionReport]:
        flux_n = AdvectiveFlux.from_cells(*momenta_n, self._grid, FluxTime.N)
        advected, report = advect_half(current, flux_n, 0.5 * dt, self._grid)
        compressible = regime is Regime.COMPRESSIBLE
        stage = self._implicit_stage(
            Stage.HALF,
            regime,
            advected,
            dt,
            pi_ref=state.pi,
            P_stage=advected.P if compressible else state.P,
        )
        return stage, report

    def _explicit_source(
        self, state: ModelState, pi_source: FloatArray, dt_e: float
    ) -> Transported:
        """Forward-Euler pressure, buoyancy and stratification sources on level ``n``."""
        kappa = self._nondim.pressure_coeff
        gx, gz = node_gradient(pi_source, self._grid)
        P = state.P
        rho_u = state.rho_u - dt_e * kappa * P * gx
        rho_w = state.rho_w - dt_e * (
            kappa * P * gz + self._nondim.gravity * P * state.chi_p
        )
        P_chi_p = P * state.chi_p - dt_e * P * state.w * self._background.dchi_dz
        return Transported(P, np.stack((state.rho, rho_u, rho_w, P_chi_p)))

    def _implicit_stage(
        self,
        stage: Stage,
        regime: Regime,
        advected: Transported,
        dt: float,
        *,
        pi_ref: FloatArray,
        P_stage: FloatArray,
        p_theta: FloatArray | None = None,
        helmholtz: FloatArray | None = None,
        momenta_n: tuple[FloatArray, FloatArray] | None = None,
    ) -> _Stage:
        """Pressure solve and momentum correction over ``dt/2``.

        ``P_stage`` weights the advected velocities into the momenta
        ``(P v)_in``; ``p_theta`` and ``helmholtz`` default to values derived
        from it.
        """
        grid = self._grid
        nondim = self._nondim
        dt_i = 0.5 * dt
        psi = advected.psi
        chi, chi_u, chi_w, chi_p = psi
        if p_theta is None:
            p_theta = P_stage / chi
        compressible = regime is Regime.COMPRESSIBLE
        if compressible and helmholtz is None:
            helmholtz = nondim.Ma2 * nondim_dP_dpi(P_stage, nondim.gamma)

        n2 = self._background.buoyancy_frequency_squared()
        factor = 1.0 / (1.0 + dt_i**2 * n2) * np.ones(grid.cell_shape)
        pu_in = P_stage * chi_u / chi
        pw_in = factor * (
            P_stage * chi_w / chi - dt_i * nondim.gravity * p_theta * chi_p
        )

        problem = assemble(
            grid,
            stage,
            regime,
            dt,
            momenta_in=(pu_in, pw_in),
            p_theta=p_theta,
            pressure_coeff=nondim.pressure_coeff,
            buoyancy_factor=factor,
            helmholtz=helmholtz if compressible else None,
            pi_ref=pi_ref if compressible else None,
            momenta_n=momenta_n,
            tol=self._numerics.tol,
            max_iter=self._numerics.max_iter,
        )
        solution = solve(problem)
        pu_out, pw_out = correct(problem, solution)
        chi_p_out = chi_p - dt_i * (pw_out / P_stage) * self._background.dchi_dz

        div_in = float(np.linalg.norm(unique_nodes(node_divergence(pu_in, pw_in, grid), grid)))
        div_out = float(
            np.max(np.abs(unique_nodes(node_divergence(pu_out, pw_out, grid), grid)))
        )
        return _Stage(
            solution=solution,
            momenta=(pu_out, pw_out),
            chi_p=chi_p_out,
            p_theta=p_theta,
            helmholtz=helmholtz,
            divergence=div_out / div_in if div_in > 0.0 else div_out,
        )
