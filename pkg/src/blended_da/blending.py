"""Regime conversion and one-step soundproof blending.

Leaving the compressible regime removes the ``Ma**2`` pressure perturbation
from ``P``; returning adds it back with a chosen Exner field:

    P_psinc = (P**(gamma-1) - Ma**2 pi)**(1/(gamma-1))
    P_comp  = (P**(gamma-1) + Ma**2 pi)**(1/(gamma-1))

with ``pi`` the scaled perturbation averaged from nodes to cells.
"""

from __future__ import annotations

import logging

import numpy as np
from reactor_di import law_of_demeter

from .config import BlendConfig, PiChoice, ScenarioSpec
from .constants import NondimParameters
from .errors import ConversionError, RegimeError
from .operators import nodes_to_cells
from .state import ModelState, Regime
from .stepper import TIME_EPS, StepObserver, Stepper
from .timestep import StepPlan
from .type_utils import FloatArray

logger = logging.getLogger(__name__)


def _convert(P: FloatArray, pi_cells: FloatArray, sign: float, nondim: NondimParameters) -> FloatArray:
    exponent = nondim.gamma - 1.0
    radicand = P**exponent + sign * nondim.Ma2 * pi_cells
    if np.any(radicand <= 0.0):
        raise ConversionError(
            f"non-positive radicand {float(radicand.min())!r} in regime conversion; "
            "the state is too far from the low-Mach regime"
        )
    return radicand ** (1.0 / exponent)  # type: ignore[no-any-return]


def to_psinc(state: ModelState, nondim: NondimParameters) -> ModelState:
    """Switch a compressible state to the pseudo-incompressible regime.

    ``rho``, the momenta and ``chi'`` are untouched; ``pi`` is kept as the
    starting guess of the first psinc step.

    Raises:
        RegimeError: If the state is not compressible.
        ConversionError: If ``P**(gamma-1) - Ma**2 pi`` is not positive.
    """
    if state.regime is not Regime.COMPRESSIBLE:
        raise RegimeError("to_psinc needs a compressible state")
    P = _convert(state.P, nodes_to_cells(state.pi), -1.0, nondim)
    return state.replace(P=P, regime=Regime.PSINC)


def to_comp(state: ModelState, pi_source: FloatArray, nondim: NondimParameters) -> ModelState:
    """Switch a pseudo-incompressible state back to the compressible regime.

    Args:
        state: Psinc state.
        pi_source: Full node Exner perturbation used for the conversion; it
            becomes the state's ``pi``.
        nondim: Solver coefficients.

    Raises:
        RegimeError: If the state is not pseudo-incompressible.
        ConversionError: If ``P**(gamma-1) + Ma**2 pi`` is not positive.
    """
    if state.regime is not Regime.PSINC:
        raise RegimeError("to_comp needs a pseudo-incompressible state")
    if pi_source.shape != state.pi.shape:
        raise RegimeError(
            f"pi_source has shape {pi_source.shape}, expected {state.pi.shape}"
        )
    P = _convert(state.P, nodes_to_cells(pi_source), 1.0, nondim)
    return state.replace(P=P, pi=np.array(pi_source, dtype=np.float64), regime=Regime.COMPRESSIBLE)


@law_of_demeter("_scenario")
class Blender:
    """Runs forecast windows that start with psinc steps."""

    _scenario: ScenarioSpec
    _blend: BlendConfig
    _stepper: Stepper
    _nondim: NondimParameters

    def run_window(
        self,
        state: ModelState,
        t_end: float,
        plan: StepPlan,
        *,
        enabled: bool,
        observer: StepObserver | None = None,
    ) -> ModelState:
        """Advance a compressible state to ``t_end``.

        With blending enabled the window begins with ``n_psinc_steps``
        pseudo-incompressible steps followed by the conversion back with the
        configured ``pi`` choice; otherwise the window is purely compressible.
        """
        if state.regime is not Regime.COMPRESSIBLE:
            raise RegimeError("forecast windows start from compressible states")
        comp_plan = plan.with_regime(Regime.COMPRESSIBLE)
        if enabled:
            state = self.blend(state, plan, observer=observer, t_end=t_end)
        return self._stepper.march(state, t_end, comp_plan, observer)

    def blend(
        self,
        state: ModelState,
        plan: StepPlan,
        *,
        observer: StepObserver | None = None,
        t_end: float | None = None,
    ) -> ModelState:
        """Take the psinc steps of one blended start and return to compressible.

        Psinc steps are shortened so they do not pass ``t_end``.
        """
        blend = self._blend
        stepper = self._stepper
        psinc_plan = plan.with_regime(Regime.PSINC)
        logger.info(
            "blend t=%.6g compressible->psinc steps=%d pi_choice=%s",
            state.t,
            blend.n_psinc_steps,
            blend.pi_choice.value,
        )
        state = to_psinc(state, self._nondim)
        for _ in range(blend.n_psinc_steps):
            dt = stepper.compute_dt(state, psinc_plan)
            if t_end is not None:
                dt = min(dt, t_end - state.t)
                if dt <= TIME_EPS:
                    break
            result = stepper.step(state, psinc_plan, dt)
            state = result.state
            if observer is not None:
                observer(state, result.stats)
        if blend.pi_choice is PiChoice.HALF:
            pi_source = stepper.harvest_half_pi(state, psinc_plan)
        else:
            pi_source = state.pi
        logger.info(
            "blend t=%.6g psinc->compressible pi_choice=%s", state.t, blend.pi_choice.value
        )
        return to_comp(state, pi_source, self._nondim)
