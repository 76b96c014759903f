"""Time-step plans and the advective step-size rule."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import ConfigError
from .grid import Grid
from .state import ModelState, Regime


class DtPolicy(Enum):
    FIXED = "fixed"
    CFL = "cfl"


@dataclass(frozen=True)
class StepPlan:
    """How the next step is taken, in solver time units.

    Attributes:
        alpha_P: 1 for compressible, 0 for pseudo-incompressible steps.
        dt: Step length of the fixed policy.
        cfl_target: Advective Courant bound of the CFL policy.
        dt_policy: Fixed or CFL-driven.
        dt_overrides: Step lengths of the first steps, by step counter.
        dt_max: Upper bound of CFL-driven steps.
    """

    alpha_P: int = 1
    dt: float | None = None
    cfl_target: float = 0.45
    dt_policy: DtPolicy = DtPolicy.CFL
    dt_overrides: tuple[float, ...] = ()
    dt_max: float | None = None

    def __post_init__(self) -> None:
        if self.alpha_P not in (0, 1):
            raise ConfigError("alpha_P", f"must be 0 or 1, got {self.alpha_P!r}")
        if self.dt_policy is DtPolicy.FIXED and (self.dt is None or self.dt <= 0.0):
            raise ConfigError("time.dt", "the fixed policy needs a positive dt")
        if not 0.0 < self.cfl_target <= 1.0:
            raise ConfigError("time.cfl_target", f"must lie in (0, 1], got {self.cfl_target}")
        if any(dt <= 0.0 for dt in self.dt_overrides):
            raise ConfigError("time.dt_overrides", "step lengths must be positive")
        if self.dt_max is not None and self.dt_max <= 0.0:
            raise ConfigError("time.dt_max", "must be positive")

    @property
    def regime(self) -> Regime:
        return Regime.from_alpha(self.alpha_P)

    def with_regime(self, regime: Regime) -> StepPlan:
        return replace(self, alpha_P=regime.alpha_P)


def compute_dt(state: ModelState, plan: StepPlan, grid: Grid) -> float:
    """Step length for the next step of ``state``.

    The CFL policy uses the largest pointwise speed, so both directional
    Courant numbers stay below ``cfl_target``.

    Raises:
        ConfigError: If the CFL policy meets a fluid at rest and no cap is set.
    """
    if state.step < len(plan.dt_overrides):
        return plan.dt_overrides[state.step]
    if plan.dt_policy is DtPolicy.FIXED:
        assert plan.dt is not None
        return plan.dt
    speed = float(np.max(np.hypot(state.u, state.w)))
    if speed == 0.0:
        if plan.dt_max is None:
            raise ConfigError(
                "time.dt_policy", "CFL-driven steps need motion or a dt_max cap"
            )
        return plan.dt_max
    dt = plan.cfl_target * min(grid.dx, grid.dz) / speed
    return dt if plan.dt_max is None else min(dt, plan.dt_max)
