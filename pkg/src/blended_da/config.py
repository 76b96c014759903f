"""Scenario configuration: YAML files mapped onto frozen dataclasses.

A configuration file holds one scenario. Keys mirror the dataclass fields
below; nested sections map onto nested dataclasses. Every validation failure
raises :class:`~blended_da.errors.ConfigError` naming the dotted key.

Example:
    >>> config = load_config("configs/vortex_balanced.yaml")  # doctest: +SKIP
    >>> config.scenario.letkf.region  # doctest: +SKIP
    11
"""

from __future__ import annotations

import dataclasses
import math
import types
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Union, get_args, get_origin, get_type_hints

import yaml

from .advection import Limiter
from .constants import PhysConstants
from .errors import ConfigError
from .grid import Boundary, Grid
from .state import STATE_VARIABLES
from .timestep import DtPolicy, StepPlan
from .type_utils import require_non_negative, require_positive


class Case(Enum):
    VORTEX = "vortex"
    BUBBLE = "bubble"


class Mode(Enum):
    """Ensemble scenario: no assimilation, assimilation, assimilation + blending."""

    ENNODA = "EnNoDA"
    ENDA = "EnDA"
    ENDAB = "EnDAB"

    @classmethod
    def parse(cls, text: str) -> Mode:
        for mode in cls:
            if mode.value.lower() == text.lower():
                return mode
        raise ConfigError("scenario.mode", f"unknown mode {text!r}")


class PiChoice(Enum):
    HALF = "half"
    FULL = "full"


class LocFn(Enum):
    TRUNCATED_GAUSSIAN = "truncated-gaussian"
    GASPARI_COHN = "gaspari-cohn"
    NONE = "none"


class InitialCondition(Enum):
    BALANCED = "balanced"
    IMBALANCED = "imbalanced"


class Model(Enum):
    COMPRESSIBLE = "compressible"
    PSINC = "pseudo-incompressible"
    BLENDED = "blended"


@dataclass(frozen=True)
class TimeConfig:
    """Time stepping in seconds."""

    t_final: float = 100.0
    dt_policy: DtPolicy = DtPolicy.CFL
    dt: float | None = None
    cfl_target: float = 0.45
    dt_overrides: tuple[float, ...] = ()
    dt_max: float | None = None
    output_interval: float | None = None

    def __post_init__(self) -> None:
        require_positive("time.t_final", self.t_final)
        if self.output_interval is not None:
            require_positive("time.output_interval", self.output_interval)

    def plan(self, consts: PhysConstants, alpha_P: int = 1) -> StepPlan:
        """Step plan in solver units."""
        scale = 1.0 / consts.t_ref
        return StepPlan(
            alpha_P=alpha_P,
            dt=None if self.dt is None else self.dt * scale,
            cfl_target=self.cfl_target,
            dt_policy=self.dt_policy,
            dt_overrides=tuple(dt * scale for dt in self.dt_overrides),
            dt_max=None if self.dt_max is None else self.dt_max * scale,
        )


@dataclass(frozen=True)
class NumericsConfig:
    tol: float = 1e-8
    max_iter: int = 1000
    limiter: Limiter = Limiter.MC

    def __post_init__(self) -> None:
        require_positive("numerics.tol", self.tol)
        if self.max_iter < 1:
            raise ConfigError("numerics.max_iter", "must be at least 1")


@dataclass(frozen=True)
class Probe:
    """Named probe location in metres."""

    name: str
    x: float
    z: float


@dataclass(frozen=True)
class SingleRunConfig:
    """Deterministic single run.

    Attributes:
        initial: Balanced or imbalanced vortex start; the bubble is always
            started with ``pi' = 0``.
        model: Compressible, pseudo-incompressible or blended (psinc start
            steps followed by compressible steps).
        center: Vortex centre in metres.
        amplitude: Bubble amplitude in K.
        probes: Pressure probe locations.
    """

    initial: InitialCondition = InitialCondition.BALANCED
    model: Model = Model.COMPRESSIBLE
    center: tuple[float, float] = (0.0, 0.0)
    amplitude: float = 2.0
    probes: tuple[Probe, ...] = ()

    def __post_init__(self) -> None:
        require_non_negative("run.amplitude", self.amplitude)


@dataclass(frozen=True)
class LetkfConfig:
    """Local ensemble transform Kalman filter settings.

    Attributes:
        region: Edge length of the square localisation patch in grid points.
        loc_fn: Taper applied to observations inside the patch.
        b: Multiplicative covariance inflation.
        observed_vars: Observed subset of ``rho, rho_u, rho_w, P, pi``.
        chunk: Analysis locations processed per vectorised block.
    """

    region: int = 11
    loc_fn: LocFn = LocFn.TRUNCATED_GAUSSIAN
    b: float = 1.0
    observed_vars: tuple[str, ...] = ("rho_u", "rho_w")
    chunk: int = 512

    def __post_init__(self) -> None:
        if self.region < 1 or self.region % 2 == 0:
            raise ConfigError(
                "scenario.letkf.region", f"must be a positive odd number, got {self.region}"
            )
        if not math.isfinite(self.b) or self.b < 1.0:
            raise ConfigError("scenario.letkf.b", f"inflation must be >= 1, got {self.b}")
        if not self.observed_vars:
            raise ConfigError("scenario.letkf.observed_vars", "must not be empty")
        unknown = sorted(set(self.observed_vars) - set(STATE_VARIABLES))
        if unknown:
            raise ConfigError(
                "scenario.letkf.observed_vars", f"unknown variables {unknown}"
            )
        if len(set(self.observed_vars)) != len(self.observed_vars):
            raise ConfigError("scenario.letkf.observed_vars", "duplicate variables")
        if self.chunk < 1:
            raise ConfigError("scenario.letkf.chunk", "must be positive")

    @property
    def half_width(self) -> int:
        return self.region // 2


@dataclass(frozen=True)
class BlendConfig:
    """One-step soundproof blending.

    ``apply_after_da`` defaults to the scenario mode: on for EnDAB, off otherwise.
    """

    pi_choice: PiChoice = PiChoice.HALF
    n_psinc_steps: int = 1
    apply_at_init: bool = True
    apply_after_da: bool | None = None

    def __post_init__(self) -> None:
        if self.n_psinc_steps < 1:
            raise ConfigError("scenario.blend.n_psinc_steps", "must be at least 1")


@dataclass(frozen=True)
class ScenarioSpec:
    """Ensemble scenario, times in seconds."""

    mode: Mode = Mode.ENDAB
    case: Case | None = None
    K: int = 10
    seed: int = 0
    t_first: float = 25.0
    dt_obs: float = 25.0
    t_final: float = 300.0
    obs_fraction: float = 0.1
    noise_frac: float = 0.05
    center_range: tuple[float, float] = (-1000.0, 1000.0)
    amplitude_range: tuple[float, float] = (2.0, 12.0)
    output_interval: float | None = None
    letkf: LetkfConfig = field(default_factory=LetkfConfig)
    blend: BlendConfig = field(default_factory=BlendConfig)

    def __post_init__(self) -> None:
        if self.K < 2:
            raise ConfigError("scenario.K", f"ensembles need at least 2 members, got {self.K}")
        require_positive("scenario.t_first", self.t_first)
        require_positive("scenario.dt_obs", self.dt_obs)
        require_positive("scenario.t_final", self.t_final)
        if not 0.0 < self.obs_fraction <= 1.0:
            raise ConfigError("scenario.obs_fraction", "must lie in (0, 1]")
        require_non_negative("scenario.noise_frac", self.noise_frac)
        for key in ("center_range", "amplitude_range"):
            lo, hi = getattr(self, key)
            if not hi > lo:
                raise ConfigError(f"scenario.{key}", "upper bound must exceed lower bound")
        if self.output_interval is not None:
            require_positive("scenario.output_interval", self.output_interval)
        after_da = self.blend.apply_after_da
        if after_da is None:
            object.__setattr__(
                self, "blend", replace(self.blend, apply_after_da=self.mode is Mode.ENDAB)
            )
        elif after_da != (self.mode is Mode.ENDAB):
            raise ConfigError(
                "scenario.blend.apply_after_da",
                f"must be {self.mode is Mode.ENDAB} in mode {self.mode.value}",
            )

    def observation_times(self) -> tuple[float, ...]:
        """Observation schedule in seconds, shared by all modes."""
        count = int(math.floor((self.t_final - self.t_first) / self.dt_obs + 1e-9)) + 1
        return tuple(self.t_first + k * self.dt_obs for k in range(max(count, 0)))

    def assimilation_times(self) -> tuple[float, ...]:
        """Analysis times in seconds; empty in mode EnNoDA."""
        return () if self.mode is Mode.ENNODA else self.observation_times()

    def with_mode(self, mode: Mode) -> ScenarioSpec:
        return replace(self, mode=mode, blend=replace(self.blend, apply_after_da=None))


@dataclass(frozen=True)
class RunConfig:
    """Complete configuration of one scenario file."""

    case: Case
    domain: Grid
    name: str = "run"
    constants: PhysConstants = field(default_factory=PhysConstants)
    time: TimeConfig = field(default_factory=TimeConfig)
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    run: SingleRunConfig = field(default_factory=SingleRunConfig)
    scenario: ScenarioSpec = field(default_factory=ScenarioSpec)
    workers: int = 1

    def __post_init__(self) -> None:
        if self.scenario.case is None:
            object.__setattr__(self, "scenario", replace(self.scenario, case=self.case))
        elif self.scenario.case is not self.case:
            raise ConfigError("scenario.case", f"does not match case {self.case.value}")
        if self.workers < 1:
            raise ConfigError("workers", "must be at least 1")
        for probe in self.run.probes:
            if not self.domain.contains(probe.x, probe.z):
                raise ConfigError(f"run.probes.{probe.name}", "outside the domain")

    def with_overrides(
        self,
        *,
        seed: int | None = None,
        mode: Mode | None = None,
        region: int | None = None,
        pi_choice: PiChoice | None = None,
    ) -> RunConfig:
        """Apply command-line overrides."""
        scenario = self.scenario
        if mode is not None:
            scenario = scenario.with_mode(mode)
        if seed is not None:
            scenario = replace(scenario, seed=seed)
        if region is not None:
            scenario = replace(scenario, letkf=replace(scenario.letkf, region=region))
        if pi_choice is not None:
            scenario = replace(scenario, blend=replace(scenario.blend, pi_choice=pi_choice))
        return replace(self, scenario=scenario)


def _strip_optional(tp: Any) -> tuple[Any, bool]:
    origin = get_origin(tp)
    if origin is Union or origin is types.UnionType:
        args = [a for a in get_args(tp) if a is not type(None)]
        if len(args) == 1:
            return args[0], True
    return tp, False


def _convert(value: Any, tp: Any, key: str) -> Any:
    tp, optional = _strip_optional(tp)
    if value is None:
        if optional:
            return None
        raise ConfigError(key, "must not be empty")
    if dataclasses.is_dataclass(tp) and isinstance(tp, type):
        return _build(tp, value, f"{key}.")
    if isinstance(tp, type) and issubclass(tp, Enum):
        try:
            return Mode.parse(value) if tp is Mode else tp(value)
        except ValueError:
            allowed = ", ".join(str(m.value) for m in tp)
            raise ConfigError(key, f"{value!r} is not one of {allowed}") from None
    if get_origin(tp) is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(key, f"expected a list, got {type(value).__name__}")
        args = get_args(tp)
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_convert(v, args[0], f"{key}[{i}]") for i, v in enumerate(value))
        if len(args) != len(value):
            raise ConfigError(key, f"expected {len(args)} entries, got {len(value)}")
        return tuple(_convert(v, a, f"{key}[{i}]") for i, (v, a) in enumerate(zip(value, args)))
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {value!r}")
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return value
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected true or false, got {value!r}")
        return value
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(key, f"expected a string, got {value!r}")
        return value
    raise ConfigError(key, f"unsupported type {tp!r}")


def _probes(value: Any, key: str) -> tuple[Probe, ...]:
    if not isinstance(value, dict):
        raise ConfigError(key, "expected a mapping of probe name to [x, z]")
    return tuple(
        Probe(name, *_convert(xz, tuple[float, float], f"{key}.{name}"))
        for name, xz in value.items()
    )


def _build(cls: type[Any], mapping: Any, prefix: str) -> Any:
    if not isinstance(mapping, dict):
        raise ConfigError(prefix or "<root>", f"expected a mapping, got {type(mapping).__name__}")
    hints = get_type_hints(cls)
    fields = {f.name: f for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(mapping) - set(fields))
    if unknown:
        raise ConfigError(f"{prefix}{unknown[0]}", "unknown key")
    kwargs: dict[str, Any] = {}
    for name, value in mapping.items():
        key = f"{prefix}{name}"
        if cls is SingleRunConfig and name == "probes":
            kwargs[name] = _probes(value, key)
        else:
            kwargs[name] = _convert(value, hints[name], key)
    missing = [
        name
        for name, f in fields.items()
        if name not in kwargs
        and f.default is dataclasses.MISSING
        and f.default_factory is dataclasses.MISSING
    ]
    if missing:
        raise ConfigError(f"{prefix}{missing[0]}", "missing required key")
    try:
        return cls(**kwargs)
    except ConfigError as error:
        if error.key.startswith(prefix.split(".")[0]) or not prefix:
            raise
        raise ConfigError(f"{prefix}{error.key.split('.')[-1]}", str(error)) from error


def config_from_mapping(mapping: Any) -> RunConfig:
    """Build a :class:`RunConfig` from parsed YAML."""
    config: RunConfig = _build(RunConfig, mapping, "")
    return config


def load_config(path: str | Path) -> RunConfig:
    """Read and validate a YAML scenario file.

    Raises:
        ConfigError: On unreadable files, YAML syntax errors and invalid values.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as error:
        raise ConfigError("<file>", f"cannot read {path}: {error}") from error
    try:
        mapping = yaml.safe_load(text)
    except yaml.YAMLError as error:
        raise ConfigError("<file>", f"invalid YAML in {path}: {error}") from error
    return config_from_mapping(mapping)
