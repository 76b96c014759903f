"""Full-resolution experiments; run with ``pytest -m slow``.

Each test takes minutes to hours on one core.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from blended_da.blending import to_psinc
from blended_da.config import (
    InitialCondition,
    Mode,
    Model,
    PiChoice,
    RunConfig,
    load_config,
)
from blended_da.diagnostics import ProbeVariable, probe_levels, relative_error
from blended_da.module import SimulationModule
from blended_da.scenario import initial_state
from blended_da.state import Regime, nondimensionalise
from blended_da.timestep import DtPolicy

pytestmark = pytest.mark.slow

CONFIGS = Path(__file__).parent.parent / "configs"


def _with_run(config: RunConfig, **changes) -> RunConfig:
    return replace(config, run=replace(config.run, **changes))


Levels = tuple[np.ndarray, np.ndarray]


def _levels(config: RunConfig, variable: ProbeVariable) -> dict[str, Levels]:
    """Probe times and values at every step of a single run."""
    record = SimulationModule(config).experiment.run_single()
    times = np.asarray(record.times)
    return {
        probe.name: (times, probe_levels(record, (probe.x, probe.z), variable))
        for probe in config.run.probes
    }


def _error(series: Levels, reference: Levels) -> float:
    """Relative increment error after resampling ``series`` onto the reference steps.

    The first increment holds the spin-up and is left out.
    """
    times, values = reference
    resampled = np.interp(times, *series)
    return relative_error(np.diff(resampled)[1:], np.diff(values)[1:])


def test_blending_recovers_the_balanced_vortex():
    """One psinc step removes the imbalance of a vortex started at rest pressure."""
    imbalanced = load_config(CONFIGS / "vortex_imbalanced.yaml")
    balanced = load_config(CONFIGS / "vortex_balanced.yaml")
    reference = _levels(balanced, ProbeVariable.PRESSURE)["center"]

    half = _levels(imbalanced, ProbeVariable.PRESSURE)["center"]
    full = _levels(
        imbalanced.with_overrides(pi_choice=PiChoice.FULL), ProbeVariable.PRESSURE
    )["center"]
    unblended = _levels(
        _with_run(imbalanced, model=Model.COMPRESSIBLE), ProbeVariable.PRESSURE
    )["center"]

    e_half = _error(half, reference)
    assert e_half <= 0.06
    assert e_half <= _error(full, reference)
    assert e_half <= _error(unblended, reference) / 10.0


def test_blended_vortex_follows_the_psinc_limit():
    """After the first step the blended run matches the pseudo-incompressible run."""
    imbalanced = load_config(CONFIGS / "vortex_imbalanced.yaml")
    limit = _levels(_with_run(imbalanced, model=Model.PSINC), ProbeVariable.PRESSURE)
    blended = _levels(imbalanced, ProbeVariable.PRESSURE)
    assert _error(blended["center"], limit["center"]) <= 0.05


@pytest.mark.parametrize(
    ("policy", "ratio"),
    [(DtPolicy.FIXED, 100.0), (DtPolicy.CFL, 15.0)],
    ids=["acoustic", "advective"],
)
def test_blending_filters_bubble_acoustics(policy, ratio):
    """Blended bubble probes stay far closer to the psinc run than compressible ones."""
    config = load_config(CONFIGS / "bubble.yaml")
    if policy is DtPolicy.CFL:
        config = replace(
            config,
            time=replace(config.time, dt_policy=DtPolicy.CFL, cfl_target=0.5, dt_max=21.69),
        )
    variable = ProbeVariable.PERTURBATION
    limit = _levels(_with_run(config, model=Model.PSINC), variable)
    compressible = _levels(_with_run(config, model=Model.COMPRESSIBLE), variable)
    blended = _levels(_with_run(config, model=Model.BLENDED), variable)
    for name in ("left", "top"):
        e_c = _error(compressible[name], limit[name])
        e_b = _error(blended[name], limit[name])
        assert e_c / e_b >= ratio, name


def test_blended_assimilation_beats_the_free_ensemble():
    """EnDAB errors stay below EnNoDA errors after the first analysis."""
    config = load_config(CONFIGS / "vortex_ensemble.yaml")
    free = SimulationModule(config.with_overrides(mode=Mode.ENNODA)).experiment.run_scenario()
    endab = SimulationModule(config.with_overrides(mode=Mode.ENDAB)).experiment.run_scenario()
    first = config.scenario.t_first
    for name in ("rho", "rho_u", "rho_w", "P"):
        pairs = [
            (a, b)
            for t, a, b in zip(endab.times, endab.rmse[name], free.rmse[name])
            if t > first
        ]
        assert pairs
        assert all(a <= b for a, b in pairs), name


def test_enda_pressure_jump_matches_the_imbalance_estimate():
    """The first analysis raises the P error by about the estimated imbalance."""
    config = load_config(CONFIGS / "vortex_ensemble.yaml").with_overrides(mode=Mode.ENDA)
    result = SimulationModule(config).experiment.run_scenario()
    series = result.series("P")
    k = next(i for i, row in enumerate(series) if row[2] == 1)
    jump = abs(series[k][1] - series[k - 1][1])
    estimate = result.imbalance[0][1]
    assert estimate / 3.0 <= jump <= 3.0 * estimate
    later = [e for t, e, analysis in series[k + 1 :] if not analysis]
    assert max(later) <= 2.0 * max(jump, series[k][1])


def test_localisation_sweep_ordering():
    """The worst EnDAB run beats the best EnDA run over all regions."""
    config = load_config(CONFIGS / "vortex_ensemble.yaml")
    worst_endab = []
    best_enda = []
    for region in (5, 21, 41):
        for mode, sink in ((Mode.ENDAB, worst_endab), (Mode.ENDA, best_enda)):
            result = SimulationModule(
                config.with_overrides(region=region, mode=mode)
            ).experiment.run_scenario()
            sink.append(max(result.rmse["rho_u"]))
    assert max(worst_endab) < min(best_enda)


def test_imbalanced_start_parameters():
    """The imbalanced vortex run differs from the balanced one only in its start."""
    imbalanced = load_config(CONFIGS / "vortex_imbalanced.yaml")
    balanced = load_config(CONFIGS / "vortex_balanced.yaml")
    assert imbalanced.run.initial is InitialCondition.IMBALANCED
    assert imbalanced.domain == balanced.domain
    assert imbalanced.time == balanced.time


def test_vortex_returns_after_one_revolution():
    """After one pass across the periodic domain the centre is back within a cell."""
    config = load_config(CONFIGS / "vortex_balanced.yaml")
    record = SimulationModule(config).experiment.run_single()
    assert record.times[-1] == pytest.approx(config.time.t_final)
    start = np.unravel_index(np.argmin(record.pressure[0]), record.pressure[0].shape)
    end = np.unravel_index(np.argmin(record.pressure[-1]), record.pressure[-1].shape)
    for a, b, n in zip(start, end, (config.domain.Nx, config.domain.Nz)):
        shift = (int(b) - int(a) + n // 2) % n - n // 2
        assert abs(shift) <= 1


def test_psinc_bubble_correctors_are_divergence_free():
    """Every psinc full stage on the 160 x 80 bubble meets ten times the solver tolerance."""
    config = load_config(CONFIGS / "bubble.yaml")
    simulation = SimulationModule(config)
    state = nondimensionalise(
        initial_state(config.case, config.domain, config.constants, config.run.amplitude),
        config.constants,
    )
    state = to_psinc(state, simulation.nondim)
    plan = config.time.plan(config.constants).with_regime(Regime.PSINC)
    for _ in range(50):
        result = simulation.stepper.step(state, plan)
        assert result.stats.divergence <= 10.0 * config.numerics.tol
        state = result.state


def test_enda_and_endab_agree_until_the_first_analysis():
    """Blending after an analysis cannot touch the trajectory before it."""
    config = load_config(CONFIGS / "vortex_ensemble.yaml")
    config = replace(config, scenario=replace(config.scenario, t_final=config.scenario.t_first))
    enda = SimulationModule(config.with_overrides(mode=Mode.ENDA)).experiment.run_scenario()
    endab = SimulationModule(config.with_overrides(mode=Mode.ENDAB)).experiment.run_scenario()
    assert enda.times == endab.times
    assert enda.analysis_times == [config.scenario.t_first]
    for name in ("rho", "rho_u", "rho_w", "P", "pi"):
        assert enda.rmse[name] == endab.rmse[name], name
        assert enda.rmse_analysis[name] == endab.rmse_analysis[name], name
    for a, b in zip(enda.members, endab.members):
        assert_array_equal(a.rho_u, b.rho_u)
        assert_array_equal(a.pi, b.pi)
