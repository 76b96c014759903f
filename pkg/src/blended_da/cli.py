"""Command line front end.

::

    blended-da run --config configs/bubble.yaml --out out/bubble
    blended-da ensemble --config configs/vortex_ensemble.yaml --mode enda --out out/enda
    blended-da diag out/enda --rmse
    blended-da diag out/blended --reference out/compressible --probe center
    blended-da sweep --config configs/vortex_ensemble.yaml --regions 5,21,41 --out out/sweep

Exit status is 0 on success, 2 on configuration errors and 3 on numerical
failures.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path

import numpy as np
from tqdm import tqdm

from .artifacts import read_numeric_csv, time_label, write_csv, write_fields
from .config import InitialCondition, Mode, Model, PiChoice, RunConfig, load_config
from .diagnostics import ProbeVariable, RunRecord, probe_levels, probe_series, relative_error
from .errors import ConfigError, NumericalError
from .module import SimulationModule
from .scenario import Progress, ScenarioResult
from .state import STATE_VARIABLES

logger = logging.getLogger(__name__)

EVENTS_LOG = "events.log"
_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _regions(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from None


def _scenario_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, required=True, help="YAML scenario file")
    parser.add_argument("--out", type=Path, default=None, help="run directory (default: out/<name>)")
    parser.add_argument("--seed", type=int, default=None, help="override scenario.seed")
    parser.add_argument(
        "--mode", choices=[m.value.lower() for m in Mode], default=None, help="override scenario.mode"
    )
    parser.add_argument("--region", type=int, default=None, help="override scenario.letkf.region")
    parser.add_argument(
        "--pi-choice",
        choices=[c.value for c in PiChoice],
        default=None,
        help="override scenario.blend.pi_choice",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log every step")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blended-da",
        description="Blended soundproof/compressible solver with ensemble data assimilation.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="single deterministic simulation")
    _scenario_flags(run)
    run.add_argument(
        "--model", choices=[m.value for m in Model], default=None, help="override run.model"
    )
    run.add_argument(
        "--initial",
        choices=[i.value for i in InitialCondition],
        default=None,
        help="override run.initial",
    )

    ensemble = commands.add_parser("ensemble", help="ensemble scenario")
    _scenario_flags(ensemble)

    sweep = commands.add_parser("sweep", help="EnDA and EnDAB over localisation regions")
    _scenario_flags(sweep)
    sweep.add_argument("--regions", type=_regions, default=[5, 21, 41], help="e.g. 5,21,41")

    diag = commands.add_parser("diag", help="metric tables from a stored run")
    diag.add_argument("run_dir", type=Path)
    diag.add_argument("--rmse", action="store_true", help="summarise the RMSE series")
    diag.add_argument("--reference", type=Path, default=None, help="run to compare probes against")
    diag.add_argument("--probe", action="append", default=None, help="probe name, repeatable")
    diag.add_argument(
        "--variable", choices=[v.value for v in ProbeVariable], default=ProbeVariable.PRESSURE.value
    )
    diag.add_argument("--no-spin-up", action="store_true", help="keep the first increment")
    diag.add_argument("-v", "--verbose", action="store_true")
    return parser


def configure_logging(run_dir: Path | None, verbose: bool) -> None:
    """Console logging plus an ``events.log`` file in the run directory."""
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(level=level, format=_FORMAT, force=True)
    if run_dir is not None:
        run_dir.mkdir(parents=True, exist_ok=True)
        handler = logging.FileHandler(run_dir / EVENTS_LOG, encoding="utf-8")
        handler.setFormatter(logging.Formatter(_FORMAT))
        handler.setLevel(level)
        logging.getLogger().addHandler(handler)


@contextmanager
def progress_bar(total: float, desc: str) -> Iterator[Progress]:
    """Progress over simulated seconds."""
    with tqdm(total=total, desc=desc, unit="s", file=sys.stderr) as bar:

        def update(t: float) -> None:
            bar.update(min(t, total) - bar.n)

        yield update


def _load(args: argparse.Namespace) -> RunConfig:
    config = load_config(args.config).with_overrides(
        seed=args.seed,
        mode=None if args.mode is None else Mode.parse(args.mode),
        region=args.region,
        pi_choice=None if args.pi_choice is None else PiChoice(args.pi_choice),
    )
    model = getattr(args, "model", None)
    initial = getattr(args, "initial", None)
    if model is not None or initial is not None:
        run = config.run
        config = replace(
            config,
            run=replace(
                run,
                model=run.model if model is None else Model(model),
                initial=run.initial if initial is None else InitialCondition(initial),
            ),
        )
    return config


def _run_dir(args: argparse.Namespace, config: RunConfig) -> Path:
    return args.out if args.out is not None else Path("out") / config.name


def write_probes(run_dir: Path, config: RunConfig, record: RunRecord) -> list[Path]:
    """One CSV per probe with the pressure and its perturbation at every step."""
    paths = []
    for probe in config.run.probes:
        location = (probe.x, probe.z)
        p = probe_levels(record, location, ProbeVariable.PRESSURE)
        p_prime = probe_levels(record, location, ProbeVariable.PERTURBATION)
        paths.append(
            write_csv(
                run_dir / f"probe_{probe.name}.csv",
                ("time", "p", "p_prime"),
                zip(record.times, p, p_prime),
            )
        )
    return paths


def write_scenario(run_dir: Path, config: RunConfig, result: ScenarioResult) -> None:
    """RMSE tables, imbalance estimates and the final truth and ensemble mean fields."""
    for name in STATE_VARIABLES:
        write_csv(run_dir / f"rmse_{name}.csv", ("time", "rmse", "analysis"), result.series(name))
    write_csv(run_dir / "imbalance.csv", ("time", "imbalance"), result.imbalance)
    extra = {"mode": config.scenario.mode.value, "K": config.scenario.K}
    t_final = config.scenario.t_final
    if result.truth is not None:
        write_fields(
            run_dir,
            result.truth,
            config.constants,
            seed=config.scenario.seed,
            label=f"truth_{time_label(t_final)}",
            extra=extra,
        )
    write_fields(
        run_dir,
        result.ensemble_mean(),
        config.constants,
        seed=config.scenario.seed,
        label=f"mean_{time_label(t_final)}",
        extra=extra,
    )


def command_run(args: argparse.Namespace) -> int:
    config = _load(args)
    run_dir = _run_dir(args, config)
    configure_logging(run_dir, args.verbose)
    simulation = SimulationModule(config)
    with progress_bar(config.time.t_final, config.name) as progress:
        record = simulation.experiment.run_single(progress)
    write_probes(run_dir, config, record)
    for state in record.snapshots.values():
        write_fields(run_dir, state, config.constants, extra={"model": config.run.model.value})
    logger.info("wrote %s", run_dir)
    return 0


def _run_scenario(config: RunConfig, run_dir: Path) -> ScenarioResult:
    simulation = SimulationModule(config)
    desc = f"{config.name} {config.scenario.mode.value}"
    with progress_bar(config.scenario.t_final, desc) as progress:
        result = simulation.experiment.run_scenario(progress)
    write_scenario(run_dir, config, result)
    return result


def command_ensemble(args: argparse.Namespace) -> int:
    config = _load(args)
    run_dir = _run_dir(args, config)
    configure_logging(run_dir, args.verbose)
    _run_scenario(config, run_dir)
    logger.info("wrote %s", run_dir)
    return 0


def command_sweep(args: argparse.Namespace) -> int:
    config = _load(args)
    run_dir = _run_dir(args, config)
    configure_logging(run_dir, args.verbose)
    rows = []
    for region in args.regions:
        for mode in (Mode.ENDA, Mode.ENDAB):
            variant = config.with_overrides(region=region, mode=mode)
            result = _run_scenario(variant, run_dir / f"region_{region}" / mode.value.lower())
            for name in STATE_VARIABLES:
                errors = result.rmse[name]
                rows.append((region, mode.value, name, max(errors), float(np.mean(errors)), errors[-1]))
    write_csv(run_dir / "sweep.csv", ("region", "mode", "variable", "max", "mean", "final"), rows)
    logger.info("wrote %s", run_dir / "sweep.csv")
    return 0


def _require(path: Path) -> Path:
    if not path.is_file():
        raise ConfigError("run_dir", f"missing artifact {path}")
    return path


def rmse_summary(run_dir: Path) -> Path:
    """Per-variable forecast statistics and the largest analysis jump."""
    rows = []
    for name in STATE_VARIABLES:
        table = read_numeric_csv(_require(run_dir / f"rmse_{name}.csv"))
        forecast = table["rmse"][table["analysis"] == 0]
        analysis = table["analysis"] == 1
        jumps = [
            table["rmse"][k - 1] - table["rmse"][k]
            for k in np.flatnonzero(analysis)
            if k > 0 and table["analysis"][k - 1] == 0
        ]
        rows.append(
            (
                name,
                float(np.mean(forecast)),
                float(np.max(forecast)),
                float(forecast[-1]),
                int(np.count_nonzero(analysis)),
                max(jumps, key=abs) if jumps else 0.0,
            )
        )
    return write_csv(
        run_dir / "rmse_summary.csv",
        ("variable", "mean", "max", "final", "analyses", "max_jump"),
        rows,
    )


def probe_errors(
    run_dir: Path,
    reference: Path,
    probes: Sequence[str] | None,
    variable: ProbeVariable,
    spin_up: bool,
) -> Path:
    """Relative increment errors of ``run_dir`` probes against ``reference``."""
    names = list(probes) if probes else sorted(p.stem[len("probe_"):] for p in run_dir.glob("probe_*.csv"))
    if not names:
        raise ConfigError("run_dir", f"no probe series in {run_dir}")
    rows = []
    for name in names:
        series = []
        for directory in (run_dir, reference):
            table = read_numeric_csv(_require(directory / f"probe_{name}.csv"))
            series.append(
                probe_series(
                    name, (np.nan, np.nan), variable, table["time"], table[variable.value], spin_up=spin_up
                )
            )
        error = relative_error(series[0], series[1])
        logger.info("probe %s %s relative error %.6g", name, variable.value, error)
        rows.append((name, variable.value, error))
    return write_csv(run_dir / "relative_error.csv", ("probe", "variable", "error"), rows)


def command_diag(args: argparse.Namespace) -> int:
    configure_logging(None, args.verbose)
    if not args.rmse and args.reference is None:
        raise ConfigError("diag", "choose --rmse and/or --reference")
    if args.rmse:
        logger.info("wrote %s", rmse_summary(args.run_dir))
    if args.reference is not None:
        path = probe_errors(
            args.run_dir,
            args.reference,
            args.probe,
            ProbeVariable(args.variable),
            not args.no_spin_up,
        )
        logger.info("wrote %s", path)
    return 0


COMMANDS = {
    "run": command_run,
    "ensemble": command_ensemble,
    "sweep": command_sweep,
    "diag": command_diag,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as error:
        print(f"blended-da: configuration error: {error}", file=sys.stderr)
        return 2
    except NumericalError as error:
        logger.error("numerical failure: %s", error)
        print(f"blended-da: numerical failure: {error}", file=sys.stderr)
        return 3
    except ValueError as error:
        print(f"blended-da: {error}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
