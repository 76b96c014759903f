"""Run directory layout: metric CSVs and binary field snapshots.

::

    <run>/rmse_<var>.csv
    <run>/probe_<name>.csv
    <run>/imbalance.csv
    <run>/fields/<time>/<var>.bin
    <run>/fields/<time>/manifest.json
    <run>/events.log

Fields are little-endian float64 in z-outer, x-inner order. Numbers in CSVs
carry 17 significant digits so they read back bit-exactly.
"""

from __future__ import annotations

import csv
import json
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path
from typing import Any

import numpy as np

from .constants import PhysConstants
from .state import CELL_FIELDS, ModelState, Units
from .type_utils import FloatArray

FIELD_DTYPE = np.dtype("<f8")
MANIFEST = "manifest.json"

UNITS = {
    "rho": "kg m-3",
    "rho_u": "kg m-2 s-1",
    "rho_w": "kg m-2 s-1",
    "P": "kg K m-3",
    "chi_p": "K-1",
    "pi": "1",
}


def _format(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format(value) for value in row])
    return path


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    """Header and raw rows of a CSV file."""
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        return header, [row for row in reader]


def read_numeric_csv(path: Path) -> dict[str, FloatArray]:
    """Columns of an all-numeric CSV file."""
    header, rows = read_csv(path)
    data = np.array(rows, dtype=np.float64).reshape(len(rows), len(header))
    return {name: data[:, k] for k, name in enumerate(header)}


def time_label(t: float) -> str:
    return f"{t:010.3f}"


def write_fields(
    root: Path,
    state: ModelState,
    consts: PhysConstants,
    *,
    seed: int | None = None,
    label: str | None = None,
    extra: Mapping[str, Any] | None = None,
) -> Path:
    """Write every field of an SI state below ``root/fields/<time>``.

    Returns:
        The snapshot directory.
    """
    if state.units is not Units.SI:
        raise ValueError("snapshots are written in SI units")
    directory = root / "fields" / (label or time_label(state.t))
    directory.mkdir(parents=True, exist_ok=True)
    variables: dict[str, Any] = {}
    for name in (*CELL_FIELDS, "pi"):
        array = np.asarray(getattr(state, name), dtype=np.float64)
        directory.joinpath(f"{name}.bin").write_bytes(
            np.ascontiguousarray(array.T, dtype=FIELD_DTYPE).tobytes()
        )
        variables[name] = {
            "shape": list(array.T.shape),
            "units": UNITS[name],
            "location": "nodes" if name == "pi" else "cells",
        }
    manifest = {
        "time": state.t,
        "regime": state.regime.value,
        "order": "z-outer, x-inner",
        "dtype": FIELD_DTYPE.str,
        "variables": variables,
        "reference": consts.manifest(),
        "seed": seed,
        **(extra or {}),
    }
    directory.joinpath(MANIFEST).write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return directory


def read_field(directory: Path, name: str) -> FloatArray:
    """Read one snapshot field back as an ``(x, z)`` indexed array."""
    manifest = json.loads(directory.joinpath(MANIFEST).read_text(encoding="utf-8"))
    try:
        shape = manifest["variables"][name]["shape"]
    except KeyError:
        raise KeyError(f"{name!r} not in snapshot {directory}") from None
    data = np.frombuffer(directory.joinpath(f"{name}.bin").read_bytes(), dtype=FIELD_DTYPE)
    return data.reshape(shape).T.astype(np.float64)
