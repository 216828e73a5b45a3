"""CSV readers and writers for paths and result tables."""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable, Sequence
from pathlib import Path as FsPath
from typing import Any, TextIO, Union

import numpy as np

from .errors import InputError
from .simulate import Path

PathLike = Union[str, FsPath]


def format_value(value: Any) -> str:
    """Render a table cell: floats with 17 significant digits, bools as true/false."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if value is None:
        return ""
    return str(value)


def write_table_csv(
    out: Union[PathLike, TextIO], header: Sequence[str], rows: Iterable[Sequence[Any]]
) -> int:
    """Write ``rows`` under ``header``; returns the number of data rows."""
    if isinstance(out, (str, FsPath)):
        with open(out, "w", newline="") as f:
            return write_table_csv(f, header, rows)
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    n = 0
    for row in rows:
        writer.writerow([format_value(v) for v in row])
        n += 1
    return n


def write_path_csv(out: Union[PathLike, TextIO], path: Path) -> int:
    """Dump a path as ``t,x`` rows."""
    data = np.column_stack([path.times, path.values])
    if isinstance(out, (str, FsPath)):
        with open(out, "w") as f:
            return write_path_csv(f, path)
    np.savetxt(out, data, fmt="%.17g", delimiter=",", header="t,x", comments="")
    return data.shape[0]


def read_path_csv(source: Union[PathLike, TextIO]) -> Path:
    """Load a ``t,x`` file; the time column must be a uniform grid."""
    if isinstance(source, (str, FsPath)):
        text = FsPath(source).read_text()
    else:
        text = source.read()
    try:
        data = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
    except ValueError as e:
        raise InputError(f"unreadable path CSV: {e}") from e
    if data.shape[1] != 2 or data.shape[0] < 2:
        raise InputError("path CSV needs two columns t,x and at least two rows")
    t, x = data[:, 0], data[:, 1]
    steps = np.diff(t)
    dt = float(steps.mean())
    if dt <= 0.0 or not np.allclose(steps, dt, rtol=1e-9, atol=1e-12):
        raise InputError("path CSV time column is not a uniform increasing grid")
    return Path(float(t[0]), dt, x)
