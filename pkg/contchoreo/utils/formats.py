"""CSV files read and written by the command line."""
from __future__ import annotations

import csv
from typing import Any, Iterable, Sequence, TextIO

import numpy as np

from ..continuum import Spectrum
from ..core.loops import FourierLoop
from ..exceptions import ChoreoDomainError

SPECTRUM_COLUMNS = ("k", "d_k", "lambda_k")
SCAN_COLUMNS = (
    "sigma",
    "seed",
    "predicted_min",
    "achieved_min",
    "gap",
    "circle_distance",
    "iterations",
    "converged",
)
CONVERGE_COLUMNS = ("N", "force_gap", "omega2", "omega2_gap")
CHAIN_COLUMNS = ("seed", "total", "tilde", "bar", "lower_bound", "kinetic_gap")


def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_table(stream: TextIO, columns: Sequence[str], rows: Iterable[Sequence[Any]]):
    """Write a header and rows; floats use their shortest round-trip form."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise ChoreoDomainError(f"row {row!r} does not match columns {columns}")
        writer.writerow([_cell(value) for value in row])


def loop_columns(dim: int) -> list[str]:
    """``k,re_1,im_1,...,re_d,im_d``."""
    columns = ["k"]
    for j in range(1, dim + 1):
        columns += [f"re_{j}", f"im_{j}"]
    return columns


def write_loop(stream: TextIO, loop: FourierLoop):
    """One row per mode ``k = 1..K``."""
    rows = []
    for k, coeff in zip(loop.wavenumbers, loop.coeffs):
        row: list[Any] = [int(k)]
        for value in coeff:
            row += [value.real, value.imag]
        rows.append(row)
    write_table(stream, loop_columns(loop.dim), rows)


def read_loop(stream: TextIO) -> FourierLoop:
    """Load a loop written by :func:`write_loop`.

    Raises:
        ChoreoDomainError: the header or the mode numbering is malformed.
    """
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ChoreoDomainError("loop file is empty") from None

    dim = (len(header) - 1) // 2
    if dim < 2 or header != loop_columns(dim):
        raise ChoreoDomainError(f"unexpected loop file header: {','.join(header)}")

    coeffs = []
    for expected, row in enumerate(reader, start=1):
        if not row:
            continue
        if len(row) != len(header) or int(row[0]) != expected:
            raise ChoreoDomainError(f"malformed loop file row for mode {expected}: {row}")
        values = [float(cell) for cell in row[1:]]
        coeffs.append([complex(re, im) for re, im in zip(values[::2], values[1::2])])
    if not coeffs:
        raise ChoreoDomainError("loop file has no modes")
    return FourierLoop(np.array(coeffs))


def write_spectrum(stream: TextIO, spectrum: Spectrum):
    """``k,d_k,lambda_k``."""
    write_table(stream, SPECTRUM_COLUMNS, spectrum.rows())


def trajectory_columns(dim: int) -> list[str]:
    """``t,body,x_1..x_d,v_1..v_d``."""
    return (
        ["t", "body"]
        + [f"x_{j}" for j in range(1, dim + 1)]
        + [f"v_{j}" for j in range(1, dim + 1)]
    )


def write_trajectory(stream: TextIO, trajectory) -> None:
    """One row per snapshot and body."""
    first = trajectory.states[0]

    def rows():
        for state in trajectory.states:
            for body in range(state.N):
                yield [state.time, body, *state.positions[body], *state.velocities[body]]

    write_table(stream, trajectory_columns(first.dim), rows())


def write_scan(stream: TextIO, rows) -> None:
    """Scan table, one row per ``(σ, seed)``."""
    write_table(
        stream,
        SCAN_COLUMNS,
        (
            [
                row.sigma,
                row.seed,
                row.predicted_min,
                row.achieved_min,
                row.gap,
                row.circle_distance,
                row.iterations,
                row.converged,
            ]
            for row in rows
        ),
    )
