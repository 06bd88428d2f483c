"""
Uniform 1D grids, nodal fields on them, linear interpolation and CSV persistence.

Grids and fields are immutable once built. Field files use the header ``x,u``
and history files ``t,x,u``; numbers are written with ``repr`` which is the
shortest text that reads back to the same binary64 value.
"""
import csv
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Union

import numpy as np

from .exceptions import CSVFormatError, GridMismatchError, NonFiniteValueError, ValidationError
from .reports import ReportBlock, parse_block

logger = logging.getLogger(__name__)

FIELD_HEADER = ["x", "u"]
HISTORY_HEADER = ["t", "x", "u"]


@dataclass(frozen=True)
class Grid:
    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ValidationError(f"grid needs at least 3 nodes, got {self.n}", {"n": self.n})
        if not (np.isfinite(self.x_min) and np.isfinite(self.x_max)) or self.x_min >= self.x_max:
            raise ValidationError(
                f"grid bounds must satisfy x_min < x_max, got [{self.x_min}, {self.x_max}]",
                {"x_min": self.x_min, "x_max": self.x_max},
            )
        object.__setattr__(self, "x_min", float(self.x_min))
        object.__setattr__(self, "x_max", float(self.x_max))
        object.__setattr__(self, "n", int(self.n))

    @property
    def dx(self):
        return (self.x_max - self.x_min) / (self.n - 1)

    @cached_property
    def nodes(self):
        nodes = np.linspace(self.x_min, self.x_max, self.n)
        nodes.setflags(write=False)
        return nodes

    @property
    def center(self):
        return 0.5 * (self.x_min + self.x_max)

    @property
    def half_width(self):
        return 0.5 * (self.x_max - self.x_min)

    def mask(self, lo, hi):
        """Nodes inside [lo, hi], with a roundoff allowance of 1e-9 dx."""
        slack = 1e-9 * self.dx
        return (self.nodes >= lo - slack) & (self.nodes <= hi + slack)

    def nearest_index(self, x):
        return int(np.clip(np.rint((x - self.x_min) / self.dx), 0, self.n - 1))

    def compatible_with(self, other):
        return self.n == other.n and np.isclose(self.x_min, other.x_min) and np.isclose(self.x_max, other.x_max)


def make_uniform_grid(x_min, x_max, n):
    """n equally spaced nodes including both ends."""
    return Grid(x_min, x_max, n)


def grid_from_spacing(x_min, x_max, dx):
    if dx <= 0:
        raise ValidationError(f"dx must be positive, got {dx}", {"dx": dx})
    steps = (x_max - x_min) / dx
    n_steps = int(round(steps))
    if n_steps < 2 or abs(steps - n_steps) > 1e-6 * max(1.0, steps):
        raise ValidationError(
            f"[{x_min}, {x_max}] is not a whole number of steps of {dx}",
            {"x_min": x_min, "x_max": x_max, "dx": dx},
        )
    return make_uniform_grid(x_min, x_max, n_steps + 1)


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (self.grid.n,):
            raise GridMismatchError(
                f"field has shape {values.shape}, grid has {self.grid.n} nodes",
                {"shape": values.shape, "n": self.grid.n},
            )
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            i = int(bad[0])
            raise NonFiniteValueError(f"non-finite value at node {i} (x={self.grid.nodes[i]})", node=i)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid, func):
        return cls(grid, sample(grid, func))

    @property
    def nodes(self):
        return self.grid.nodes

    def __len__(self):
        return self.grid.n

    def with_values(self, values):
        return ScalarField(self.grid, values)

    def shifted(self, constant):
        return ScalarField(self.grid, self.values + constant)


FieldLike = Union[ScalarField, Callable, float, int]


def sample(grid, func: FieldLike):
    """Nodal values of a closed form, a constant, or another field on ``grid``."""
    if isinstance(func, ScalarField):
        if func.grid.compatible_with(grid):
            return np.array(func.values)
        return interp_linear(func, grid.nodes)
    if callable(func):
        values = np.asarray(func(grid.nodes), dtype=np.float64)
        return np.broadcast_to(values, grid.nodes.shape).copy()
    return np.full(grid.n, float(func))


def restrict(field, lo, hi):
    """The field on the sub-grid of nodes inside [lo, hi]."""
    idx = np.flatnonzero(field.grid.mask(lo, hi))
    if idx.size < 3:
        raise ValidationError(f"[{lo}, {hi}] holds fewer than 3 nodes", {"lo": lo, "hi": hi})
    sub = Grid(field.grid.nodes[idx[0]], field.grid.nodes[idx[-1]], idx.size)
    return ScalarField(sub, field.values[idx[0]:idx[-1] + 1])


def interp_linear(field, x):
    """Piecewise-linear interpolant of ``field`` at ``x`` (scalar or array).

    Queries outside the grid are rejected; callers clamp explicitly.
    """
    return interp_values(field.grid, field.values, x)


def interp_values(grid, values, x):
    xq = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(xq)):
        raise ValidationError("interpolation query is not finite", {"x": x})
    if np.any(xq < grid.x_min) or np.any(xq > grid.x_max):
        raise ValidationError(
            f"interpolation query outside [{grid.x_min}, {grid.x_max}]",
            {"min": float(np.min(xq)), "max": float(np.max(xq))},
        )
    result = np.interp(xq, grid.nodes, values)
    if xq.ndim == 0:
        return float(result)
    return result


def _cell(value):
    return repr(float(value))


def write_field_csv(field, path):
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(FIELD_HEADER)
        for x, u in zip(field.grid.nodes, field.values):
            writer.writerow([_cell(x), _cell(u)])
    return path


def _parse_number(text, row):
    try:
        return float(text)
    except ValueError:
        raise CSVFormatError(f"row {row}: non-numeric cell {text!r}", row=row) from None


def _grid_for_coordinates(xs, grid=None):
    """Match row coordinates with a declared grid, or infer a uniform one."""
    if grid is None:
        if len(xs) < 3:
            raise CSVFormatError(f"need at least 3 rows, found {len(xs)}", row=len(xs))
        steps = np.diff(xs)
        ref = float(np.median(steps))
        off = np.flatnonzero(np.abs(steps - ref) > 1e-9 * abs(ref))
        if ref <= 0 or off.size:
            row = int(off[0]) + 1 if off.size else 1
            raise CSVFormatError(f"row {row}: coordinate {xs[row]!r} breaks the uniform spacing {ref!r}", row=row)
        grid = Grid(xs[0], xs[-1], len(xs))
    tol = 1e-9 * grid.dx
    limit = min(len(xs), grid.n)
    off = np.flatnonzero(np.abs(np.asarray(xs[:limit]) - grid.nodes[:limit]) > tol)
    if off.size:
        row = int(off[0])
        raise CSVFormatError(f"row {row}: x={xs[row]!r} but the grid node is {grid.nodes[row]!r}", row=row)
    if len(xs) != grid.n:
        raise CSVFormatError(f"row {limit}: expected {grid.n} rows, found {len(xs)}", row=limit)
    return grid


def read_field_csv(path, grid=None):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or [cell.strip() for cell in rows[0]] != FIELD_HEADER:
        raise CSVFormatError(f"{path}: header must be 'x,u'", row=0)
    xs, us = [], []
    for i, row in enumerate(rows[1:]):
        if len(row) != 2:
            raise CSVFormatError(f"row {i}: expected 2 cells, found {len(row)}", row=i)
        xs.append(_parse_number(row[0], i))
        us.append(_parse_number(row[1], i))
    grid = _grid_for_coordinates(xs, grid)
    return ScalarField(grid, us)


def field_csv_round_trip(field, path):
    write_field_csv(field, path)
    return read_field_csv(path, field.grid)


def write_history_csv(path, times, grid, values):
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(HISTORY_HEADER)
        for t, row in zip(times, values):
            tc = _cell(t)
            for x, u in zip(grid.nodes, row):
                writer.writerow([tc, _cell(x), _cell(u)])
    return path


def read_history_csv(path):
    """Returns ``(times, grid, values)`` with ``values`` of shape (slices, n)."""
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or [cell.strip() for cell in rows[0]] != HISTORY_HEADER:
        raise CSVFormatError(f"{path}: header must be 't,x,u'", row=0)
    times, slices = [], []
    xs_first = None
    current_t, xs, us = None, [], []
    for i, row in enumerate(rows[1:]):
        if len(row) != 3:
            raise CSVFormatError(f"row {i}: expected 3 cells, found {len(row)}", row=i)
        t, x, u = (_parse_number(cell, i) for cell in row)
        if current_t is not None and t != current_t:
            if t < current_t:
                raise CSVFormatError(f"row {i}: time {t!r} goes backwards", row=i)
            times.append(current_t)
            slices.append((xs, us))
            xs, us = [], []
        current_t = t
        xs.append(x)
        us.append(u)
    if current_t is None:
        raise CSVFormatError(f"{path}: no data rows", row=0)
    times.append(current_t)
    slices.append((xs, us))
    xs_first = slices[0][0]
    grid = _grid_for_coordinates(xs_first)
    for xs, _ in slices[1:]:
        _grid_for_coordinates(xs, grid)
    values = np.array([us for _, us in slices], dtype=np.float64)
    return np.array(times), grid, values


def sidecar_path(path):
    return Path(path).with_suffix(".meta")


def write_sidecar(path, block: ReportBlock):
    target = sidecar_path(path)
    target.write_text(block.render())
    return target


def read_sidecar(path):
    return parse_block(sidecar_path(path).read_text())


def write_plot_data(path, columns):
    """Whitespace-separated columns for gnuplot, one ``# name ...`` header line."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[name], dtype=np.float64) for name in names])
    np.savetxt(path, data, fmt="%.17g", header=" ".join(names))
    return Path(path)
