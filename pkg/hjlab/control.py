"""
Deterministic optimal control with speed-limited 1D motion X' = alpha,
|alpha| <= a(X), cost J = int_0^t l(X(s)) ds + u0(X(t)).
"""
import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cauchy import CauchyProblem, Scheme, solve
from .exceptions import ControlBoundError, CSVFormatError, TrustRegionError, ValidationError
from .fields import Grid, ScalarField, interp_values, sample
from .hamiltonian import HamiltonianSpec

logger = logging.getLogger(__name__)

QUADRATURE_STEP = 1e-3
SPEED_SLACK = 1e-9
TIE_SLACK = 1e-12


def _pointwise(func):
    """Evaluate a field (by interpolation), a closed form or a constant at x."""
    if isinstance(func, ScalarField):
        return lambda x: interp_values(func.grid, func.values, x)
    if callable(func):
        return lambda x: np.broadcast_to(np.asarray(func(x), dtype=np.float64), np.shape(x)) * 1.0
    value = float(func)
    return lambda x: np.full(np.shape(x), value) if np.ndim(x) else value


@dataclass(frozen=True, eq=False)
class ControlProblem:
    speed: object
    running_cost: object
    terminal_cost: object
    horizon: float

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValidationError(f"horizon must be positive, got {self.horizon}", {"horizon": self.horizon})

    def a(self, x):
        return _pointwise(self.speed)(x)

    def l(self, x):
        return _pointwise(self.running_cost)(x)

    def u0(self, x):
        return _pointwise(self.terminal_cost)(x)


@dataclass(frozen=True)
class PiecewiseControl:
    """Constant value ``values[k]`` on [breakpoints[k], breakpoints[k+1])."""

    breakpoints: tuple
    values: tuple

    def __post_init__(self):
        times = np.asarray(self.breakpoints, dtype=np.float64)
        if len(self.values) != times.size - 1 or times.size < 2:
            raise ValidationError("a control needs one value per piece", {"pieces": len(self.values)})
        if np.any(np.diff(times) <= 0):
            raise ValidationError("control breakpoints must be increasing")
        object.__setattr__(self, "breakpoints", tuple(float(t) for t in times))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @classmethod
    def constant(cls, value, horizon):
        return cls((0.0, horizon), (value,))

    @classmethod
    def reach_wait_leave(cls, x, horizon, tau, speed=1.0):
        """Reach 0 at full speed, wait ``tau``, then run toward -inf at full speed."""
        pieces = [(abs(x) / speed, -math.copysign(speed, x)), (tau, 0.0), (math.inf, -speed)]
        breakpoints, values, t = [0.0], [], 0.0
        for length, value in pieces:
            end = min(horizon, t + length)
            if end > t:
                breakpoints.append(end)
                values.append(value)
                t = end
            if t >= horizon:
                break
        return cls(tuple(breakpoints), tuple(values))


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    positions: np.ndarray
    controls: np.ndarray
    cost: float

    def to_csv(self, path):
        path = Path(path)
        alphas = np.append(self.controls, self.controls[-1])
        with open(path, "w", newline="") as f:
            f.write(f"# cost: {float(self.cost)!r}\n")
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["s", "X", "alpha"])
            for s, x, alpha in zip(self.times, self.positions, alphas):
                writer.writerow([repr(float(s)), repr(float(x)), repr(float(alpha))])
        return path

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as f:
            lines = f.read().splitlines()
        if not lines or not lines[0].startswith("# cost:"):
            raise CSVFormatError(f"{path}: missing '# cost:' line", row=0)
        cost = float(lines[0].split(":", 1)[1])
        rows = list(csv.reader(lines[1:]))
        if not rows or rows[0] != ["s", "X", "alpha"]:
            raise CSVFormatError(f"{path}: header must be 's,X,alpha'", row=0)
        try:
            data = np.array([[float(cell) for cell in row] for row in rows[1:]])
        except ValueError as e:
            raise CSVFormatError(f"{path}: {e}") from None
        return cls(data[:, 0], data[:, 1], data[:-1, 2], cost)


def evaluate_cost(problem, control, x):
    """Exact piecewise-linear motion and trapezoid quadrature of the running cost."""
    breakpoints = np.asarray(control.breakpoints)
    if abs(breakpoints[0]) > 1e-12 or abs(breakpoints[-1] - problem.horizon) > 1e-9 * max(1.0, problem.horizon):
        raise ValidationError(
            f"control covers [{breakpoints[0]}, {breakpoints[-1]}], horizon is {problem.horizon}",
            {"horizon": problem.horizon},
        )
    positions = [float(x)]
    running = 0.0
    for k, alpha in enumerate(control.values):
        start, end = breakpoints[k], breakpoints[k + 1]
        X = positions[-1]
        limit = float(problem.a(X))
        if abs(alpha) > limit * (1 + SPEED_SLACK) + SPEED_SLACK:
            raise ControlBoundError(f"piece {k}: |alpha|={abs(alpha)} exceeds a={limit} at X={X}", piece=k)
        length = end - start
        n_sub = max(1, int(math.ceil(length / QUADRATURE_STEP - 1e-9)))
        s = np.linspace(0.0, length, n_sub + 1)
        path = X + alpha * s
        running += float(np.trapz(problem.l(path), s))
        positions.append(X + alpha * length)
    cost = running + float(problem.u0(positions[-1]))
    return Trajectory(breakpoints, np.array(positions), np.asarray(control.values), cost)


@dataclass(frozen=True, eq=False)
class ValueFunction:
    problem: ControlProblem
    history: object

    @property
    def grid(self):
        return self.history.grid

    def at(self, x, t=None):
        k = len(self.history) - 1 if t is None else self.history.index_at(t)
        return interp_values(self.grid, self.history.original(k), x)


def value_function_dp(problem, grid: Grid, dt=None, cfl=0.9):
    """V(., t) by the dynamic programming step on every time step.

    This is the semi-Lagrangian recursion of :mod:`hjlab.cauchy`, so every
    step is stored and can be walked by :func:`synthesize_trajectory`.
    """
    H = HamiltonianSpec.eikonal(_pointwise(problem.speed), window=(grid.x_min, grid.x_max), samples=grid.n)
    cauchy_problem = CauchyProblem(
        H=H,
        l=ScalarField(grid, sample(grid, problem.running_cost)),
        u0=ScalarField(grid, sample(grid, problem.terminal_cost)),
        T=problem.horizon,
        scheme=Scheme.SEMI_LAGRANGIAN,
        cfl=cfl,
        snapshot_count=None,
        dt=dt,
    )
    return ValueFunction(problem, solve(cauchy_problem))


def _pick(candidates, values):
    """Index of the minimum; ties toward smaller |y|, then leftward."""
    best = float(np.min(values))
    tie = np.flatnonzero(values <= best + TIE_SLACK * (1.0 + abs(best)))
    order = np.lexsort((candidates[tie], np.abs(candidates[tie])))
    return int(tie[order[0]])


def _reachable(grid, y, reach):
    lo, hi = max(grid.x_min, y - reach), min(grid.x_max, y + reach)
    inside = grid.nodes[(grid.nodes > lo) & (grid.nodes < hi)]
    return np.unique(np.concatenate([[lo, y, hi], inside]))


def synthesize_trajectory(value, x):
    """Greedy walk down the stored DP slices from (x, horizon)."""
    history = value.history
    grid = history.grid
    steps = len(history) - 1
    dt = history.dt
    half = 0.5 * dt * sample(grid, value.problem.running_cost)
    y = float(x)
    path = [y]
    for n in range(steps, 0, -1):
        lo, hi = history.trust_interval(n)
        if history.trust_radius[n] < 0 or not lo - 1e-12 <= y <= hi + 1e-12:
            raise TrustRegionError(f"trajectory leaves the certified interval at X={y}, t={history.times[n]}")
        reach = float(value.problem.a(y)) * dt
        candidates = _reachable(grid, y, reach)
        values = interp_values(grid, history.values[n - 1] + half, candidates)
        y = float(candidates[_pick(candidates, values)])
        path.append(y)
    path = np.array(path)
    times = history.times
    controls = np.diff(path) / np.diff(times)
    trajectory = evaluate_cost(value.problem, PiecewiseControl(tuple(times), tuple(controls)), x)
    logger.info(f"synthesized trajectory from x={x}: cost {trajectory.cost:.6g}, end at {path[-1]:.6g}")
    return trajectory

