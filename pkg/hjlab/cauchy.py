"""
Explicit monotone time stepping for u_t + H(x, Du) = l(x) on a truncated grid.

Three schemes share one marching loop: Godunov and Lax-Friedrichs finite
differences, and a semi-Lagrangian dynamic-programming step for Eikonal
Hamiltonians. The certified sub-interval shrinks with the largest propagation
speed; values outside it carry truncation-boundary error.
"""
import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .exceptions import (
    CFLViolationError,
    GridMismatchError,
    NonFiniteValueError,
    TrustIntervalEmptyError,
    ValidationError,
)
from .fields import (
    Grid,
    ScalarField,
    interp_linear,
    interp_values,
    read_history_csv,
    read_sidecar,
    sample,
    write_history_csv,
    write_sidecar,
)
from .hamiltonian import AuditBox, Flux, eval_H, lf_dissipation, numerical_H
from .reports import ReportBlock

logger = logging.getLogger(__name__)

DEFAULT_SNAPSHOTS = 200


class Scheme(str, enum.Enum):
    GODUNOV = "godunov"
    LAX_FRIEDRICHS = "lax_friedrichs"
    SEMI_LAGRANGIAN = "semi_lagrangian"


class BoundaryPolicy(str, enum.Enum):
    ONE_SIDED_UPWIND = "one_sided_upwind"
    FROZEN_EXTENSION = "frozen_extension"


@dataclass(frozen=True, eq=False)
class CauchyProblem:
    H: object
    l: ScalarField
    u0: ScalarField
    T: float
    scheme: Scheme = Scheme.GODUNOV
    cfl: float = 0.9
    boundary: BoundaryPolicy = BoundaryPolicy.ONE_SIDED_UPWIND
    snapshot_count: Optional[int] = DEFAULT_SNAPSHOTS
    snapshot_stride: Optional[int] = None
    normalize: bool = False
    dt: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "boundary", BoundaryPolicy(self.boundary))
        if not self.l.grid.compatible_with(self.u0.grid):
            raise GridMismatchError("running cost and initial data live on different grids")
        if not self.T > 0:
            raise ValidationError(f"horizon T must be positive, got {self.T}", {"T": self.T})
        if not 0 < self.cfl <= 1:
            raise ValidationError(f"cfl must lie in (0, 1], got {self.cfl}", {"cfl": self.cfl})
        if self.scheme in (Scheme.SEMI_LAGRANGIAN, Scheme.GODUNOV) and not self.H.is_eikonal:
            raise ValidationError(f"the {self.scheme.value} scheme needs an Eikonal Hamiltonian")
        if self.snapshot_stride is not None and self.snapshot_stride < 1:
            raise ValidationError("snapshot_stride must be at least 1", {"snapshot_stride": self.snapshot_stride})

    @property
    def grid(self):
        return self.u0.grid


@dataclass(frozen=True, eq=False)
class SnapshotHistory:
    grid: Grid
    times: np.ndarray
    values: np.ndarray
    trust_radius: np.ndarray
    center: float
    shift: float = 0.0
    dt: float = 0.0
    speed_max: float = 0.0
    scheme: str = ""
    report_from: float = 0.0

    def __post_init__(self):
        times = np.array(self.times, dtype=np.float64)
        values = np.array(self.values, dtype=np.float64)
        radius = np.array(self.trust_radius, dtype=np.float64)
        if values.shape != (times.size, self.grid.n) or radius.shape != times.shape:
            raise GridMismatchError(
                "history arrays disagree in shape",
                {"times": times.shape, "values": values.shape, "trust_radius": radius.shape},
            )
        if np.any(np.diff(times) <= 0):
            raise ValidationError("history times must be increasing")
        if np.any(np.diff(radius) > 1e-12):
            raise ValidationError("trust radius must be nonincreasing in time")
        for array in (times, values, radius):
            array.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "trust_radius", radius)

    def __len__(self):
        return self.times.size

    def original(self, k):
        """Slice k as a solution of the equation as posed (before normalization)."""
        return self.values[k] + self.shift * self.times[k]

    def trust_interval(self, k):
        r = self.trust_radius[k]
        return self.center - r, self.center + r

    def trust_mask(self, k):
        if self.trust_radius[k] < 0:
            return np.zeros(self.grid.n, dtype=bool)
        lo, hi = self.trust_interval(k)
        return self.grid.mask(lo, hi)

    def window_trusted(self, lo, hi, k):
        t_lo, t_hi = self.trust_interval(k)
        return self.trust_radius[k] >= 0 and t_lo <= lo + 1e-12 and hi <= t_hi + 1e-12

    def index_at(self, t):
        return int(np.argmin(np.abs(self.times - t)))

    def with_values(self, values, **changes):
        return replace(self, values=values, **changes)

    def restrict(self, lo, hi):
        """The same history on the nodes inside [lo, hi]; certification is unchanged."""
        idx = np.flatnonzero(self.grid.mask(lo, hi))
        if idx.size < 3:
            raise ValidationError(f"[{lo}, {hi}] holds fewer than 3 nodes", {"lo": lo, "hi": hi})
        sub = Grid(self.grid.nodes[idx[0]], self.grid.nodes[idx[-1]], idx.size)
        return replace(self, grid=sub, values=self.values[:, idx[0]:idx[-1] + 1])

    def metadata(self):
        block = ReportBlock("history")
        block.add("center", self.center)
        block.add("shift", self.shift)
        block.add("dt", self.dt)
        block.add("speed_max", self.speed_max)
        block.add("scheme", self.scheme)
        block.add("report_from", self.report_from)
        block.add("trust_radius", " ".join(repr(float(r)) for r in self.trust_radius))
        return block

    def to_csv(self, path):
        write_history_csv(path, self.times, self.grid, self.values)
        write_sidecar(path, self.metadata())
        return path

    @classmethod
    def from_csv(cls, path):
        times, grid, values = read_history_csv(path)
        meta = read_sidecar(path).items
        return cls(
            grid=grid,
            times=times,
            values=values,
            trust_radius=[float(r) for r in meta["trust_radius"].split()],
            center=float(meta["center"]),
            shift=float(meta["shift"]),
            dt=float(meta["dt"]),
            speed_max=float(meta["speed_max"]),
            scheme=meta["scheme"],
            report_from=float(meta["report_from"]),
        )


def normalize_cost(l):
    """Shift the running cost so that its minimum is exactly 0."""
    shift = float(np.min(l.values))
    return l.with_values(l.values - shift), shift


def dissipation(problem):
    """Largest propagation speed: sup a for Eikonal H, else an LF theta."""
    grid = problem.grid
    if problem.H.is_eikonal:
        return float(np.max(problem.H.speed(grid.nodes)))
    slopes = np.abs(np.diff(problem.u0.values)) / grid.dx
    p_max = max(1.0, 2.0 * float(np.max(slopes)))
    return lf_dissipation(problem.H, AuditBox((grid.x_min, grid.x_max), (-p_max, p_max), 41, 201))


def step_plan(T, dt):
    """Uniform step T/steps with steps = ceil(T/dt)."""
    steps = max(1, int(math.ceil(T / dt - 1e-9)))
    return steps, T / steps


def stride_for(steps, snapshot_count=DEFAULT_SNAPSHOTS, snapshot_stride=None):
    if snapshot_stride is not None:
        return int(snapshot_stride)
    if snapshot_count is None:
        return 1
    return max(1, steps // int(snapshot_count))


def trust_radius_at(grid, speed_max, t):
    return grid.half_width - speed_max * t - 2.0 * grid.dx


def check_trust(grid, speed_max, T):
    if trust_radius_at(grid, speed_max, T) < 0:
        vanish = (grid.half_width - 2.0 * grid.dx) / speed_max
        raise TrustIntervalEmptyError(
            f"certified interval vanishes at t={vanish:.6g}, before T={T}", vanish_time=vanish
        )


def semi_lagrangian_update(values, grid, reach, running, dt):
    """min over |y - x_i| <= reach_i of the interpolant, plus the running cost of the step.

    The cost uses the trapezoid rule dt * (l(x_i) + l(y)) / 2, so half of it is
    folded into the minimized values. The interval is clamped to the grid; the
    minimum of a piecewise-linear function is attained at an endpoint or at a
    node inside the interval.
    """
    half = 0.5 * dt * running
    values = values + half
    x = grid.nodes
    lo = np.maximum(x - reach, grid.x_min)
    hi = np.minimum(x + reach, grid.x_max)
    best = np.minimum(interp_values(grid, values, lo), interp_values(grid, values, hi))
    best = np.minimum(best, values)
    span = int(math.ceil(float(np.max(reach)) / grid.dx + 1e-9))
    slack = 1e-12 * grid.dx
    for j in range(1, min(span, grid.n - 1) + 1):
        right = x[j:] <= hi[:-j] + slack
        best[:-j] = np.where(right, np.minimum(best[:-j], values[j:]), best[:-j])
        left = x[:-j] >= lo[j:] - slack
        best[j:] = np.where(left, np.minimum(best[j:], values[:-j]), best[j:])
    return best + half


def _fd_update(values, grid, H, running, dt, theta, flux):
    slopes = np.diff(values) / grid.dx
    p_minus = np.empty_like(values)
    p_plus = np.empty_like(values)
    p_minus[1:] = slopes
    p_plus[:-1] = slopes
    p_minus[0] = slopes[0]
    p_plus[-1] = slopes[-1]
    return values - dt * (numerical_H(H, grid.nodes, p_minus, p_plus, theta, flux) - running)


def march(u0, update, steps, dt, stride, freeze=None):
    """Apply ``update`` ``steps`` times; keep t=0, every ``stride``-th step and T."""
    u = np.array(u0, dtype=np.float64)
    times, slices = [0.0], [u.copy()]
    for step in range(1, steps + 1):
        t = step * dt
        u = update(u)
        if freeze is not None:
            freeze(u, t)
        bad = np.flatnonzero(~np.isfinite(u))
        if bad.size:
            raise NonFiniteValueError(
                f"non-finite value at node {int(bad[0])}, t={t:.6g}", node=int(bad[0]), time=t
            )
        if step % stride == 0 or step == steps:
            times.append(t)
            slices.append(u.copy())
    return np.array(times), np.array(slices)


def solve(problem):
    grid = problem.grid
    l_values = np.array(problem.l.values)
    shift = 0.0
    if problem.normalize:
        normalized, shift = normalize_cost(problem.l)
        l_values = np.array(normalized.values)

    speed_max = dissipation(problem)
    dt_bound = grid.dx / speed_max
    if problem.dt is not None:
        if problem.dt > dt_bound * (1 + 1e-12):
            raise CFLViolationError(f"dt={problem.dt} exceeds the stability bound {dt_bound}")
        dt_target = problem.dt
    else:
        dt_target = problem.cfl * dt_bound
    steps, dt = step_plan(problem.T, dt_target)
    check_trust(grid, speed_max, problem.T)
    stride = stride_for(steps, problem.snapshot_count, problem.snapshot_stride)
    logger.info(
        f"solve: scheme={problem.scheme.value} n={grid.n} dt={dt:.6g} steps={steps} stride={stride}"
    )

    if problem.scheme == Scheme.SEMI_LAGRANGIAN:
        reach = problem.H.speed(grid.nodes) * dt

        def update(u):
            return semi_lagrangian_update(u, grid, reach, l_values, dt)

    else:
        flux = Flux.GODUNOV if problem.scheme == Scheme.GODUNOV else Flux.LAX_FRIEDRICHS

        def update(u):
            return _fd_update(u, grid, problem.H, l_values, dt, speed_max, flux)

    freeze = None
    if problem.boundary == BoundaryPolicy.FROZEN_EXTENSION:
        freeze = _frozen_extension(problem, l_values)

    times, values = march(problem.u0.values, update, steps, dt, stride, freeze)
    times[-1] = problem.T
    return SnapshotHistory(
        grid=grid,
        times=times,
        values=values,
        trust_radius=trust_radius_at(grid, speed_max, times),
        center=grid.center,
        shift=shift,
        dt=dt,
        speed_max=speed_max,
        scheme=problem.scheme.value,
    )


def _frozen_extension(problem, l_values):
    grid, u0 = problem.grid, problem.u0.values
    ends = np.array([0, grid.n - 1])
    slopes = np.array([u0[1] - u0[0], u0[-1] - u0[-2]]) / grid.dx
    rate = l_values[ends] - eval_H(problem.H, grid.nodes[ends], slopes)

    def freeze(u, t):
        u[ends] = u0[ends] + t * rate

    return freeze


def build_supersolution(u0, l, c, nu):
    """Radial supersolution v+ = f0(|x|) + int_0^|x| f1 above u0.

    f0 is the nondecreasing radial majorant of u0; f1 vanishes at 0 and is
    twice the radial majorant of (l + c)/nu elsewhere, so each trapezoid
    increment is at least that majorant times the radial step.
    """
    if c < 0:
        raise ValidationError(f"c must be nonnegative, got {c}", {"c": c})
    grid = u0.grid
    nu_values = sample(grid, nu)
    if np.any(nu_values <= 0):
        raise ValidationError("nu must be positive on the grid")
    g = (sample(grid, l) + c) / nu_values

    radius = np.abs(grid.nodes)
    keys, inverse = np.unique(np.round(radius / grid.dx, 6), return_inverse=True)
    radii = keys * grid.dx
    f0 = np.full(keys.size, -np.inf)
    np.maximum.at(f0, inverse, u0.values)
    f0 = np.maximum.accumulate(f0)
    g_max = np.full(keys.size, -np.inf)
    np.maximum.at(g_max, inverse, g)
    f1 = 2.0 * np.maximum.accumulate(g_max)

    if radii[0] > 0:
        radii = np.concatenate([[0.0], radii])
        f1 = np.concatenate([[0.0], f1])
        offset = 1
    else:
        f1[0] = 0.0
        offset = 0
    increments = np.diff(radii) * 0.5 * (f1[1:] + f1[:-1])
    integral = np.concatenate([[0.0], np.cumsum(increments)])
    return ScalarField(grid, f0[inverse] + integral[inverse + offset])


@dataclass
class SliceSandwich:
    t: float
    passed: bool
    lower_margin: float
    upper_margin: float
    witness_x: Optional[float]


@dataclass
class SandwichReport:
    c: float
    tol: float
    slices: List[SliceSandwich] = field(default_factory=list)

    @property
    def passed(self):
        return all(s.passed for s in self.slices)

    @property
    def failures(self):
        return [s for s in self.slices if not s.passed]

    def as_block(self, title="sandwich"):
        block = ReportBlock(title)
        block.add("verdict", self.passed)
        block.add("c", self.c)
        block.add("tol", self.tol)
        block.add("slices", len(self.slices))
        block.add("worst_lower_margin", min(s.lower_margin for s in self.slices))
        block.add("worst_upper_margin", min(s.upper_margin for s in self.slices))
        failures = self.failures
        block.add("first_failure", (failures[0].t, failures[0].witness_x) if failures else None)
        return block


def sandwich_check(history, v_minus, v_plus, c, tol=None):
    """Check v- <= u + c t <= v+ on the certified interval of every slice."""
    tol = history.grid.dx if tol is None else tol
    report = SandwichReport(c=c, tol=tol)
    nodes = history.grid.nodes
    for k, t in enumerate(history.times):
        mask = history.trust_mask(k)
        if not mask.any():
            continue
        xs = nodes[mask]
        w = history.original(k)[mask] + c * t
        lower = w - interp_linear(v_minus, xs)
        upper = interp_linear(v_plus, xs) - w
        worst = np.minimum(lower, upper)
        i = int(np.argmin(worst))
        report.slices.append(
            SliceSandwich(
                t=float(t),
                passed=bool(worst[i] >= -tol),
                lower_margin=float(lower.min()),
                upper_margin=float(upper.min()),
                witness_x=float(xs[i]),
            )
        )
    return report
