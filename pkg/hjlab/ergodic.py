"""
Solutions (c, v) of the ergodic problem H(x, Dv) = l(x) + c.

Two constructions are provided for Eikonal Hamiltonians: the limit of
Dirichlet problems on growing balls (any c >= 0) and the maximal nonnegative
subsolution vanishing on the Aubry set argmin l (c = 0). Both are computed by
fast sweeping. Long-time limits of evolution runs give a third provenance.
"""
import enum
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .analysis import residual_stationary
from .exceptions import (
    ConvergenceError,
    GridMismatchError,
    PreconditionError,
    TrustRegionError,
    ValidationError,
)
from .fields import (
    ScalarField,
    grid_from_spacing,
    interp_linear,
    read_field_csv,
    read_sidecar,
    restrict,
    sample,
    write_field_csv,
    write_sidecar,
)
from .reports import CheckReport, ReportBlock

logger = logging.getLogger(__name__)

SWEEP_TOL = 1e-12
MAX_SWEEPS = 10 ** 6


class Provenance(str, enum.Enum):
    DIRICHLET_LIMIT = "dirichlet_limit"
    PERRON_MIN = "perron_min"
    LONG_TIME_LIMIT = "long_time_limit"


class Normalization(str, enum.Enum):
    ZERO_AT_ORIGIN = "zero_at_origin"
    ZERO_ON_AUBRY = "zero_on_aubry"
    NONE = "none"


@dataclass(frozen=True, eq=False)
class AubrySet:
    grid: object
    indices: np.ndarray
    components: List[Tuple[int, int]]
    tolerance: float
    eps_A: Optional[float]
    R_A: float
    degenerate: bool = False

    @property
    def points(self):
        return self.grid.nodes[self.indices]

    @property
    def mask(self):
        mask = np.zeros(self.grid.n, dtype=bool)
        mask[self.indices] = True
        return mask

    def as_block(self, title="aubry"):
        block = ReportBlock(title)
        block.add("tolerance", self.tolerance)
        block.add("nodes", int(self.indices.size))
        block.add("components", [(float(self.grid.nodes[a]), float(self.grid.nodes[b])) for a, b in self.components])
        block.add("eps_A", self.eps_A)
        block.add("R_A", self.R_A)
        block.add("degenerate", self.degenerate)
        return block


def _components(indices):
    if indices.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(indices) > 1)
    starts = np.concatenate([[indices[0]], indices[breaks + 1]])
    ends = np.concatenate([indices[breaks], [indices[-1]]])
    return [(int(a), int(b)) for a, b in zip(starts, ends)]


def _kink_minimum(values, dx, i):
    """Lowest value of the V-shaped reconstruction around local minimum i, with its error bound.

    The branches are the secant lines through i-2, i-1 and i+1, i+2, so a zero
    of l strictly between i-1 and i+1 is seen by neither line. The bound
    comes from the second differences just outside those pairs.
    """
    left = (values[i - 1] - values[i - 2]) / dx
    right = (values[i + 2] - values[i + 1]) / dx
    if not left < 0 < right:
        return float(values[i]), 0.0
    # lines through (-1, values[i-1]) and (1, values[i+1]) in cell units from i
    s = (values[i - 1] - values[i + 1] + dx * (left + right)) / (dx * (right - left))
    s = min(1.0, max(-1.0, s))
    bottom = values[i - 1] + left * dx * (s + 1.0)
    curvature = max(
        abs(values[i - 3] - 2.0 * values[i - 2] + values[i - 1]),
        abs(values[i + 1] - 2.0 * values[i + 2] + values[i + 3]),
    )
    return min(float(values[i]), float(bottom)), 4.0 * float(curvature)


def extract_aubry(l, tol=None):
    """Nodes where l is within ``tol`` of its minimum.

    A discrete local minimum is admitted as well when the kink reconstruction
    between its neighbours reaches the minimum, which catches zeros of l that
    fall between nodes.
    """
    values = l.values
    grid = l.grid
    tol = 1e-9 * (1.0 + float(np.max(values))) if tol is None else tol
    l_min = float(np.min(values))
    member = values <= l_min + tol

    interior = np.arange(3, grid.n - 3)
    local_min = (values[interior] <= values[interior - 1]) & (values[interior] <= values[interior + 1])
    for i in interior[local_min & ~member[interior]]:
        bottom, slack = _kink_minimum(values, grid.dx, i)
        if bottom <= l_min + tol + slack:
            member[i] = True

    indices = np.flatnonzero(member)
    lo = grid.nodes[indices[0]] - grid.dx
    hi = grid.nodes[indices[-1]] + grid.dx
    R_A = float(max(abs(lo), abs(hi)))
    outside = (grid.nodes < lo - 1e-9 * grid.dx) | (grid.nodes > hi + 1e-9 * grid.dx)
    eps_A = float(np.min(values[outside]) - l_min) if outside.any() else None
    degenerate = eps_A is None or eps_A <= tol
    if degenerate:
        eps_A = None
    aubry = AubrySet(grid, indices, _components(indices), tol, eps_A, R_A, degenerate)
    logger.debug(f"aubry set: {indices.size} nodes in {len(aubry.components)} components")
    return aubry


@dataclass(frozen=True, eq=False)
class ErgodicSolution:
    c: float
    v: ScalarField
    provenance: Provenance
    normalization: Normalization
    residual: Dict[str, float] = field(default_factory=dict)

    @property
    def grid(self):
        return self.v.grid

    def metadata(self):
        block = ReportBlock("ergodic_solution")
        block.add("c", self.c)
        block.add("provenance", self.provenance.value)
        block.add("normalization", self.normalization.value)
        for key, value in self.residual.items():
            block.add(f"residual.{key}", value)
        return block

    def to_csv(self, path):
        write_field_csv(self.v, path)
        write_sidecar(path, self.metadata())
        return path

    @classmethod
    def from_csv(cls, path):
        v = read_field_csv(path)
        meta = read_sidecar(path).items
        residual = {
            key.split(".", 1)[1]: float(value)
            for key, value in meta.items()
            if key.startswith("residual.") and value != "none"
        }
        return cls(
            c=float(meta["c"]),
            v=v,
            provenance=Provenance(meta["provenance"]),
            normalization=Normalization(meta["normalization"]),
            residual=residual,
        )


def _require_eikonal(H):
    if not H.is_eikonal:
        raise ValidationError("stationary sweeping is only available for Eikonal Hamiltonians")


def fast_sweep(weights, pinned):
    """Gauss-Seidel sweeps of v_i <- min(v_{i-1}, v_{i+1}) + w_i.

    Nodes flagged in ``pinned`` stay at 0, the rest start at +inf; boundary
    nodes that are not pinned use their single neighbour. Sweeps alternate
    direction until the sup change drops below 1e-12.
    """
    n = weights.size
    v = np.full(n, np.inf)
    v[pinned] = 0.0
    free = np.flatnonzero(~pinned)
    orders = (free, free[::-1])
    for sweep in range(MAX_SWEEPS):
        change = 0.0
        for i in orders[sweep % 2]:
            left = v[i - 1] if i > 0 else np.inf
            right = v[i + 1] if i < n - 1 else np.inf
            new = min(left, right) + weights[i]
            old = v[i]
            if new != old:
                change = np.inf if not np.isfinite(old) else max(change, abs(new - old))
                v[i] = new
        if change < SWEEP_TOL and sweep > 0:
            logger.debug(f"fast sweeping converged after {sweep + 1} sweeps")
            return v
    raise ConvergenceError(f"fast sweeping did not settle in {MAX_SWEEPS} sweeps", residual=change)


def solve_dirichlet(H, l, c, R, dx):
    """V_R on [-R, R] with V_R = 0 at +-R, the maximal subsolution below the Perron value."""
    _require_eikonal(H)
    if c < 0:
        raise ValidationError(f"c must be nonnegative, got {c}", {"c": c})
    grid = grid_from_spacing(-R, R, dx)
    rhs = sample(grid, l) + c
    if np.any(rhs < 0):
        raise ValidationError("l + c must be nonnegative on the ball", {"min": float(rhs.min())})
    pinned = np.zeros(grid.n, dtype=bool)
    pinned[[0, -1]] = True
    weights = grid.dx * rhs / H.speed(grid.nodes)
    return ScalarField(grid, fast_sweep(weights, pinned))


@dataclass
class DirichletLimit:
    solution: ErgodicSolution
    radii: List[float]
    window: Tuple[float, float]
    differences: List[float]
    stabilized: bool

    def as_block(self, title="dirichlet_limit"):
        block = ReportBlock(title)
        block.add("c", self.solution.c)
        block.add("radii", tuple(self.radii))
        block.add("window", self.window)
        block.add("differences", tuple(self.differences))
        block.add("stabilized", self.stabilized)
        return block


def dirichlet_limit(H, l, c, R_sequence: Sequence[float], dx, window=None):
    radii = [float(R) for R in R_sequence]
    if len(radii) < 2 or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValidationError("R_sequence must hold at least two increasing radii", {"radii": radii})
    if window is None:
        window = (-0.5 * radii[0], 0.5 * radii[0])
    lo, hi = window
    if lo < -radii[0] or hi > radii[0]:
        raise ValidationError(f"window {window} does not fit in the smallest ball", {"window": window})

    profiles = []
    for R in radii:
        V = solve_dirichlet(H, l, c, R, dx)
        profiles.append(V.shifted(-interp_linear(V, 0.0)))
    xs = profiles[0].grid.nodes[profiles[0].grid.mask(lo, hi)]
    differences = [
        float(np.max(np.abs(interp_linear(b, xs) - interp_linear(a, xs))))
        for a, b in zip(profiles, profiles[1:])
    ]
    stabilized = all(b <= a + 1e-9 for a, b in zip(differences, differences[1:]))
    if not stabilized:
        logger.warning(f"dirichlet limit for c={c} is not stabilizing: {differences}")
    solution = ErgodicSolution(c, profiles[-1], Provenance.DIRICHLET_LIMIT, Normalization.ZERO_AT_ORIGIN)
    return DirichletLimit(solution, radii, (lo, hi), differences, stabilized)


def solve_perron_min(H, l, aubry, dx=None):
    """Largest subsolution with v >= 0 everywhere and v = 0 on the Aubry set (c = 0)."""
    _require_eikonal(H)
    grid = l.grid
    pinned = aubry.mask
    if dx is not None and not np.isclose(dx, grid.dx):
        grid = grid_from_spacing(grid.x_min, grid.x_max, dx)
        pinned = np.zeros(grid.n, dtype=bool)
        pinned[[grid.nearest_index(x) for x in aubry.points]] = True
    elif not aubry.grid.compatible_with(grid):
        raise GridMismatchError("Aubry set and running cost live on different grids")
    if not pinned.any():
        raise PreconditionError("the Aubry set is empty")
    l_values = sample(grid, l)
    weights = grid.dx * (l_values - float(np.min(l_values))) / H.speed(grid.nodes)
    v = fast_sweep(weights, pinned)
    return ErgodicSolution(0.0, ScalarField(grid, v), Provenance.PERRON_MIN, Normalization.ZERO_ON_AUBRY)


def long_time_limit(history, c=0.0):
    """u(., T) + c T on the certified interval of the last slice."""
    k = len(history) - 1
    lo, hi = history.trust_interval(k)
    values = history.original(k) + c * history.times[k]
    v = restrict(ScalarField(history.grid, values), lo, hi)
    return ErgodicSolution(c, v, Provenance.LONG_TIME_LIMIT, Normalization.NONE)


def estimate_ergodic_constant(history, window, t_lo):
    """Negated least-squares slope of the window mean of u over stored t >= t_lo."""
    lo, hi = window
    ks = np.flatnonzero(history.times >= t_lo - 1e-12)
    if ks.size < 3:
        raise ValidationError(f"need at least 3 stored slices after t={t_lo}, found {ks.size}")
    mask = history.grid.mask(lo, hi)
    for k in ks:
        if not history.window_trusted(lo, hi, k):
            raise TrustRegionError(f"window [{lo}, {hi}] is not certified at t={history.times[k]}")
    means = np.array([np.mean(history.original(k)[mask]) for k in ks])
    slope = np.polyfit(history.times[ks], means, 1)[0]
    return -float(slope)


def certify(sol, H, l, exclude=()):
    report = residual_stationary(sol.v, H, l, sol.c, exclude=exclude)
    residual = {"sup": report.sup, "l1": report.l1}
    if report.sup_excluding is not None:
        residual["sup_excluding"] = report.sup_excluding
    return replace(sol, residual=residual)


def growth_diagnostics(sol, aubry, m_inv, radii=(1.0, 2.0, 3.0), l_min=0.0):
    """Growth to +inf off the Aubry set (c = 0) or the unbounded-below ladder (c > 0)."""
    v = sol.v
    grid = v.grid
    slack = grid.dx
    if abs(sol.c) <= 1e-12:
        if aubry.degenerate:
            return CheckReport("growth", True, 0.0, details={"mode": "bounded_below"}, skipped=True)
        rate = float(m_inv(aubry.eps_A))
        far = np.abs(grid.nodes) > aubry.R_A + 1e-9 * grid.dx
        if not far.any():
            return CheckReport("growth", True, 0.0, details={"mode": "bounded_below"}, skipped=True)
        xs = grid.nodes[far]
        margin = v.values[far] - rate * (np.abs(xs) - aubry.R_A) + slack
        i = int(np.argmin(margin))
        return CheckReport(
            "growth",
            bool(margin[i] >= 0),
            float(margin[i]),
            {"x": float(xs[i])},
            {"mode": "bounded_below", "rate": rate, "R_A": aubry.R_A},
        )
    if sol.c < 0:
        return CheckReport("growth", True, 0.0, details={"mode": "none"}, skipped=True)

    rate = float(m_inv(l_min + sol.c))
    v0 = interp_linear(v, 0.0)
    worst, witness, used = np.inf, {}, []
    for R in radii:
        if R > min(-grid.x_min, grid.x_max) + 1e-12:
            continue
        ball = grid.mask(-R, R)
        margin = v0 - rate * R + slack - float(np.min(v.values[ball]))
        used.append(float(R))
        if margin < worst:
            worst, witness = float(margin), {"R": float(R)}
    if not used:
        return CheckReport("growth", True, 0.0, details={"mode": "unbounded_below"}, skipped=True)
    return CheckReport(
        "growth", bool(worst >= 0), worst, witness, {"mode": "unbounded_below", "rate": rate, "radii": tuple(used)}
    )


def gradient_bound_check(sol, l, nu):
    """Difference quotients of v against max over the grid of (l + c) / nu."""
    v = sol.v
    grid = v.grid
    bound = float(np.max((sample(grid, l) + sol.c) / sample(grid, nu)))
    slack = 2.0 * grid.dx * (1.0 + abs(bound))
    slopes = np.abs(np.diff(v.values)) / grid.dx
    i = int(np.argmax(slopes))
    margin = bound + slack - float(slopes[i])
    return CheckReport(
        "gradient_bound",
        bool(margin >= 0),
        margin,
        {"x_left": float(grid.nodes[i]), "x_right": float(grid.nodes[i + 1])},
        {"bound": bound, "max_slope": float(slopes[i])},
    )


def compare_on_aubry(v1, v2, aubry, window, slack=0.05):
    """max over window of (v1 - v2) <= max over the Aubry set of (v1 - v2) + slack."""
    f1, f2 = getattr(v1, "v", v1), getattr(v2, "v", v2)
    lo = max(window[0], f1.grid.x_min, f2.grid.x_min)
    hi = min(window[1], f1.grid.x_max, f2.grid.x_max)
    if lo >= hi:
        raise ValidationError(f"window {window} misses one of the solutions", {"window": window})
    xs = aubry.grid.nodes[aubry.grid.mask(lo, hi)]
    points = aubry.points[(aubry.points >= lo) & (aubry.points <= hi)]
    if points.size == 0:
        raise PreconditionError("no Aubry node inside the comparison window")
    gap = interp_linear(f1, xs) - interp_linear(f2, xs)
    gap_A = interp_linear(f1, points) - interp_linear(f2, points)
    i = int(np.argmax(gap))
    margin = float(np.max(gap_A)) + slack - float(gap[i])
    return CheckReport(
        "compare_on_aubry",
        bool(margin >= 0),
        margin,
        {"x": float(xs[i])},
        {"max_window": float(gap[i]), "max_aubry": float(np.max(gap_A))},
    )
