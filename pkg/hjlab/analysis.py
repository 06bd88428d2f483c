"""
Large-time behaviour toolkit: time convolutions of stored histories, the
Barron-Jensen min combination, stationary residuals, and the monitors that
turn convergence, decrease on the Aubry set, the Lipschitz-in-time sandwich
and the domain-of-dependence cone into reports.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .exceptions import GridMismatchError, PreconditionError, TrustRegionError, ValidationError
from .fields import ScalarField, interp_linear, sample
from .hamiltonian import AuditBox, lf_dissipation, numerical_H
from .reports import CheckReport, ReportBlock

logger = logging.getLogger(__name__)

DECREASE_SLACK = 1e-10
CONE_SLACK = 1e-10
TRAILING_FRACTION = 0.25


def _convolve(history, eps, sign):
    if not eps > 0:
        raise ValidationError(f"eps must be positive, got {eps}", {"eps": eps})
    if len(history) < 2:
        raise ValidationError("convolution needs at least 2 stored slices")
    times, values = history.times, history.values
    out = np.empty_like(values)
    with np.errstate(over="ignore"):
        for k, t in enumerate(times):
            penalty = ((t - times) / eps) ** 2
            if sign < 0:
                out[k] = np.min(values + penalty[:, None], axis=0)
            else:
                out[k] = np.max(values - penalty[:, None], axis=0)
    radius = np.full(len(history), history.trust_radius[-1])
    return history.with_values(out, trust_radius=radius, report_from=float(eps))


def inf_convolution(history, eps):
    """u_eps(x, t) = min over stored s of u(x, s) + |t - s|^2 / eps^2."""
    return _convolve(history, eps, -1)


def sup_convolution(history, eps):
    """u^eps(x, t) = max over stored s of u(x, s) - |t - s|^2 / eps^2."""
    return _convolve(history, eps, +1)


def min_combine(f, g):
    if not f.grid.compatible_with(g.grid):
        raise GridMismatchError("min_combine needs fields on the same grid")
    return ScalarField(f.grid, np.minimum(f.values, g.values))


@dataclass
class ResidualReport:
    x: np.ndarray
    residual: np.ndarray
    sup: float
    l1: float
    sup_excluding: Optional[float] = None

    def as_block(self, title="residual"):
        block = ReportBlock(title)
        block.add("sup", self.sup)
        block.add("l1", self.l1)
        block.add("sup_excluding", self.sup_excluding)
        i = int(np.argmax(np.abs(self.residual)))
        block.add("worst_x", float(self.x[i]))
        return block


def residual_stationary(v, H, l, c, exclude: Sequence[float] = ()):
    """Per-node residual of H(x, Dv) = l + c on interior nodes.

    ``exclude`` lists points whose cell (nearest node and its neighbours) is
    left out of ``sup_excluding``, e.g. a kink of the solution.
    """
    grid = v.grid
    slopes = np.diff(v.values) / grid.dx
    p_minus, p_plus = slopes[:-1], slopes[1:]
    x = grid.nodes[1:-1]
    theta = 0.0
    if not H.is_eikonal:
        p_max = max(1.0, float(np.max(np.abs(slopes))))
        theta = lf_dissipation(H, AuditBox((grid.x_min, grid.x_max), (-p_max, p_max), 41, 201))
    rhs = sample(grid, l)[1:-1] + c
    residual = np.asarray(numerical_H(H, x, p_minus, p_plus, theta), dtype=np.float64) - rhs
    report = ResidualReport(
        x=x,
        residual=residual,
        sup=float(np.max(np.abs(residual))),
        l1=float(np.sum(np.abs(residual)) * grid.dx),
    )
    if exclude:
        keep = np.ones(x.size, dtype=bool)
        for point in exclude:
            keep &= np.abs(x - point) > 1.5 * grid.dx
        report.sup_excluding = float(np.max(np.abs(residual[keep]))) if keep.any() else 0.0
    return report


@dataclass
class ConvergenceReport:
    window: Tuple[float, float]
    tol: float
    c: float
    times: np.ndarray
    distances: np.ndarray
    converged: bool
    T_star: Optional[float]
    oscillation: float
    station: float
    station_values: np.ndarray = field(repr=False, default=None)
    station_oscillation: float = 0.0

    def as_block(self, title="convergence"):
        block = ReportBlock(title)
        block.add("window", self.window)
        block.add("tol", self.tol)
        block.add("c", self.c)
        block.add("verdict", "converged" if self.converged else "not-converged")
        block.add("T_star", self.T_star)
        block.add("final_distance", float(self.distances[-1]))
        block.add("oscillation", self.oscillation)
        block.add("station", self.station)
        block.add("station_oscillation", self.station_oscillation)
        return block


def _trailing(values):
    count = max(1, int(math.ceil(TRAILING_FRACTION * len(values))))
    tail = values[-count:]
    return float(np.max(tail) - np.min(tail))


def _target_field(target):
    return getattr(target, "v", target)


def convergence_monitor(history, target, window, tol, c=None, station=None):
    """Distance d(t) = sup over window of |u(., t) + c t - v| across stored slices.

    ``u`` is taken in the scaling of the equation as posed. The verdict is
    converged when the last slices stay within ``tol`` from some T* on.
    """
    lo, hi = window
    c = getattr(target, "c", 0.0) if c is None else c
    v = _target_field(target)
    if not history.window_trusted(lo, hi, len(history) - 1):
        raise TrustRegionError(
            f"window [{lo}, {hi}] leaves the certified interval {history.trust_interval(len(history) - 1)}"
        )
    mask = history.grid.mask(lo, hi)
    xs = history.grid.nodes[mask]
    v_window = interp_linear(v, xs)
    station = 0.5 * (lo + hi) if station is None else station
    v_station = interp_linear(v, station)

    keep = np.flatnonzero(history.times >= history.report_from - 1e-12)
    times = history.times[keep]
    distances = np.empty(keep.size)
    station_values = np.empty(keep.size)
    for j, k in enumerate(keep):
        w = history.original(k) + c * history.times[k]
        distances[j] = np.max(np.abs(w[mask] - v_window))
        station_values[j] = interp_linear(ScalarField(history.grid, w), station)

    above = np.flatnonzero(distances > tol)
    if above.size == 0:
        converged, T_star = True, float(times[0])
    elif above[-1] == times.size - 1:
        converged, T_star = False, None
    else:
        converged, T_star = True, float(times[above[-1] + 1])
    report = ConvergenceReport(
        window=(lo, hi),
        tol=tol,
        c=c,
        times=times,
        distances=distances,
        converged=converged,
        T_star=T_star,
        oscillation=_trailing(distances),
        station=station,
        station_values=station_values - v_station,
        station_oscillation=_trailing(station_values),
    )
    logger.info(
        f"convergence on [{lo}, {hi}]: {'converged' if converged else 'not converged'}, "
        f"final distance {distances[-1]:.3g}"
    )
    return report


def decrease_on_aubry(history, aubry):
    """u(x, t) is nonincreasing in t at every trusted Aubry node (stored values)."""
    if not history.grid.compatible_with(aubry.grid):
        raise GridMismatchError("history and Aubry set live on different grids")
    idx = aubry.indices
    worst, witness = -np.inf, {}
    steps_per_slice = np.maximum(1.0, np.rint(np.diff(history.times) / max(history.dt, 1e-300)))
    for k in range(len(history) - 1):
        trusted = idx[history.trust_mask(k + 1)[idx]]
        if trusted.size == 0:
            continue
        rise = history.values[k + 1, trusted] - history.values[k, trusted]
        excess = rise - DECREASE_SLACK * steps_per_slice[k]
        j = int(np.argmax(excess))
        if excess[j] > worst:
            worst = float(excess[j])
            witness = {"x": float(history.grid.nodes[trusted[j]]), "t": float(history.times[k + 1])}
    if not np.isfinite(worst):
        return CheckReport("decrease_on_aubry", True, 0.0, skipped=True)
    return CheckReport("decrease_on_aubry", worst <= 0, -worst, witness, {"nodes": int(idx.size)})


def sandwich_bounds(history, v1, v2, window=None):
    """Smallest k1, k2 with v1 - k1 <= u <= v2 + k2 over the trailing half."""
    for sol in (v1, v2):
        if abs(getattr(sol, "c", 0.0)) > 1e-12:
            raise PreconditionError("sandwich bounds compare against c = 0 solutions only")
    f1, f2 = _target_field(v1), _target_field(v2)
    lo = max(f1.grid.x_min, f2.grid.x_min)
    hi = min(f1.grid.x_max, f2.grid.x_max)
    if window is not None:
        lo, hi = max(lo, window[0]), min(hi, window[1])
    half = 0.5 * history.times[-1]
    k1 = k2 = -np.inf
    for k in np.flatnonzero(history.times >= half - 1e-12):
        mask = history.trust_mask(k) & history.grid.mask(lo, hi)
        if not mask.any():
            raise TrustRegionError(f"no trusted node of [{lo}, {hi}] at t={history.times[k]}")
        xs = history.grid.nodes[mask]
        u = history.values[k, mask]
        k1 = max(k1, float(np.max(interp_linear(f1, xs) - u)))
        k2 = max(k2, float(np.max(u - interp_linear(f2, xs))))
    return k1, k2


def dependence_cone_check(run_A, run_B, x0, r, C_H, strict=True):
    """Finite speed of propagation between two runs whose data agree on B(x0, r).

    Differences are checked inside the exponential cone
    |x - x0| <= (1 + r) e^(-C_H t) - 1 and inside the linear numerical cone
    |x - x0| <= r - speed_max t - 2 dx, against the largest initial
    difference delta inside the ball.
    """
    grid = run_A.grid
    if not grid.compatible_with(run_B.grid) or not np.allclose(run_A.times, run_B.times):
        raise GridMismatchError("cone check needs runs on the same grid and stored times")
    distance = np.abs(grid.nodes - x0)
    ball = distance <= r + 1e-9 * grid.dx
    diff = np.abs(run_A.values - run_B.values)
    delta = float(np.max(diff[0, ball])) if ball.any() else 0.0
    if strict and delta > 0:
        raise PreconditionError(f"initial data differ by {delta!r} inside B({x0}, {r})")

    worst_exp = worst_lin = -np.inf
    witness = {}
    for k, t in enumerate(run_A.times):
        for kind, radius in (
            ("exponential", (1.0 + r) * math.exp(-C_H * t) - 1.0),
            ("linear", r - run_A.speed_max * t - 2.0 * grid.dx),
        ):
            if radius < 0:
                continue
            inside = distance <= radius + 1e-9 * grid.dx
            if not inside.any():
                continue
            excess = float(np.max(diff[k, inside])) - delta
            if kind == "exponential" and excess > worst_exp:
                worst_exp = excess
                if excess > CONE_SLACK:
                    witness = {"t": float(t), "cone": kind}
            if kind == "linear" and excess > worst_lin:
                worst_lin = excess
                if excess > CONE_SLACK and not witness:
                    witness = {"t": float(t), "cone": kind}
    worst = max(worst_exp, worst_lin)
    return CheckReport(
        "dependence_cone",
        bool(worst <= CONE_SLACK),
        CONE_SLACK - worst if np.isfinite(worst) else 0.0,
        witness,
        {
            "delta": delta,
            "exponential_excess": worst_exp if np.isfinite(worst_exp) else None,
            "linear_excess": worst_lin if np.isfinite(worst_lin) else None,
        },
        skipped=not np.isfinite(worst),
    )
