"""
Experiment registry and run orchestration.

Every entry assembles its problems from closed forms, runs the solvers and
checks, and records expected outcomes. Artifacts land in
``<artifact root>/<experiment id>/``: CSV fields and histories, gnuplot
``.dat`` files, ``report.txt`` with every report block and ``summary.txt``
with one ``summary: <outcome> PASS|FAIL`` line per expected outcome.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from django.conf import settings

from .analysis import (
    convergence_monitor,
    decrease_on_aubry,
    dependence_cone_check,
    inf_convolution,
    sandwich_bounds,
    sup_convolution,
)
from .cauchy import (
    BoundaryPolicy,
    CauchyProblem,
    Scheme,
    build_supersolution,
    normalize_cost,
    sandwich_check,
    solve,
)
from .control import (
    ControlProblem,
    PiecewiseControl,
    evaluate_cost,
    synthesize_trajectory,
    value_function_dp,
)
from .ergodic import (
    Normalization,
    certify,
    compare_on_aubry,
    dirichlet_limit,
    estimate_ergodic_constant,
    extract_aubry,
    gradient_bound_check,
    growth_diagnostics,
    long_time_limit,
    solve_dirichlet,
    solve_perron_min,
)
from .exceptions import HJLabError, UnknownExperimentError
from .fields import ScalarField, grid_from_spacing, write_field_csv, write_plot_data
from .hamiltonian import AuditBox, HamiltonianSpec, audit_assumptions
from .reports import ReportBlock, render_blocks
from .runconfig import merge_config

logger = logging.getLogger(__name__)

C_GRID = (0.0, 0.5, 1.0, 2.0)
DIRICHLET_RADII = (3.0, 4.0, 5.0, 6.0)
CONTROL_GRID = (-8.0, 8.0)
AUDIT_P_MAX = 5.0


def S(x):
    """x|x|/2, the unbounded-below profile with S' = |x|."""
    return 0.5 * x * np.abs(x)


def unit_speed(x):
    return np.ones_like(np.asarray(x, dtype=np.float64))


def abs_cost(x):
    return np.abs(x)


def shifted_abs_cost(x):
    return 1.0 + np.abs(x)


def half_square(x):
    return 0.5 * np.asarray(x, dtype=np.float64) ** 2


@dataclass(frozen=True)
class Outcome:
    name: str
    passed: bool
    detail: Dict[str, Any] = field(default_factory=dict)

    def summary_line(self):
        return f"summary: {self.name} {'PASS' if self.passed else 'FAIL'}"


@dataclass(frozen=True, eq=False)
class ExperimentSpec:
    id: str
    description: str
    tags: Tuple[str, ...]
    runner: Callable
    running_cost: Callable
    initial: Optional[Callable] = None
    speed: Callable = unit_speed
    normalize: bool = False
    defaults: Dict[str, Any] = field(default_factory=dict)


@dataclass
class ExperimentResult:
    experiment_id: str
    exit_status: int
    artifact_dir: Path
    outcomes: List[Outcome]

    @property
    def passed(self):
        return self.exit_status == 0

    def summary_lines(self):
        return [outcome.summary_line() for outcome in self.outcomes]


@dataclass
class RunContext:
    spec: ExperimentSpec
    config: Dict[str, Any]
    directory: Path
    blocks: List[ReportBlock] = field(default_factory=list)
    outcomes: List[Outcome] = field(default_factory=list)

    @property
    def grid(self):
        return grid_from_spacing(self.config["x_min"], self.config["x_max"], self.config["dx"])

    def sub_grid(self, lo, hi):
        return grid_from_spacing(lo, hi, self.config["dx"])

    def make_field(self, func, grid=None):
        return ScalarField.from_function(grid or self.grid, func)

    def hamiltonian(self, grid=None):
        grid = grid or self.grid
        return HamiltonianSpec.eikonal(self.spec.speed, window=(grid.x_min, grid.x_max), samples=grid.n)

    def cost(self, grid=None, normalized=False):
        l = self.make_field(self.spec.running_cost, grid)
        return normalize_cost(l)[0] if normalized else l

    def problem(self, u0=None, grid=None, **changes):
        grid = grid or self.grid
        options = dict(
            H=self.hamiltonian(grid),
            l=self.cost(grid),
            u0=self.make_field(u0 or self.spec.initial, grid),
            T=self.config["T"],
            scheme=self.config["scheme"],
            cfl=self.config["cfl"],
            boundary=self.config["boundary"],
            snapshot_stride=self.config["snapshot_stride"],
            normalize=self.spec.normalize,
        )
        options.update(changes)
        return CauchyProblem(**options)

    def report(self, block):
        self.blocks.append(block)
        return block

    def expect(self, name, passed, **detail):
        outcome = Outcome(name, bool(passed), detail)
        self.outcomes.append(outcome)
        self.report(ReportBlock(f"outcome {name}", {"verdict": outcome.passed, **detail}))
        if not outcome.passed:
            logger.warning(f"{self.spec.id}: expected outcome {name} failed {detail}")
        return outcome

    def check(self, name, report):
        """Record a CheckReport as a block and as an expected outcome."""
        self.report(report.as_block())
        return self.expect(name, report.passed, margin=report.margin)

    def audit_box(self):
        grid = self.grid
        return AuditBox((grid.x_min, grid.x_max), (-AUDIT_P_MAX, AUDIT_P_MAX), eta=grid.dx)

    def audit(self, expected_failures=()):
        audit = audit_assumptions(self.hamiltonian(), self.cost(normalized=True), self.audit_box())
        self.report(audit.as_block())
        failed = sorted(v.name for v in audit.failures)
        self.expect("audit", failed == sorted(expected_failures), failed=tuple(failed))
        return audit

    def save_field(self, name, values):
        return write_field_csv(values, self.directory / f"{name}.csv")

    def save_history(self, name, history, window=None):
        lo, hi = window or self.config["window"]
        return history.restrict(lo, hi).to_csv(self.directory / f"{name}.csv")

    def save_plot(self, name, columns):
        return write_plot_data(self.directory / f"{name}.dat", columns)


def sup_error(history, exact, window, k=-1):
    k = k % len(history)
    mask = history.grid.mask(*window)
    x = history.grid.nodes[mask]
    return float(np.max(np.abs(history.original(k)[mask] - exact(x, history.times[k]))))


def run_dirichlet_family(ctx):
    """Dirichlet problems on growing balls for l = |x| and the c-grid."""
    cfg = ctx.config
    ctx.audit()
    H = ctx.hamiltonian()
    lam, dx, tol = cfg["c"], cfg["dx"], cfg["tol"]

    R = 2.0
    V = solve_dirichlet(H, abs_cost, lam, R, dx)
    closed = 0.5 * (R ** 2 - V.nodes ** 2) + lam * (R - np.abs(V.nodes))
    error = float(np.max(np.abs(V.values - closed)))
    ctx.save_field("dirichlet_R2", V)
    ctx.expect("dirichlet_closed_form", error <= tol, error=error)

    limit = dirichlet_limit(H, abs_cost, lam, DIRICHLET_RADII, dx, window=cfg["window"])
    ctx.report(limit.as_block())
    sol = certify(limit.solution, H, abs_cost, exclude=(0.0,))
    sol.to_csv(ctx.directory / "dirichlet_limit.csv")
    inside = sol.v.grid.mask(*cfg["window"])
    xs = sol.v.nodes[inside]
    gap = float(np.max(np.abs(sol.v.values[inside] - (-0.5 * xs ** 2 - lam * np.abs(xs)))))
    ctx.expect("limit_stabilized", max(limit.differences) <= 0.02, differences=tuple(limit.differences))
    ctx.expect("limit_closed_form", gap <= tol, error=gap)
    ctx.check("gradient_bound", gradient_bound_check(sol, abs_cost, unit_speed))
    if lam > 0:
        ctx.check("unbounded_below", growth_diagnostics(sol, extract_aubry(ctx.cost()), H.m_inv))

    worst = 0.0
    for c in C_GRID:
        family = dirichlet_limit(H, abs_cost, c, DIRICHLET_RADII, dx, window=cfg["window"])
        ctx.report(family.as_block(f"dirichlet_limit c={c!r}"))
        ctx.save_plot(f"profile_c{c:g}", {"x": family.solution.v.nodes, "v": family.solution.v.values})
        worst = max(worst, max(family.differences))
    ctx.expect("c_grid_stabilized", worst <= 0.02, worst=worst)


def run_perron_minimum(ctx):
    """Maximal nonnegative solution vanishing on argmin l for l = |x|."""
    ctx.audit()
    H = ctx.hamiltonian()
    l = ctx.cost(normalized=True)
    aubry = extract_aubry(l, tol=1e-12)
    ctx.report(aubry.as_block())
    origin = ctx.grid.nearest_index(0.0)
    ctx.expect(
        "aubry_at_origin",
        aubry.indices.tolist() == [origin] and abs(aubry.R_A - ctx.grid.dx) <= 1e-9,
        R_A=aubry.R_A,
    )

    sol = certify(solve_perron_min(H, l, aubry), H, l)
    sol.to_csv(ctx.directory / "perron_min.csv")
    ctx.save_plot("perron_min", {"x": sol.v.nodes, "v": sol.v.values, "closed_form": half_square(sol.v.nodes)})
    error = float(np.max(np.abs(sol.v.values - half_square(sol.v.nodes))))
    ctx.expect("closed_form", error <= ctx.config["tol"], error=error)
    ctx.expect(
        "pinned_and_nonnegative",
        np.all(sol.v.values >= 0) and np.all(sol.v.values[aubry.indices] == 0),
    )
    ctx.expect("residual", sol.residual["sup"] <= 2 * ctx.grid.dx, sup=sol.residual["sup"])
    ctx.check("gradient_bound", gradient_bound_check(sol, l, unit_speed))
    ctx.check("growth_off_aubry", growth_diagnostics(sol, aubry, H.m_inv))


def run_exact_evolution(ctx):
    """u0 = S and u0 = x^2/2 against their closed-form evolutions, plus control."""
    cfg = ctx.config
    ctx.audit()
    window, tol = cfg["window"], cfg["tol"]

    history = solve(ctx.problem())
    ctx.save_history("history", history)
    error = sup_error(history, lambda x, t: t + S(x), window)
    ctx.expect("exact_error", error <= tol, error=error)

    fine_grid = grid_from_spacing(cfg["x_min"], cfg["x_max"], cfg["dx"] / 2)
    fine_error = sup_error(solve(ctx.problem(grid=fine_grid)), lambda x, t: t + S(x), window)
    ratio = error / fine_error if fine_error > 0 else math.inf
    ctx.expect("refinement_ratio", 1.6 <= ratio <= 2.4, ratio=ratio)

    quadratic = solve(ctx.problem(half_square))
    quad_error = sup_error(quadratic, lambda x, t: t + half_square(x), window)
    ctx.expect("quadratic_pair", quad_error <= tol, error=quad_error)

    l_norm = ctx.cost(normalized=True)
    ctx.check("decrease_on_aubry", decrease_on_aubry(history, extract_aubry(l_norm)))

    v_minus = ctx.make_field(lambda x: S(x) - 1.0)
    v_plus = build_supersolution(ctx.make_field(S), l_norm, 0.0, unit_speed)
    sandwich = sandwich_check(history, v_minus, v_plus, c=-1.0)
    ctx.report(sandwich.as_block())
    ctx.expect("sandwich", sandwich.passed)

    r = 4.0
    bumped = solve(ctx.problem(lambda x: half_square(x) + np.maximum(np.abs(x) - r, 0.0) ** 2))
    ctx.check("exponential_cone", dependence_cone_check(quadratic, bumped, 0.0, r, ctx.hamiltonian().C_H))
    identical = True
    for k, t in enumerate(quadratic.times):
        radius = r - quadratic.speed_max * t - 2 * quadratic.grid.dx
        if radius >= 0:
            inside = quadratic.grid.mask(-radius, radius)
            identical = identical and np.array_equal(quadratic.values[k, inside], bumped.values[k, inside])
    ctx.expect("finite_speed_bit_identical", identical)

    run_control_checks(ctx, S, shifted_abs_cost, x=1.0, horizon=3.0, expected=3.5)
    problem = ControlProblem(ctx.spec.speed, shifted_abs_cost, S, 3.0)
    for tau, name in ((2.0, "reach_and_stay"), (0.0, "straight_left")):
        trajectory = evaluate_cost(problem, PiecewiseControl.reach_wait_leave(1.0, 3.0, tau), 1.0)
        ctx.expect(f"strategy_{name}", abs(trajectory.cost - 3.5) <= 1e-6, cost=trajectory.cost)


def run_control_checks(ctx, terminal, running_cost, x, horizon, expected):
    """Value function by DP, its equivalence with the SL solver, and a synthesized trajectory."""
    problem = ControlProblem(ctx.spec.speed, running_cost, terminal, horizon)
    grid = ctx.sub_grid(*CONTROL_GRID)
    value = value_function_dp(problem, grid, cfl=ctx.config["cfl"])
    V = float(value.at(x))
    ctx.expect("value_function", abs(V - expected) <= ctx.config["tol"], V=V, expected=expected)

    oracle = solve(
        ctx.problem(
            terminal,
            grid=grid,
            l=ctx.make_field(running_cost, grid),
            T=horizon,
            scheme=Scheme.SEMI_LAGRANGIAN,
            boundary=BoundaryPolicy.ONE_SIDED_UPWIND,
            snapshot_stride=1,
            normalize=False,
        )
    )
    gap = float(np.max(np.abs(oracle.values - value.history.values)))
    ctx.expect("dp_matches_semi_lagrangian", gap <= 1e-12, gap=gap)

    trajectory = synthesize_trajectory(value, x)
    trajectory.to_csv(ctx.directory / "trajectory.csv")
    ctx.expect("synthesized_cost", abs(trajectory.cost - V) <= 0.02, cost=trajectory.cost, V=V)
    return trajectory


def limit_shift(initial, v):
    """min over the grid of u0 + v.

    The long-time limit is v plus this constant when the Aubry set is the
    single point 0 and v vanishes there.
    """
    return float(np.min(initial(v.nodes) + v.values))


def run_bounded_below_convergence(ctx):
    """A bounded perturbation of x^2/2 converges to the shifted Perron solution."""
    cfg = ctx.config
    ctx.audit()
    window, tol, T = cfg["window"], cfg["tol"], cfg["T"]
    history = solve(ctx.problem())
    ctx.save_history("history", history)

    grid = ctx.sub_grid(-4.0, 4.0)
    H = ctx.hamiltonian(grid)
    l = ctx.cost(grid, normalized=True)
    aubry = extract_aubry(l)
    perron = certify(solve_perron_min(H, l, aubry), H, l)
    shift = limit_shift(ctx.spec.initial, perron.v)
    target = replace(perron, v=perron.v.shifted(shift), normalization=Normalization.NONE)

    monitor = convergence_monitor(history, target, window, tol)
    ctx.report(monitor.as_block())
    ctx.save_plot("distance", {"t": monitor.times, "d": monitor.distances})
    ctx.expect("converged", monitor.converged, T_star=monitor.T_star, limit_shift=shift)

    c_hat = estimate_ergodic_constant(history, window, 0.5 * T)
    ctx.expect("ergodic_constant", abs(c_hat) <= 1e-2, estimate=c_hat)

    ctx.check("decrease_on_aubry", decrease_on_aubry(history, extract_aubry(ctx.cost(normalized=True))))

    limit = long_time_limit(history)
    limit.to_csv(ctx.directory / "long_time_limit.csv")
    ctx.check("max_principle_on_aubry", compare_on_aubry(perron, limit, aubry, window))

    k1, k2 = sandwich_bounds(history, perron, perron, window)
    ctx.report(ReportBlock("sandwich_bounds", {"k1": k1, "k2": k2}))
    ctx.expect("sandwich_bounds", np.isfinite(k1) and np.isfinite(k2) and k1 <= 1 + tol, k1=k1, k2=k2)

    lower, upper = inf_convolution(history, cfg["eps"]), sup_convolution(history, cfg["eps"])
    trusted = history.trust_mask(len(history) - 1)
    ordered = bool(
        np.all(lower.values[:, trusted] <= history.values[:, trusted])
        and np.all(history.values[:, trusted] <= upper.values[:, trusted])
    )
    ctx.expect("convolution_ordering", ordered)
    ctx.report(convergence_monitor(lower, target, window, tol).as_block("convergence inf_convolution"))

    run_a = solve(ctx.problem(half_square))
    run_b = solve(ctx.problem(lambda x: S(x) + 3.0))
    run_min = solve(ctx.problem(lambda x: np.minimum(half_square(x), S(x) + 3.0)))
    gap = 0.0
    for k in range(len(run_min)):
        mask = run_min.trust_mask(k)
        combined = np.minimum(run_a.values[k, mask], run_b.values[k, mask])
        gap = max(gap, float(np.max(np.abs(run_min.values[k, mask] - combined))))
    ctx.expect("min_of_solutions", gap <= 0.02, gap=gap)

    # the control problem pays 1 + |x|, so V grows like t on top of the limit
    horizon = 6.0
    trajectory = run_control_checks(
        ctx, ctx.spec.initial, shifted_abs_cost, x=0.0, horizon=horizon, expected=horizon + shift
    )
    zs = np.linspace(-2.0, 2.0, 40001)
    z_star = float(zs[np.argmin(ctx.spec.initial(zs) + half_square(zs))])
    end = float(trajectory.positions[-1])
    ctx.expect("terminal_point", abs(end - z_star) <= 0.15, end=end, expected=z_star)


def run_left_oscillation(ctx):
    """u0 = S + sin: convergence on x >= 0, persistent oscillation at a negative station."""
    cfg = ctx.config
    ctx.audit()
    window, tol = cfg["window"], cfg["tol"]
    history = solve(ctx.problem())
    ctx.save_history("history", history)

    right = convergence_monitor(history, ctx.make_field(lambda x: half_square(x) - 1.0), window, tol, c=-1.0)
    ctx.report(right.as_block("convergence right"))
    ctx.expect("converged_right", right.converged, T_star=right.T_star)

    x0 = cfg["x0"]
    left = convergence_monitor(history, ctx.make_field(S), (x0 - 0.5, x0 + 0.5), tol, c=-1.0, station=x0)
    ctx.report(left.as_block("convergence left"))
    ctx.save_plot("station", {"t": left.times, "u": left.station_values})
    ctx.expect(
        "oscillating_left",
        not left.converged and left.station_oscillation >= 1.0,
        station_oscillation=left.station_oscillation,
    )

    ctx.check("decrease_on_aubry", decrease_on_aubry(history, extract_aubry(ctx.cost(normalized=True))))


def run_traveling_wave(ctx):
    """u0 = S + x + sin: the exact solution is a traveling wave and never settles."""
    cfg = ctx.config
    ctx.audit()
    window, tol = cfg["window"], cfg["tol"]
    history = solve(ctx.problem())
    ctx.save_history("history", history)

    exact_error = sup_error(history, lambda x, t: S(x) + x + np.sin(x - t), window)
    ctx.report(ReportBlock("traveling_wave", {"sup_error": exact_error}))

    monitor = convergence_monitor(history, ctx.make_field(lambda x: S(x) + x), window, tol, c=0.0, station=0.0)
    ctx.report(monitor.as_block())
    ctx.save_plot("station", {"t": monitor.times, "u": monitor.station_values})
    ctx.expect("not_converged", not monitor.converged)
    ctx.expect("station_oscillation", monitor.station_oscillation >= 1.5, value=monitor.station_oscillation)

    ctx.check("decrease_on_aubry", decrease_on_aubry(history, extract_aubry(ctx.cost(normalized=True))))


def positive_c_profile(lam):
    """v = -lam x - S(x), a solution of |v'| = |x| + lam."""
    return lambda x: -lam * x - S(x)


def run_positive_constant(ctx):
    """c > 0: u + c t tends to v = -c x - S(x) when u0 - v vanishes at +inf."""
    cfg = ctx.config
    ctx.audit()
    window, tol, lam, T = cfg["window"], cfg["tol"], cfg["c"], cfg["T"]
    v = positive_c_profile(lam)
    history = solve(ctx.problem(lambda x: v(x) + np.sin(x) / (1.0 + x ** 2)))
    ctx.save_history("history", history)

    monitor = convergence_monitor(history, ctx.make_field(v), window, tol, c=lam)
    ctx.report(monitor.as_block())
    ctx.save_plot("distance", {"t": monitor.times, "d": monitor.distances})
    ctx.expect("converged", monitor.converged, T_star=monitor.T_star)

    c_hat = estimate_ergodic_constant(history, window, 0.5 * T)
    ctx.expect("ergodic_constant", abs(c_hat - lam) <= 0.02, estimate=c_hat)

    ctx.check("decrease_on_aubry", decrease_on_aubry(history, extract_aubry(ctx.cost(normalized=True))))


def run_periodic_cost(ctx):
    """l = |sin x|: an unbounded zero set, glued-cosine solutions."""
    ctx.audit(expected_failures=("compactness",))
    H = ctx.hamiltonian()
    l = ctx.cost(normalized=True)
    aubry = extract_aubry(l, tol=1e-9)
    ctx.report(aubry.as_block())
    grid = ctx.grid
    multiples = np.arange(math.ceil(grid.x_min / math.pi), math.floor(grid.x_max / math.pi) + 1)
    centers = [0.5 * (grid.nodes[a] + grid.nodes[b]) for a, b in aubry.components]
    matched = len(centers) == multiples.size and all(
        abs(center - k * math.pi) <= grid.dx for center, k in zip(centers, multiples)
    )
    ctx.expect("aubry_components", matched, components=len(centers))

    sol = certify(solve_perron_min(H, l, aubry), H, l)
    sol.to_csv(ctx.directory / "perron_min.csv")
    distance = np.abs(grid.nodes - math.pi * np.round(grid.nodes / math.pi))
    glued = 1.0 - np.cos(distance)
    ctx.save_plot("perron_min", {"x": grid.nodes, "v": sol.v.values, "glued_cosine": glued})
    error = float(np.max(np.abs(sol.v.values - glued)))
    ctx.expect("glued_cosine", error <= ctx.config["tol"], error=error)
    ctx.check("gradient_bound", gradient_bound_check(sol, l, unit_speed))
    ctx.report(growth_diagnostics(sol, aubry, H.m_inv).as_block())


ENTRIES = (
    ExperimentSpec(
        id="ex-5-1-dirichlet",
        description="Dirichlet limit for |v'| = |x| + c on growing balls, c in {0, 0.5, 1, 2}",
        tags=("ergodic", "dirichlet"),
        runner=run_dirichlet_family,
        running_cost=abs_cost,
        defaults={"dx": 0.005, "x_min": -6.0, "x_max": 6.0, "c": 1.0, "window": (-2.0, 2.0)},
    ),
    ExperimentSpec(
        id="ex-5-1-perron",
        description="Maximal nonnegative solution of |v'| = |x| vanishing at 0",
        tags=("ergodic", "perron", "growth"),
        runner=run_perron_minimum,
        running_cost=abs_cost,
        defaults={"x_min": -3.0, "x_max": 3.0, "window": (-2.0, 2.0)},
    ),
    ExperimentSpec(
        id="ex-5-2",
        description="u0 = x|x|/2 with l = 1 + |x|: exact solution t + S(x), optimal strategies",
        tags=("evolution", "exact", "control", "comparison"),
        runner=run_exact_evolution,
        running_cost=shifted_abs_cost,
        initial=S,
        normalize=True,
    ),
    ExperimentSpec(
        id="ex-5-3",
        description="u0 = x^2/2 + sin x with l = |x|: convergence to the shifted Perron solution",
        tags=("evolution", "convergence", "control"),
        runner=run_bounded_below_convergence,
        running_cost=abs_cost,
        initial=lambda x: half_square(x) + np.sin(x),
        defaults={"x_min": -24.0, "x_max": 24.0, "T": 20.0, "window": (-2.0, 2.0)},
    ),
    ExperimentSpec(
        id="ex-5-4",
        description="u0 = S + sin with l = 1 + |x|: convergence for x >= 0 only",
        tags=("evolution", "nonconvergence"),
        runner=run_left_oscillation,
        running_cost=shifted_abs_cost,
        initial=lambda x: S(x) + np.sin(x),
        normalize=True,
        defaults={
            "x_min": -24.0,
            "x_max": 24.0,
            "T": 20.0,
            "scheme": "semi_lagrangian",
            "window": (0.0, 2.0),
            "x0": -2.0,
        },
    ),
    ExperimentSpec(
        id="ex-5-5",
        description="u0 = S + x + sin with l = 1 + |x|: traveling wave, no convergence",
        tags=("evolution", "nonconvergence"),
        runner=run_traveling_wave,
        running_cost=shifted_abs_cost,
        initial=lambda x: S(x) + x + np.sin(x),
        normalize=True,
        defaults={
            "x_min": -36.0,
            "x_max": 36.0,
            "T": 30.0,
            "dx": 0.005,
            "scheme": "semi_lagrangian",
            "window": (-2.0, 2.0),
        },
    ),
    ExperimentSpec(
        id="ex-thm1-4",
        description="c > 0: u + c t tends to -c x - S(x) for data decaying at +inf",
        tags=("evolution", "convergence"),
        runner=run_positive_constant,
        running_cost=abs_cost,
        defaults={
            "x_min": -25.0,
            "x_max": 25.0,
            "T": 20.0,
            "c": 1.0,
            "scheme": "semi_lagrangian",
            "window": (-2.0, 2.0),
        },
    ),
    ExperimentSpec(
        id="ex-remark-4-2",
        description="|v'| = |sin x|: Aubry set pi Z and glued-cosine solutions",
        tags=("ergodic", "periodic"),
        runner=run_periodic_cost,
        running_cost=lambda x: np.abs(np.sin(x)),
        defaults={"x_min": -7.0, "x_max": 7.0},
    ),
)


def build_registry(enabled=None):
    if enabled is None:
        enabled = getattr(settings, "HJLAB_REGISTRY_ENABLED", True)
    if not enabled:
        return {}
    return {spec.id: spec for spec in ENTRIES}


def list_experiments(tag=None, registry=None):
    registry = build_registry() if registry is None else registry
    return [spec for spec in registry.values() if tag is None or tag in spec.tags]


def get_experiment(experiment_id, registry=None):
    registry = build_registry() if registry is None else registry
    try:
        return registry[experiment_id]
    except KeyError:
        raise UnknownExperimentError(f"unknown experiment {experiment_id!r}") from None


def artifact_root():
    return Path(getattr(settings, "HJLAB_ARTIFACT_ROOT", Path.cwd() / "artifacts"))


def run_experiment(experiment_id, overrides=None, root=None, spec=None):
    """Run one registry entry; exit status 0 iff every expected outcome passes."""
    spec = spec or get_experiment(experiment_id)
    config = merge_config(spec, flags=overrides)
    directory = Path(root or artifact_root()) / spec.id
    directory.mkdir(parents=True, exist_ok=True)
    ctx = RunContext(spec, config, directory)
    ctx.report(ReportBlock("config", dict(config)))
    logger.info(f"running {spec.id} into {directory}")
    try:
        spec.runner(ctx)
    except HJLabError as e:
        logger.error(f"experiment {spec.id} failed: {type(e).__name__}: {e}")
        raise
    (directory / "report.txt").write_text(render_blocks(ctx.blocks))
    result = ExperimentResult(
        spec.id, 0 if all(o.passed for o in ctx.outcomes) else 1, directory, ctx.outcomes
    )
    (directory / "summary.txt").write_text("\n".join(result.summary_lines()) + "\n")
    logger.info(f"{spec.id}: {sum(o.passed for o in ctx.outcomes)}/{len(ctx.outcomes)} outcomes passed")
    return result
