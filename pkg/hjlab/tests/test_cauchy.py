import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from hjlab.cauchy import (
    BoundaryPolicy,
    CauchyProblem,
    Scheme,
    SnapshotHistory,
    build_supersolution,
    march,
    normalize_cost,
    sandwich_check,
    semi_lagrangian_update,
    solve,
    step_plan,
    stride_for,
)
from hjlab.exceptions import (
    CFLViolationError,
    GridMismatchError,
    NonFiniteValueError,
    TrustIntervalEmptyError,
    ValidationError,
)
from hjlab.fields import ScalarField, grid_from_spacing
from hjlab.hamiltonian import HamiltonianSpec


def unit_speed(x):
    return np.ones_like(np.asarray(x, dtype=np.float64))


def half_square(x):
    return 0.5 * x ** 2


def make_problem(grid, u0, l, **options):
    H = HamiltonianSpec.eikonal(unit_speed, window=(grid.x_min, grid.x_max), samples=grid.n)
    return CauchyProblem(
        H=H,
        l=ScalarField.from_function(grid, l),
        u0=ScalarField.from_function(grid, u0),
        **options,
    )


class StepPlanTests(SimpleTestCase):
    def test_step_plan_divides_the_horizon(self):
        steps, dt = step_plan(1.0, 0.3)
        self.assertEqual(steps, 4)
        self.assertAlmostEqual(dt, 0.25)

    def test_stride(self):
        self.assertEqual(stride_for(1000, 200), 5)
        self.assertEqual(stride_for(10, 200), 1)
        self.assertEqual(stride_for(10, None), 1)
        self.assertEqual(stride_for(1000, 200, snapshot_stride=7), 7)

    def test_normalize_cost(self):
        grid = grid_from_spacing(-1.0, 1.0, 0.25)
        l, shift = normalize_cost(ScalarField.from_function(grid, lambda x: 2.0 + np.abs(x)))
        self.assertEqual(shift, 2.0)
        self.assertEqual(float(l.values.min()), 0.0)


class ProblemValidationTests(SimpleTestCase):
    def setUp(self):
        self.grid = grid_from_spacing(-1.0, 1.0, 0.1)

    def test_cfl_out_of_range(self):
        with self.assertRaises(ValidationError):
            make_problem(self.grid, half_square, np.abs, T=0.1, cfl=1.5)

    def test_horizon_must_be_positive(self):
        with self.assertRaises(ValidationError):
            make_problem(self.grid, half_square, np.abs, T=0.0)

    def test_grid_mismatch(self):
        H = HamiltonianSpec.eikonal(unit_speed)
        other = grid_from_spacing(-1.0, 1.0, 0.2)
        with self.assertRaises(GridMismatchError):
            CauchyProblem(
                H,
                ScalarField.from_function(self.grid, np.abs),
                ScalarField.from_function(other, half_square),
                T=0.1,
            )

    def test_semi_lagrangian_needs_eikonal(self):
        H = HamiltonianSpec.custom(lambda x, p: 0.5 * p ** 2, 1.0, 5.0, lambda r: r, lambda s: s)
        l = ScalarField.from_function(self.grid, np.abs)
        with self.assertRaises(ValidationError):
            CauchyProblem(H, l, l, T=0.1, scheme=Scheme.SEMI_LAGRANGIAN)

    def test_trust_interval_vanishing(self):
        problem = make_problem(self.grid, half_square, np.abs, T=2.0)
        with self.assertRaises(TrustIntervalEmptyError) as ctx:
            solve(problem)
        self.assertAlmostEqual(ctx.exception.vanish_time, 0.8)

    def test_explicit_dt_above_the_bound(self):
        problem = make_problem(self.grid, half_square, np.abs, T=0.2, dt=0.2)
        with self.assertRaises(CFLViolationError):
            solve(problem)

    def test_non_finite_step(self):
        with self.assertRaises(NonFiniteValueError) as ctx:
            march(np.zeros(5), lambda u: u + np.nan, steps=3, dt=0.1, stride=1)
        self.assertEqual(ctx.exception.node, 0)
        self.assertAlmostEqual(ctx.exception.time, 0.1)


class SolveTests(SimpleTestCase):
    def test_stationary_quadratic_drifts_at_most_half_dx(self):
        grid = grid_from_spacing(-3.0, 3.0, 0.05)
        history = solve(make_problem(grid, half_square, np.abs, T=1.0))
        self.assertEqual(history.times[0], 0.0)
        self.assertEqual(history.times[-1], 1.0)
        mask = history.trust_mask(len(history) - 1)
        drift = np.abs(history.values[-1] - half_square(grid.nodes))[mask]
        self.assertLessEqual(float(drift.max()), 0.5 * grid.dx + 1e-9)
        self.assertTrue(np.all(np.diff(history.trust_radius) <= 0))

    def test_semi_lagrangian_keeps_the_stationary_quadratic(self):
        grid = grid_from_spacing(-3.0, 3.0, 0.05)
        history = solve(make_problem(grid, half_square, np.abs, T=1.0, scheme=Scheme.SEMI_LAGRANGIAN))
        mask = history.trust_mask(len(history) - 1)
        drift = np.abs(history.values[-1] - half_square(grid.nodes))[mask]
        self.assertLessEqual(float(drift.max()), 0.05)

    def test_lax_friedrichs_on_eikonal(self):
        grid = grid_from_spacing(-3.0, 3.0, 0.05)
        history = solve(make_problem(grid, half_square, np.abs, T=0.5, scheme=Scheme.LAX_FRIEDRICHS))
        mask = history.trust_mask(len(history) - 1)
        drift = np.abs(history.values[-1] - half_square(grid.nodes))[mask]
        self.assertLessEqual(float(drift.max()), 0.05)

    def test_normalized_history_keeps_the_shift(self):
        grid = grid_from_spacing(-3.0, 3.0, 0.1)
        history = solve(make_problem(grid, half_square, lambda x: 2.0 + np.abs(x), T=0.5, normalize=True))
        self.assertAlmostEqual(history.shift, 2.0)
        np.testing.assert_allclose(history.original(-1) - history.values[-1], 2.0 * 0.5)

    def test_snapshot_count_bounds_the_history(self):
        grid = grid_from_spacing(-3.0, 3.0, 0.05)
        history = solve(make_problem(grid, half_square, np.abs, T=1.0, snapshot_count=5))
        self.assertLessEqual(len(history), 5 + 2)

    def test_frozen_extension_moves_boundary_at_the_local_rate(self):
        grid = grid_from_spacing(-1.0, 1.0, 0.25)
        history = solve(
            make_problem(
                grid, lambda x: x, lambda x: 2.0 + 0 * x, T=0.25, boundary=BoundaryPolicy.FROZEN_EXTENSION
            )
        )
        np.testing.assert_allclose(history.values[:, 0], -1.0 + history.times)
        np.testing.assert_allclose(history.values[:, -1], 1.0 + history.times)

    def test_history_csv_round_trip(self):
        grid = grid_from_spacing(-1.0, 1.0, 0.25)
        history = solve(make_problem(grid, half_square, np.abs, T=0.2))
        with tempfile.TemporaryDirectory() as tmp:
            path = history.to_csv(Path(tmp) / "history.csv")
            self.assertTrue((Path(tmp) / "history.meta").exists())
            back = SnapshotHistory.from_csv(path)
        np.testing.assert_array_equal(back.values, history.values)
        np.testing.assert_array_equal(back.trust_radius, history.trust_radius)
        self.assertEqual(back.scheme, "godunov")
        self.assertEqual(back.dt, history.dt)

    def test_restrict_history(self):
        grid = grid_from_spacing(-3.0, 3.0, 0.1)
        history = solve(make_problem(grid, half_square, np.abs, T=0.2))
        sub = history.restrict(-1.0, 1.0)
        self.assertEqual(sub.grid.n, 21)
        np.testing.assert_array_equal(sub.values[:, 0], history.values[:, 20])


class SemiLagrangianUpdateTests(SimpleTestCase):
    def test_minimum_over_the_reachable_interval(self):
        grid = grid_from_spacing(-1.0, 1.0, 0.1)
        values = np.abs(grid.nodes)
        result = semi_lagrangian_update(values, grid, np.full(grid.n, 0.25), np.zeros(grid.n), 1.0)
        np.testing.assert_allclose(result, np.maximum(np.abs(grid.nodes) - 0.25, 0.0), atol=1e-12)

    def test_running_cost_is_added(self):
        grid = grid_from_spacing(-1.0, 1.0, 0.1)
        values = np.zeros(grid.n)
        result = semi_lagrangian_update(values, grid, np.full(grid.n, 0.1), np.ones(grid.n), 0.5)
        np.testing.assert_allclose(result, 0.5)

    def test_running_cost_uses_the_trapezoid_rule(self):
        grid = grid_from_spacing(-1.0, 1.0, 0.1)
        values = np.zeros(grid.n)
        result = semi_lagrangian_update(values, grid, np.full(grid.n, 0.1), grid.nodes.copy(), 0.1)
        # moving left by 0.1 pays 0.1 * (x + (x - 0.1)) / 2
        np.testing.assert_allclose(result[1:], 0.1 * grid.nodes[1:] - 0.005, atol=1e-12)
        self.assertAlmostEqual(result[0], -0.1)


class ComparisonTests(SimpleTestCase):
    schemes = (Scheme.GODUNOV, Scheme.LAX_FRIEDRICHS, Scheme.SEMI_LAGRANGIAN)

    def setUp(self):
        self.grid = grid_from_spacing(-6.0, 6.0, 0.05)

    def test_ordered_data_give_ordered_solutions(self):
        def above(x):
            return half_square(x) + 0.25 * (1.0 + np.sin(3.0 * x))

        for scheme in self.schemes:
            with self.subTest(scheme=scheme.value):
                lower = solve(make_problem(self.grid, half_square, np.abs, T=1.0, scheme=scheme))
                upper = solve(make_problem(self.grid, above, np.abs, T=1.0, scheme=scheme))
                for k in range(len(lower)):
                    mask = lower.trust_mask(k)
                    self.assertTrue(np.all(lower.values[k, mask] <= upper.values[k, mask] + 1e-12))

    def test_constants_are_preserved(self):
        for scheme in self.schemes:
            with self.subTest(scheme=scheme.value):
                history = solve(make_problem(self.grid, 5.0, 0.0, T=1.0, scheme=scheme))
                np.testing.assert_array_equal(history.values, 5.0)

    def test_data_outside_a_ball_stay_outside_the_numerical_cone(self):
        r = 4.0

        def bumped(x):
            return half_square(x) + np.maximum(np.abs(x) - r, 0.0) ** 2

        for scheme in self.schemes:
            with self.subTest(scheme=scheme.value):
                plain = solve(make_problem(self.grid, half_square, np.abs, T=1.0, scheme=scheme))
                other = solve(make_problem(self.grid, bumped, np.abs, T=1.0, scheme=scheme))
                for k, t in enumerate(plain.times):
                    # one cell of influence per step
                    radius = r - (round(t / plain.dt) + 1) * self.grid.dx
                    inside = self.grid.mask(-radius, radius)
                    np.testing.assert_array_equal(plain.values[k, inside], other.values[k, inside])
                outside = self.grid.nodes > r + 1.0
                self.assertFalse(np.array_equal(plain.values[-1, outside], other.values[-1, outside]))


class SupersolutionTests(SimpleTestCase):
    def test_dominates_and_grows_outward(self):
        grid = grid_from_spacing(-3.0, 3.0, 0.1)
        u0 = ScalarField.from_function(grid, np.sin)
        l = ScalarField.from_function(grid, np.abs)
        c = 0.5
        v = build_supersolution(u0, l, c, unit_speed)
        self.assertTrue(np.all(v.values >= u0.values))
        g = l.values + c
        slopes = np.diff(v.values) / grid.dx
        right = grid.nodes[:-1] >= -1e-12
        left = grid.nodes[1:] <= 1e-12
        self.assertTrue(np.all(slopes[right] >= g[:-1][right] - 1e-9))
        self.assertTrue(np.all(-slopes[left] >= g[1:][left] - 1e-9))

    def test_negative_c(self):
        grid = grid_from_spacing(-1.0, 1.0, 0.1)
        field = ScalarField.from_function(grid, np.abs)
        with self.assertRaises(ValidationError):
            build_supersolution(field, field, -1.0, unit_speed)


class SandwichTests(SimpleTestCase):
    def setUp(self):
        self.grid = grid_from_spacing(-3.0, 3.0, 0.05)
        self.history = solve(make_problem(self.grid, half_square, np.abs, T=1.0))
        self.v = ScalarField.from_function(self.grid, half_square)

    def test_stationary_solution_is_sandwiched(self):
        report = sandwich_check(self.history, self.v, self.v, c=0.0)
        self.assertTrue(report.passed)
        self.assertIn("verdict: pass", report.as_block().render())

    def test_lower_bound_too_high(self):
        report = sandwich_check(self.history, self.v.shifted(1.0), self.v, c=0.0)
        self.assertFalse(report.passed)
        self.assertEqual(report.failures[0].t, 0.0)
