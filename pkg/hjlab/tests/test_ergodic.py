import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from hjlab.cauchy import CauchyProblem, SnapshotHistory, solve
from hjlab.ergodic import (
    AubrySet,
    ErgodicSolution,
    Normalization,
    Provenance,
    certify,
    compare_on_aubry,
    dirichlet_limit,
    estimate_ergodic_constant,
    extract_aubry,
    fast_sweep,
    gradient_bound_check,
    growth_diagnostics,
    long_time_limit,
    solve_dirichlet,
    solve_perron_min,
)
from hjlab.exceptions import PreconditionError, TrustRegionError, ValidationError
from hjlab.fields import ScalarField, grid_from_spacing
from hjlab.hamiltonian import HamiltonianSpec


def unit_speed(x):
    return np.ones_like(np.asarray(x, dtype=np.float64))


UNIT = HamiltonianSpec.eikonal(unit_speed, window=(-10.0, 10.0))


class FastSweepTests(SimpleTestCase):
    def test_distance_to_pinned_ends(self):
        pinned = np.array([True, False, False, False, True])
        np.testing.assert_array_equal(fast_sweep(np.ones(5), pinned), [0.0, 1.0, 2.0, 1.0, 0.0])


class DirichletTests(SimpleTestCase):
    def test_closed_form_on_a_ball(self):
        c = 1.0
        V = solve_dirichlet(UNIT, np.abs, c, 2.0, 0.01)
        x = V.nodes
        closed = 0.5 * (4.0 - x ** 2) + c * (2.0 - np.abs(x))
        self.assertLessEqual(float(np.max(np.abs(V.values - closed))), 0.05)
        self.assertEqual(V.values[0], 0.0)
        self.assertEqual(V.values[-1], 0.0)

    def test_negative_c(self):
        with self.assertRaises(ValidationError):
            solve_dirichlet(UNIT, np.abs, -0.5, 2.0, 0.01)

    def test_negative_right_hand_side(self):
        with self.assertRaises(ValidationError):
            solve_dirichlet(UNIT, lambda x: np.abs(x) - 5.0, 1.0, 2.0, 0.01)

    def test_limit_stabilizes(self):
        limit = dirichlet_limit(UNIT, np.abs, 1.0, (2.0, 3.0, 4.0), 0.01, window=(-1.0, 1.0))
        self.assertEqual(len(limit.differences), 2)
        self.assertLessEqual(max(limit.differences), 0.02)
        self.assertTrue(limit.stabilized)
        sol = limit.solution
        self.assertEqual(sol.provenance, Provenance.DIRICHLET_LIMIT)
        self.assertAlmostEqual(float(np.interp(0.0, sol.v.nodes, sol.v.values)), 0.0)
        inside = sol.v.grid.mask(-1.0, 1.0)
        xs = sol.v.nodes[inside]
        gap = np.abs(sol.v.values[inside] - (-0.5 * xs ** 2 - np.abs(xs)))
        self.assertLessEqual(float(gap.max()), 0.05)

    def test_radii_must_increase(self):
        with self.assertRaises(ValidationError):
            dirichlet_limit(UNIT, np.abs, 1.0, (3.0, 2.0), 0.01)

    def test_window_must_fit_the_smallest_ball(self):
        with self.assertRaises(ValidationError):
            dirichlet_limit(UNIT, np.abs, 1.0, (2.0, 3.0), 0.01, window=(-3.0, 3.0))


class AubryTests(SimpleTestCase):
    def test_single_point(self):
        l = ScalarField.from_function(grid_from_spacing(-3.0, 3.0, 0.01), np.abs)
        aubry = extract_aubry(l)
        self.assertEqual(aubry.indices.tolist(), [300])
        self.assertAlmostEqual(aubry.R_A, 0.01)
        self.assertAlmostEqual(aubry.eps_A, 0.02, places=9)
        self.assertFalse(aubry.degenerate)

    def test_zeros_between_nodes(self):
        l = ScalarField.from_function(grid_from_spacing(-7.0, 7.0, 0.01), lambda x: np.abs(np.sin(x)))
        aubry = extract_aubry(l)
        self.assertEqual(len(aubry.components), 5)
        for (a, b), k in zip(aubry.components, range(-2, 3)):
            center = 0.5 * (l.nodes[a] + l.nodes[b])
            self.assertLessEqual(abs(center - k * np.pi), 0.01)

    def test_local_minimum_above_the_minimum_is_not_admitted(self):
        grid = grid_from_spacing(-3.0, 3.0, 0.01)
        l = ScalarField.from_function(grid, lambda x: np.minimum(np.abs(x), np.abs(x - 2.0) + 0.004))
        aubry = extract_aubry(l, tol=1e-12)
        self.assertEqual(aubry.indices.tolist(), [300])
        v = solve_perron_min(UNIT, l, aubry).v
        # travel cost from 0 to 2, not a second zero
        self.assertAlmostEqual(float(v.values[500]), 1.004, delta=0.02)

    def test_constant_cost_is_degenerate(self):
        l = ScalarField.from_function(grid_from_spacing(-1.0, 1.0, 0.1), 1.0)
        aubry = extract_aubry(l)
        self.assertTrue(aubry.degenerate)
        self.assertIsNone(aubry.eps_A)
        self.assertIn("degenerate: pass", aubry.as_block().render())


class PerronTests(SimpleTestCase):
    def setUp(self):
        self.grid = grid_from_spacing(-3.0, 3.0, 0.01)
        self.l = ScalarField.from_function(self.grid, np.abs)
        self.aubry = extract_aubry(self.l)
        self.sol = certify(solve_perron_min(UNIT, self.l, self.aubry), UNIT, self.l)

    def test_matches_half_square(self):
        v = self.sol.v
        self.assertLessEqual(float(np.max(np.abs(v.values - 0.5 * v.nodes ** 2))), 0.05)
        self.assertTrue(np.all(v.values >= 0))
        self.assertEqual(v.values[300], 0.0)
        self.assertEqual(self.sol.normalization, Normalization.ZERO_ON_AUBRY)

    def test_residual_and_checks(self):
        self.assertLessEqual(self.sol.residual["sup"], 2 * self.grid.dx)
        self.assertTrue(gradient_bound_check(self.sol, self.l, unit_speed).passed)
        growth = growth_diagnostics(self.sol, self.aubry, UNIT.m_inv)
        self.assertTrue(growth.passed)
        self.assertFalse(growth.skipped)

    def test_discrete_fixed_point(self):
        v = self.sol.v.values
        free = ~self.aubry.mask
        free[[0, -1]] = False
        neighbours = np.minimum(np.roll(v, 1), np.roll(v, -1))
        np.testing.assert_allclose(v[free], (neighbours + self.grid.dx * self.l.values)[free], atol=1e-12)

    def test_stationary_under_the_evolution(self):
        problem = CauchyProblem(UNIT, self.l, self.sol.v, T=1.0, snapshot_count=None)
        history = solve(problem)
        mask = history.trust_mask(len(history) - 1)
        drift = np.abs(history.values[-1] - self.sol.v.values)[mask]
        self.assertLessEqual(float(drift.max()), self.grid.dx)

    def test_monotone_in_the_running_cost(self):
        larger = ScalarField.from_function(self.grid, lambda x: np.abs(x) + 0.5 * x ** 2)
        v = solve_perron_min(UNIT, larger, extract_aubry(larger)).v
        self.assertTrue(np.all(v.values >= self.sol.v.values))
        self.assertGreater(v.values[500], self.sol.v.values[500])

    def test_empty_aubry_set(self):
        empty = AubrySet(self.grid, np.array([], dtype=int), [], 0.0, None, 0.0, True)
        with self.assertRaises(PreconditionError):
            solve_perron_min(UNIT, self.l, empty)

    def test_needs_eikonal(self):
        H = HamiltonianSpec.custom(lambda x, p: 0.5 * p ** 2, 1.0, 5.0, lambda r: r, lambda s: s)
        with self.assertRaises(ValidationError):
            solve_perron_min(H, self.l, self.aubry)

    def test_growth_skipped_when_degenerate(self):
        flat = ScalarField.from_function(self.grid, 0.0)
        report = growth_diagnostics(self.sol, extract_aubry(flat), UNIT.m_inv)
        self.assertTrue(report.skipped)

    def test_csv_round_trip(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = self.sol.to_csv(Path(tmp) / "perron.csv")
            back = ErgodicSolution.from_csv(path)
        np.testing.assert_array_equal(back.v.values, self.sol.v.values)
        self.assertEqual(back.provenance, Provenance.PERRON_MIN)
        self.assertEqual(back.residual, self.sol.residual)

    def test_compare_on_aubry(self):
        lower = self.sol.v.shifted(-1.0)
        self.assertTrue(compare_on_aubry(self.sol, lower, self.aubry, (-2.0, 2.0)).passed)
        bumped = self.sol.v.with_values(self.sol.v.values - np.exp(-10 * (self.grid.nodes - 1.0) ** 2))
        report = compare_on_aubry(self.sol, bumped, self.aubry, (-2.0, 2.0))
        self.assertFalse(report.passed)
        self.assertAlmostEqual(report.witness["x"], 1.0)


def linear_history(rate, radius=2.0):
    grid = grid_from_spacing(-2.0, 2.0, 0.1)
    times = np.linspace(0.0, 10.0, 11)
    values = np.array([np.full(grid.n, 2.0 - rate * t) for t in times])
    return SnapshotHistory(grid, times, values, np.full(times.size, radius), center=0.0)


class LongTimeTests(SimpleTestCase):
    def test_ergodic_constant_from_the_slope(self):
        self.assertAlmostEqual(estimate_ergodic_constant(linear_history(0.7), (-0.5, 0.5), 0.0), 0.7)

    def test_window_outside_certified_interval(self):
        with self.assertRaises(TrustRegionError):
            estimate_ergodic_constant(linear_history(0.7, radius=0.2), (-0.5, 0.5), 0.0)

    def test_needs_three_slices(self):
        with self.assertRaises(ValidationError):
            estimate_ergodic_constant(linear_history(0.7), (-0.5, 0.5), 9.5)

    def test_long_time_limit_keeps_the_certified_interval(self):
        limit = long_time_limit(linear_history(0.5, radius=0.5), c=0.5)
        self.assertEqual(limit.v.grid.n, 11)
        self.assertAlmostEqual(limit.v.grid.x_min, -0.5)
        np.testing.assert_allclose(limit.v.values, 2.0)
        self.assertEqual(limit.provenance, Provenance.LONG_TIME_LIMIT)
