import tempfile
from dataclasses import replace
from pathlib import Path
from unittest.mock import Mock

import numpy as np
from django.test import SimpleTestCase, override_settings

from hjlab.exceptions import ConfigError, PreconditionError, UnknownExperimentError
from hjlab.experiments import (
    ENTRIES,
    S,
    build_registry,
    get_experiment,
    limit_shift,
    list_experiments,
    positive_c_profile,
    run_experiment,
)
from hjlab.fields import read_field_csv

EXPECTED_IDS = [
    'ex-5-1-dirichlet',
    'ex-5-1-perron',
    'ex-5-2',
    'ex-5-3',
    'ex-5-4',
    'ex-5-5',
    'ex-thm1-4',
    'ex-remark-4-2',
]


class RegistryTests(SimpleTestCase):
    def test_every_entry_is_registered(self):
        self.assertEqual([spec.id for spec in list_experiments()], EXPECTED_IDS)

    def test_tag_filter(self):
        ids = [spec.id for spec in list_experiments(tag='ergodic')]
        self.assertEqual(ids, ['ex-5-1-dirichlet', 'ex-5-1-perron', 'ex-remark-4-2'])

    def test_unknown_experiment(self):
        with self.assertRaises(UnknownExperimentError):
            get_experiment('ex-0-0')

    @override_settings(HJLAB_REGISTRY_ENABLED=False)
    def test_disabled_registry(self):
        self.assertEqual(build_registry(), {})
        self.assertEqual(list_experiments(), [])
        with self.assertRaises(UnknownExperimentError):
            get_experiment('ex-5-2')

    def test_evolution_entries_have_initial_data(self):
        for spec in ENTRIES:
            if 'evolution' in spec.tags and spec.id != 'ex-thm1-4':
                self.assertIsNotNone(spec.initial, spec.id)


class ClosedFormTests(SimpleTestCase):
    def test_profile_solves_the_positive_c_problem(self):
        lam = 1.0
        v = positive_c_profile(lam)
        x = np.linspace(-3.0, 3.0, 601)
        slopes = np.gradient(v(x), x)
        np.testing.assert_allclose(np.abs(slopes[1:-1]), np.abs(x[1:-1]) + lam, atol=1e-2)

    def test_limit_shift(self):
        x = np.linspace(-3.0, 3.0, 601)
        v = Mock(nodes=x, values=0.5 * x ** 2)
        # u0 + v = x^2 + sin x, minimal near x = -0.45
        shift = limit_shift(get_experiment('ex-5-3').initial, v)
        self.assertLess(shift, 0.0)
        self.assertAlmostEqual(shift, -0.2325, places=3)

    def test_S_is_odd(self):
        self.assertEqual(S(2.0), 2.0)
        self.assertEqual(S(-2.0), -2.0)


class RunExperimentTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)

    def test_perron_entry_passes(self):
        result = run_experiment('ex-5-1-perron', root=self.root)
        self.assertEqual(result.exit_status, 0, result.summary_lines())
        directory = self.root / 'ex-5-1-perron'
        self.assertEqual(result.artifact_dir, directory)
        summary = (directory / 'summary.txt').read_text().splitlines()
        self.assertIn('summary: closed_form PASS', summary)
        self.assertTrue(all(line.endswith('PASS') for line in summary))
        self.assertIn('[config]', (directory / 'report.txt').read_text())
        v = read_field_csv(directory / 'perron_min.csv')
        self.assertEqual(v.grid.n, 601)

    def test_periodic_entry_expects_the_compactness_failure(self):
        result = run_experiment('ex-remark-4-2', root=self.root)
        self.assertTrue(result.passed, result.summary_lines())
        report = (self.root / 'ex-remark-4-2' / 'report.txt').read_text()
        self.assertIn('compactness.verdict: fail', report)

    def test_runs_are_deterministic(self):
        first = Path(self.tmp.name) / 'a'
        second = Path(self.tmp.name) / 'b'
        run_experiment('ex-5-1-perron', root=first)
        run_experiment('ex-5-1-perron', root=second)
        self.assertEqual(
            (first / 'ex-5-1-perron' / 'perron_min.csv').read_bytes(),
            (second / 'ex-5-1-perron' / 'perron_min.csv').read_bytes(),
        )

    def test_overrides_are_validated(self):
        with self.assertRaises(ConfigError):
            run_experiment('ex-5-1-perron', overrides={'cfl': 1.5}, root=self.root)

    def test_failed_outcome_sets_the_exit_status(self):
        spec = replace(get_experiment('ex-5-1-perron'), runner=lambda ctx: ctx.expect('impossible', False))
        with self.assertLogs('hjlab.experiments', 'WARNING'):
            result = run_experiment(spec.id, root=self.root, spec=spec)
        self.assertEqual(result.exit_status, 1)
        self.assertEqual(result.summary_lines(), ['summary: impossible FAIL'])

    def test_errors_are_logged_and_raised(self):
        spec = replace(get_experiment('ex-5-1-perron'), runner=Mock(side_effect=PreconditionError('boom')))
        with self.assertLogs('hjlab.experiments', 'ERROR') as logs:
            with self.assertRaises(PreconditionError):
                run_experiment(spec.id, root=self.root, spec=spec)
        self.assertIn('boom', logs.output[0])
