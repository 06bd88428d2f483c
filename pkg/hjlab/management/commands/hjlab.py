import logging
from pathlib import Path

from celery import group
from django.core.management.base import BaseCommand, CommandError

from hjlab.control import ControlProblem, synthesize_trajectory, value_function_dp
from hjlab.ergodic import certify, dirichlet_limit, extract_aubry, solve_perron_min
from hjlab.exceptions import HJLabError
from hjlab.experiments import RunContext, artifact_root, list_experiments, run_experiment
from hjlab.hamiltonian import audit_assumptions
from hjlab.reports import ReportBlock
from hjlab.runconfig import CONFIG_KEYS, parse_config
from hjlab.tasks import execute_experiment

logger = logging.getLogger(__name__)

# fractions of the domain half-width used as Dirichlet radii by `ergodic`
RADIUS_FRACTIONS = (0.5, 2.0 / 3.0, 5.0 / 6.0, 1.0)


class Command(BaseCommand):
    help = 'Run and inspect the Hamilton-Jacobi experiment registry.'

    def add_arguments(self, parser):
        sub = parser.add_subparsers(dest='subcommand', required=True)

        listing = sub.add_parser('list', help='List registry entries.')
        listing.add_argument('--tag')

        run = sub.add_parser('run', help='Run one registry entry.')
        run.add_argument('experiment_id')
        run.add_argument('--config', help='key = value config file')
        self._add_config_flags(run)
        run.add_argument('--artifact-root', dest='artifact_root')

        run_all = sub.add_parser('run-all', help='Run every registry entry.')
        run_all.add_argument('--tag')
        run_all.add_argument('--parallel', action='store_true', help='dispatch entries as a Celery group')
        run_all.add_argument('--artifact-root', dest='artifact_root')

        for name, text in (
            ('audit', 'Audit the Hamiltonian and running cost of a config.'),
            ('ergodic', 'Solve the ergodic problem of a config.'),
            ('control', 'Value function and optimal trajectory of a config.'),
        ):
            command = sub.add_parser(name, help=text)
            command.add_argument('config')
            self._add_config_flags(command)
            command.add_argument('--artifact-root', dest='artifact_root')

    def _add_config_flags(self, parser):
        for key in CONFIG_KEYS:
            parser.add_argument(f"--{key.replace('_', '-')}", dest=key, default=None)

    def handle(self, *args, **options):
        handler = getattr(self, f"handle_{options['subcommand'].replace('-', '_')}")
        try:
            return handler(options)
        except HJLabError as e:
            logger.error(f"hjlab {options['subcommand']} failed: {type(e).__name__}: {e}")
            raise CommandError(f'{type(e).__name__}: {e}')

    def _flags(self, options):
        return {key: options[key] for key in CONFIG_KEYS if options.get(key) is not None}

    def _context(self, options):
        spec = parse_config(options['config'], self._flags(options))
        root = Path(options.get('artifact_root') or artifact_root())
        directory = root / spec.id
        directory.mkdir(parents=True, exist_ok=True)
        return RunContext(spec, dict(spec.defaults), directory)

    def _print_block(self, block):
        self.stdout.write(block.render(), ending='')

    def handle_list(self, options):
        for spec in list_experiments(tag=options.get('tag')):
            self.stdout.write(f"{spec.id:<18} {','.join(spec.tags):<40} {spec.description}")

    def handle_run(self, options):
        spec = parse_config(options.get('config'), self._flags(options), options['experiment_id'])
        result = run_experiment(spec.id, root=options.get('artifact_root'), spec=spec)
        self._report_result(result.experiment_id, result.summary_lines(), result.artifact_dir, result.exit_status)
        if result.exit_status:
            raise CommandError(f'{spec.id}: expected outcomes failed', returncode=result.exit_status)

    def handle_run_all(self, options):
        specs = list_experiments(tag=options.get('tag'))
        root = options.get('artifact_root')
        if options['parallel']:
            job = group(execute_experiment.s(spec.id, None) for spec in specs)
            results = job.apply_async().get()
            outcomes = [(r['experiment_id'], r['summary'], r['artifact_dir'], r['exit_status']) for r in results]
        else:
            outcomes = []
            for spec in specs:
                result = run_experiment(spec.id, root=root, spec=spec)
                outcomes.append(
                    (result.experiment_id, result.summary_lines(), result.artifact_dir, result.exit_status)
                )
        failed = []
        for experiment_id, summary, directory, exit_status in outcomes:
            self._report_result(experiment_id, summary, directory, exit_status)
            if exit_status:
                failed.append(experiment_id)
        if failed:
            raise CommandError(f"failed experiments: {', '.join(failed)}")

    def _report_result(self, experiment_id, summary, directory, exit_status):
        for line in summary:
            self.stdout.write(line)
        verdict = self.style.SUCCESS('PASS') if exit_status == 0 else self.style.ERROR('FAIL')
        self.stdout.write(f'{experiment_id}: {verdict} (artifacts in {directory})')

    def handle_audit(self, options):
        ctx = self._context(options)
        audit = audit_assumptions(ctx.hamiltonian(), ctx.cost(normalized=True), ctx.audit_box())
        self._print_block(audit.as_block(f'audit {ctx.spec.id}'))
        if not audit.passed:
            names = ', '.join(v.name for v in audit.failures)
            raise CommandError(f'{ctx.spec.id}: audit failed ({names})')

    def handle_ergodic(self, options):
        ctx = self._context(options)
        H = ctx.hamiltonian()
        c = ctx.config['c']
        if c > 0:
            grid = ctx.grid
            half_width = min(-grid.x_min, grid.x_max)
            radii = [fraction * half_width for fraction in RADIUS_FRACTIONS]
            l = ctx.spec.running_cost
            limit = dirichlet_limit(H, l, c, radii, grid.dx, window=ctx.config['window'])
            self._print_block(limit.as_block())
            sol = limit.solution
        else:
            l = ctx.cost(normalized=True)
            aubry = extract_aubry(l)
            self._print_block(aubry.as_block())
            sol = solve_perron_min(H, l, aubry)
        sol = certify(sol, H, l)
        path = sol.to_csv(ctx.directory / 'ergodic.csv')
        self._print_block(sol.metadata())
        self.stdout.write(f'wrote {path}')

    def handle_control(self, options):
        ctx = self._context(options)
        if ctx.spec.initial is None:
            raise CommandError(f'{ctx.spec.id} has no terminal cost to control against')
        problem = ControlProblem(ctx.spec.speed, ctx.spec.running_cost, ctx.spec.initial, ctx.config['T'])
        value = value_function_dp(problem, ctx.grid, cfl=ctx.config['cfl'])
        x0 = ctx.config['x0']
        trajectory = synthesize_trajectory(value, x0)
        path = trajectory.to_csv(ctx.directory / 'trajectory.csv')
        self._print_block(ReportBlock('control', {
            'x0': x0,
            'horizon': problem.horizon,
            'value': value.at(x0),
            'trajectory_cost': trajectory.cost,
            'terminal_point': float(trajectory.positions[-1]),
        }))
        self.stdout.write(f'wrote {path}')
