"""
Management command for running a scenario given by a configuration file.
"""
import logging

from django.core.management.base import BaseCommand, CommandError

from kinbarrier.analysis.downloads import dump_json
from kinbarrier.barriers.vacuum import BarrierException
from kinbarrier.scenarios.forms import ConfigurationError, load_scenario
from kinbarrier.scenarios.tasks import perform_scenario
from kinbarrier.solver.iteration import SolverException
from kinbarrier.utils import DomainError

_log = logging.getLogger(__name__)

CONFIGURATION_ERROR_RETURNCODE = 2


class Command(BaseCommand):
    help = """Run a scenario.

    Builds the barriers, certifies the beginning condition, solves with the
    Kaniel-Shinbrot iteration and evaluates the configured checks. Artifacts
    are written to <output>/<scenario name>/.

    Exit status is 0 if every verdict passes, 1 if a check fails and 2 if
    the configuration is rejected.
    """

    def add_arguments(self, parser):
        parser.add_argument(
            'cfg',
            type=str,
            help='Scenario configuration file.'
        )

        parser.add_argument(
            '-o',
            '--output',
            dest='output',
            default=None,
            help='Artifact root directory. Default: as configured, else KB_OUTPUT_DIR.',
        )

        parser.add_argument(
            '-w',
            '--workers',
            dest='workers',
            type=int,
            default=None,
            help='Number of workers. Default: as configured, else KB_WORKERS.',
        )

    def handle(self, *args, **options):
        try:
            config = load_scenario(options['cfg'])
        except ConfigurationError as exc:
            raise CommandError(dump_json(exc.errors), returncode=CONFIGURATION_ERROR_RETURNCODE) from exc
        if options['workers'] is not None and options['workers'] < 1:
            raise CommandError("Number of workers must be positive.", returncode=CONFIGURATION_ERROR_RETURNCODE)

        self.stdout.write(self.style.NOTICE(f"Running scenario '{config.name}' ({config.mode})."))
        try:
            result = perform_scenario(config, output_directory=options['output'], workers=options['workers'])
        except (BarrierException, SolverException, DomainError) as exc:
            _log.error("Scenario '%s' aborted: %s", config.name, exc)
            raise CommandError(f"Scenario '{config.name}' aborted: {exc}") from exc

        for verdict in result['verdicts']:
            if verdict.get('skipped'):
                self.stdout.write(self.style.WARNING(f"  {verdict['name']}: skipped ({verdict.get('reason')})"))
            elif verdict['pass']:
                self.stdout.write(self.style.SUCCESS(f"  {verdict['name']}: pass"))
            else:
                self.stdout.write(self.style.ERROR(f"  {verdict['name']}: FAIL"))

        if not result['passed']:
            failed = [verdict for verdict in result['verdicts'] if not verdict['pass']]
            raise CommandError(f"Scenario '{config.name}' failed:\n{dump_json(failed)}")
        self.stdout.write(self.style.SUCCESS(f"All verdicts passed. Artifacts in '{result['directory']}'."))
