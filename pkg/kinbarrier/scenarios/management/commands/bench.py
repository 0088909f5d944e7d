from django.core.management.base import BaseCommand, CommandError

from kinbarrier.analysis.downloads import dump_json
from kinbarrier.scenarios.forms import ConfigurationError, load_scenario
from kinbarrier.scenarios.tasks import perform_benchmark
from kinbarrier.utils import DomainError

from .run import CONFIGURATION_ERROR_RETURNCODE


class Command(BaseCommand):
    help = "Time the gain quadrature on the grid of a scenario for several worker counts."

    def add_arguments(self, parser):
        parser.add_argument('cfg', type=str, help='Scenario configuration file.')

        parser.add_argument(
            '-r',
            '--repeats',
            type=int,
            default=3,
            help='Timings per worker count; the best one is reported.',
        )

        parser.add_argument(
            '-w',
            '--workers',
            type=int,
            nargs='+',
            default=[1, 2, 4],
            help='Worker counts to compare.',
        )

        parser.add_argument(
            '--json',
            action='store_true',
            dest='json',
            help='Write the report to standard output as JSON.',
        )

    def handle(self, *args, **options):
        try:
            config = load_scenario(options['cfg'])
        except ConfigurationError as exc:
            raise CommandError(dump_json(exc.errors), returncode=CONFIGURATION_ERROR_RETURNCODE) from exc
        if options['repeats'] < 1 or min(options['workers']) < 1:
            raise CommandError("Repeats and worker counts must be positive.")

        try:
            report = perform_benchmark(config, workers=options['workers'], repeats=options['repeats'])
        except DomainError as exc:
            raise CommandError(f"Benchmark of '{config.name}' aborted: {exc}") from exc

        if options['json']:
            self.stdout.write(dump_json(report))
            return
        self.stdout.write(self.style.NOTICE(f"Gain quadrature for '{config.name}' on {report['cells']} cells:"))
        for row in report['rows']:
            self.stdout.write(f"  {row['workers']:3d} worker(s): {row['cells_per_second']:.4g} cells/s")
        self.stdout.write(f"  doubling Nsigma costs x{report['nsigma_cost_ratio']:.2f} per cell")
        if not report['deterministic']:
            self.stdout.write(self.style.WARNING("Results differ between repeats or worker counts."))
        if not report['monotone']:
            self.stdout.write(self.style.WARNING("Throughput does not grow with the number of workers."))
