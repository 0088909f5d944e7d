from django.core.management.base import BaseCommand, CommandError

from kinbarrier.analysis.downloads import dump_json
from kinbarrier.analysis.suites import run_suite


class Command(BaseCommand):
    help = "Run the closed-form and geometry suite (no PDE solve). Exit status 0 iff all entries pass."

    def add_arguments(self, parser):
        parser.add_argument(
            '--json',
            action='store_true',
            dest='json',
            help='Write all verdicts to standard output as one JSON document.',
        )

        parser.add_argument(
            '--seed',
            type=int,
            default=0,
            help='Seed of the random samples.',
        )

    def handle(self, *args, **options):
        verdicts = run_suite(seed=options['seed'])
        passed = all(v['pass'] for v in verdicts)

        if options['json']:
            self.stdout.write(dump_json(dict(passed=passed, seed=options['seed'], verdicts=verdicts)))
        else:
            for v in verdicts:
                if v['pass']:
                    self.stdout.write(self.style.SUCCESS(f"{v['name']}: pass ({v['elapsed']:.3f} s)"))
                else:
                    self.stdout.write(self.style.ERROR(f"{v['name']}: FAIL at {v.get('location')}"))

        if not passed:
            failed = ', '.join(f"{v['name']} ({v['location'] or v.get('error')})" for v in verdicts if not v['pass'])
            raise CommandError(f"Verification failed: {failed}")
