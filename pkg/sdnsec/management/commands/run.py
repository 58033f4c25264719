import dataclasses
import logging

from django.core.management.base import BaseCommand, CommandError

from sdnsec import reports
from sdnsec.exceptions import SdnsecError
from sdnsec.models import SimulationRun
from sdnsec.scenario import load_scenario
from sdnsec.simnet import audit, run_scenario

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = "Run a scenario, validate its reports and write the trace, verdicts and counters."

    def add_arguments(self, parser):
        parser.add_argument('scenario', help="Scenario file, or the name of a bundled scenario.")
        parser.add_argument('--out', help="Directory for trace.jsonl, verdicts.csv and counters.csv.")
        parser.add_argument('--seed', type=int, help="Override the scenario seed.")
        parser.add_argument('--format', choices=reports.FORMATS, default='table')
        parser.add_argument('--record', action='store_true', help="Store the run in the database.")

    def handle(self, *args, **options):
        fmt = options['format']
        if fmt == 'xlsx' and not options['out']:
            raise CommandError("--format xlsx needs --out", returncode=2)
        try:
            scenario = load_scenario(options['scenario'])
            if options['seed'] is not None:
                scenario = dataclasses.replace(scenario, seed=options['seed'])
            trace = run_scenario(scenario)
            summary = audit(trace)
        except SdnsecError as exc:
            raise CommandError(str(exc), returncode=2) from None

        if options['out']:
            written = reports.write_run_outputs(options['out'], trace, summary, fmt=fmt)
            logger.info(f"Wrote {', '.join(str(p) for p in written)}")
        self.stdout.write(reports.render_summary(summary, 'csv' if fmt == 'csv' else 'table'), ending='')

        if options['record']:
            run = SimulationRun.record(summary, path=scenario.source)
            self.stdout.write(f"Recorded run {run.pk}")

        if not summary.passed:
            raise CommandError(f"{len(summary.failures)} check(s) failed for {scenario.name}", returncode=1)
