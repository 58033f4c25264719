import logging
from collections import Counter
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from sdnsec import pvc, reports
from sdnsec.exceptions import SdnsecError
from sdnsec.scenario import load_scenario
from sdnsec.simnet import EventTrace, Simulation, collect_reports, format_detail

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = "Validate the reports of a stored trace against the controller state of its scenario."

    def add_arguments(self, parser):
        parser.add_argument('scenario', help="Scenario the trace was produced from.")
        parser.add_argument('trace', help="trace.jsonl written by 'run --out'.")
        parser.add_argument('--format', choices=('table', 'csv'), default='table')

    def handle(self, *args, **options):
        try:
            text = Path(options['trace']).read_text(encoding='utf-8')
        except OSError as exc:
            raise CommandError(f"cannot read {options['trace']}: {exc.strerror or exc}", returncode=2) from None
        try:
            scenario = load_scenario(options['scenario'])
            trace = EventTrace.from_jsonl(text)
            # Re-running rebuilds the keys and flow records the reports refer to.
            controller = Simulation(scenario).run().controller
        except SdnsecError as exc:
            raise CommandError(str(exc), returncode=2) from None

        controller.reset_windows()
        rows = []
        totals = Counter()
        for label, report in collect_reports(trace).reports:
            verdict = pvc.validate_header(report, controller)
            totals[verdict.outcome.value] += 1
            rows.append([label, report.switch, f"{report.time_ms:g}", verdict.outcome.value,
                         '-'.join(format_detail(d) for d in verdict.detail)])

        columns = ['Flow', 'Switch', 'Time (ms)', 'Outcome', 'Traversed']
        render = reports.render_csv if options['format'] == 'csv' else reports.render_table
        self.stdout.write(render(columns, rows), ending='')
        logger.info(f"Validated {sum(totals.values())} reports: {dict(totals)}")

        bad = sum(count for outcome, count in totals.items() if outcome != pvc.Outcome.VALID.value)
        if bad:
            raise CommandError(f"{bad} of {sum(totals.values())} reports failed validation", returncode=1)
