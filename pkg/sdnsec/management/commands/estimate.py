from django.core.management.base import BaseCommand, CommandError

from sdnsec import reports
from sdnsec.pvc import estimate_validation_overhead


class Command(BaseCommand):
    help = "Estimate the report traffic and PVC work for validating every packet of a data center."

    def add_arguments(self, parser):
        parser.add_argument('--hosts', type=int, default=80_000)
        parser.add_argument('--access-gbps', type=float, default=10)
        parser.add_argument('--utilization', type=float, default=0.01, help="Fraction of access capacity in use.")
        parser.add_argument('--packet-bytes', type=float, default=850)
        parser.add_argument('--path-len', type=int, default=5, help="Switches per path.")
        parser.add_argument('--report-bytes', type=int, help="Bytes reported per packet (default from settings).")
        parser.add_argument('--cpu-mpps', type=float, help="Validation rate of one CPU in Mpps.")
        parser.add_argument('--format', choices=('table', 'csv'), default='table')

    def handle(self, *args, **options):
        try:
            estimate = estimate_validation_overhead(
                options['hosts'], options['access_gbps'], options['utilization'], options['packet_bytes'],
                options['path_len'], report_bytes=options['report_bytes'], cpu_mpps=options['cpu_mpps'],
            )
        except ValueError as exc:
            raise CommandError(str(exc), returncode=2) from None
        self.stdout.write(reports.render_estimate(estimate, options['format']), ending='')
