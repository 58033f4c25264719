from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from sdnsec import reports


class Command(BaseCommand):
    help = "Header overhead in percent of packet size, for presets or given path lengths and sizes."

    def add_arguments(self, parser):
        parser.add_argument('--preset', choices=sorted(reports.PRESETS), default='all')
        parser.add_argument('--paths', type=int, nargs='+', help="Switches per path, ingress and egress included.")
        parser.add_argument('--sizes', type=int, nargs='+', help="Packet sizes in bytes.")
        parser.add_argument('--format', choices=reports.FORMATS, default='table')
        parser.add_argument('--out', help="Write the table to this file instead of stdout.")

    def handle(self, *args, **options):
        paths, sizes = options['paths'], options['sizes']
        if bool(paths) != bool(sizes):
            raise CommandError("--paths and --sizes go together", returncode=2)
        if paths and (min(paths) < 1 or min(sizes) < 1):
            raise CommandError("path lengths and packet sizes must be positive", returncode=2)
        rows = reports.custom_rows(paths, sizes) if paths else reports.preset_rows(options['preset'])

        fmt, out = options['format'], options['out']
        if fmt == 'xlsx':
            if not out:
                raise CommandError("--format xlsx needs --out", returncode=2)
            reports.write_overhead_xlsx(rows, out)
            return
        text = reports.render_overhead(rows, fmt)
        if out:
            Path(out).write_text(text, encoding='utf-8')
        else:
            self.stdout.write(text, ending='')
