"""
Tables and files the management commands emit: header overhead, the
validation-overhead estimate, and per-run verdict and counter reports.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

import openpyxl
from openpyxl.styles import Font
from openpyxl.utils import get_column_letter

from . import wire

logger = logging.getLogger(__name__)

FORMATS = ('table', 'csv', 'xlsx')


# ==========================================
# 1. HEADER OVERHEAD
# ==========================================
@dataclass(frozen=True)
class OverheadRow:
    preset: str
    topology: str
    path_switches: int
    packet_bytes: int
    overhead_bytes: int
    percent: Decimal


# (preset, topology label, switches on the path, packet sizes)
PRESETS = {
    'datacenter': (
        ('datacenter', 'leaf-spine', 3, (200, 850, 1400)),
        ('datacenter', '3-tier', 5, (200, 850, 1400)),
    ),
    'internet2': (
        ('internet2', 'A', 6, (747, 463, 906, 1420, 691, 262)),
        ('internet2', 'D', 10, (747, 463, 906, 1420, 691, 262)),
    ),
}
PRESETS['all'] = PRESETS['datacenter'] + PRESETS['internet2']

OVERHEAD_COLUMNS = ['Preset', 'Topology', 'Switches', 'Packet (B)', 'Overhead (B)', 'Overhead (%)']


def overhead_percent(path_switches, packet_bytes):
    """Header bytes over packet size, in percent, rounded half-up to 0.1."""
    if packet_bytes <= 0:
        raise ValueError("packet size must be positive")
    ratio = Decimal(wire.overhead_bytes(path_switches) * 100) / Decimal(packet_bytes)
    return ratio.quantize(Decimal('0.1'), rounding=ROUND_HALF_UP)


def overhead_rows(groups):
    rows = []
    for preset, topology, switches, sizes in groups:
        for size in sizes:
            rows.append(OverheadRow(preset, topology, switches, size, wire.overhead_bytes(switches),
                                    overhead_percent(switches, size)))
    return rows


def preset_rows(name):
    try:
        return overhead_rows(PRESETS[name])
    except KeyError:
        raise ValueError(f"unknown preset '{name}', choose from {', '.join(sorted(PRESETS))}") from None


def custom_rows(paths, sizes):
    return overhead_rows([('custom', f"{n} switches", n, tuple(sizes)) for n in paths])


def _overhead_values(row):
    return [row.preset, row.topology, row.path_switches, row.packet_bytes, row.overhead_bytes, f"{row.percent}%"]


# ==========================================
# 2. RENDERING
# ==========================================
def render_table(columns, rows):
    """Fixed-width text table; byte-stable for the same input."""
    cells = [[str(c) for c in columns]] + [[str(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(columns))]
    lines = []
    for index, row in enumerate(cells):
        lines.append('  '.join(v.ljust(w) if i < 2 else v.rjust(w) for i, (v, w) in enumerate(zip(row, widths)))
                     .rstrip())
        if index == 0:
            lines.append('  '.join('-' * w for w in widths))
    return '\n'.join(lines) + '\n'


def render_csv(columns, rows):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(columns)
    writer.writerows(rows)
    return buffer.getvalue()


def write_xlsx(path, sheets):
    """Write ``{sheet title: (columns, rows)}`` as one workbook with a bold header row per sheet."""
    workbook = openpyxl.Workbook()
    workbook.remove(workbook.active)
    for title, (columns, rows) in sheets.items():
        sheet = workbook.create_sheet(title=title[:31])
        sheet.append(list(columns))
        for cell in sheet[1]:
            cell.font = Font(bold=True)
        for row in rows:
            sheet.append(list(row))
        for index, column in enumerate(columns, start=1):
            width = max([len(str(column))] + [len(str(row[index - 1])) for row in rows])
            sheet.column_dimensions[get_column_letter(index)].width = width + 2
    path = Path(path)
    workbook.save(path)
    logger.info(f"Wrote workbook {path}")
    return path


def render_overhead(rows, fmt='table'):
    values = [_overhead_values(r) for r in rows]
    if fmt == 'csv':
        return render_csv(OVERHEAD_COLUMNS, values)
    return render_table(OVERHEAD_COLUMNS, values)


def write_overhead_xlsx(rows, path):
    # Percent stays numeric in the workbook.
    values = [[r.preset, r.topology, r.path_switches, r.packet_bytes, r.overhead_bytes, float(r.percent)]
              for r in rows]
    return write_xlsx(path, {'Overhead': (OVERHEAD_COLUMNS, values)})


# ==========================================
# 3. VALIDATION-OVERHEAD ESTIMATE
# ==========================================
ESTIMATE_COLUMNS = ['Quantity', 'Value', 'Unit']


def estimate_rows(estimate):
    return [
        ['Reported packet rate', f"{estimate.packet_rate_mpps:.2f}", 'Mpps'],
        ['Report bandwidth', f"{estimate.report_bandwidth / 1e9:.1f}", 'Gbps'],
        ['Report / data traffic', f"{estimate.ratio * 100:.3f}", '%'],
        ['PVF recomputations', f"{estimate.mac_rate / 1e6:.2f}", 'M MAC/s'],
        ['Validation CPUs', f"{estimate.cpus:.0f}", 'CPUs'],
    ]


def render_estimate(estimate, fmt='table'):
    rows = estimate_rows(estimate)
    if fmt == 'csv':
        return render_csv(ESTIMATE_COLUMNS, rows)
    return render_table(ESTIMATE_COLUMNS, rows)


# ==========================================
# 4. RUN REPORTS
# ==========================================
VERDICT_COLUMNS = ['Flow', 'Injected', 'Delivered', 'Drops', 'Valid', 'Mismatch', 'Replay', 'Counters', 'Detail']
COUNTER_COLUMNS = ['Flow', 'FlowID', 'Switch', 'Count']


def _drops_text(drops):
    return ';'.join(f"{reason}={count}" for reason, count in sorted(drops.items()))


def verdict_rows(summary):
    rows = []
    for name, outcome in sorted(summary.flows.items()):
        replay = outcome.replay.outcome.value if outcome.replay is not None else ''
        counters = outcome.counters.outcome.value if outcome.counters is not None else ''
        detail = sorted(outcome.mismatch_detail)
        if outcome.counters is not None and outcome.counters.evidence:
            detail.append(outcome.counters.evidence)
        if outcome.replay is not None and outcome.replay.evidence:
            detail.append(outcome.replay.evidence)
        rows.append([
            name, outcome.injected, outcome.delivered, _drops_text(outcome.drops),
            outcome.verdicts.get('valid', 0), outcome.verdicts.get('pvf_mismatch', 0),
            replay, counters, ' | '.join(detail),
        ])
    return rows


def counter_rows(trace):
    return [[e.flow, e.flow_id, e.switch, e.count] for e in trace.of('counters')]


def render_summary(summary, fmt='table'):
    rows = verdict_rows(summary)
    if fmt == 'csv':
        return render_csv(VERDICT_COLUMNS, rows)
    head = (f"Scenario {summary.name} (seed {summary.seed}): {summary.injected} injected, "
            f"{summary.deliveries} delivered, drops {_drops_text(summary.drops) or 'none'}\n")
    body = render_table(VERDICT_COLUMNS, rows)
    tail = ''.join(f"FAIL {failure}\n" for failure in summary.failures) or 'All checks passed\n'
    return head + body + tail


def write_run_outputs(out_dir, trace, summary, fmt='table'):
    """Write ``trace.jsonl``, ``verdicts.csv`` and ``counters.csv`` (plus ``report.xlsx``) into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace.write(out / 'trace.jsonl')
    (out / 'verdicts.csv').write_text(render_csv(VERDICT_COLUMNS, verdict_rows(summary)), encoding='utf-8')
    (out / 'counters.csv').write_text(render_csv(COUNTER_COLUMNS, counter_rows(trace)), encoding='utf-8')
    written = [out / 'trace.jsonl', out / 'verdicts.csv', out / 'counters.csv']
    if fmt == 'xlsx':
        written.append(write_xlsx(out / 'report.xlsx', {
            'Verdicts': (VERDICT_COLUMNS, verdict_rows(summary)),
            'Counters': (COUNTER_COLUMNS, counter_rows(trace)),
        }))
    return written
