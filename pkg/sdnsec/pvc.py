"""
Path validation component: PVF recomputation over reported headers, replay
analysis over sequence numbers, counter reconciliation and the validation
overhead estimator.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

from . import conf, wire
from .crypto import PvfTweak, expected_pvf
from .exceptions import AnalysisError, ParseError, ProvisioningError

logger = logging.getLogger(__name__)


class Outcome(str, enum.Enum):
    VALID = 'valid'
    PVF_MISMATCH = 'pvf_mismatch'
    REPLAY_SUSPECTED = 'replay_suspected'
    COUNTER_INCONSISTENT = 'counter_inconsistent'


@dataclass(frozen=True)
class ValidationVerdict:
    outcome: Outcome
    detail: tuple = ()
    evidence: str = ''

    def __post_init__(self):
        if self.outcome == Outcome.VALID and self.detail:
            raise ValueError("a valid verdict carries no detail")

    @property
    def valid(self):
        return self.outcome == Outcome.VALID


VALID = ValidationVerdict(Outcome.VALID)


def _mismatch(detail, evidence=''):
    return ValidationVerdict(Outcome.PVF_MISMATCH, (detail,) if isinstance(detail, str) else tuple(detail),
                             evidence)


# ==========================================
# 1. HEADER VALIDATION
# ==========================================
def expected_segments(header, state):
    """Rebuild the (switches, tweak) segments a unicast header should have traversed.

    Returns ``(segments, None)`` or ``(None, verdict)`` when the header cannot be
    matched against the controller's records.
    """
    blocks = header.flow_blocks
    record = state.flows.get(blocks[0].flow_id)
    if record is None:
        return None, _mismatch('unknown path id', f"FlowID {blocks[0].flow_id}")

    segments = []
    path = record.switches
    tweak = PvfTweak(blocks[0].flow_id, blocks[0].seq_no)
    for block in blocks[1:]:
        failover = state.failovers.get(block.flow_id)
        if failover is None:
            return None, _mismatch('unknown path id', f"FailoverPathID {block.flow_id}")
        if failover.head not in path:
            return None, _mismatch('failover head off path',
                                   f"failover {block.flow_id} starts at {failover.head}, path {path}")
        cut = path.index(failover.head)
        segments.append((path[:cut], tweak))
        path = failover.switches
        tweak = PvfTweak(block.flow_id, block.seq_no)
    segments.append((path, tweak))
    return segments, None


def validate_header(report, state):
    """Recompute the expected PVF for a reported header and compare.

    ``state`` exposes ``flows`` (FlowID -> FlowRecord), ``failovers``
    (FailoverPathID -> FailoverPathRecord), ``trees`` (TreeID -> MulticastTreeRecord)
    and ``keystore``.
    """
    try:
        header = wire.decode(report.header)
    except ParseError as exc:
        return _mismatch('malformed report', str(exc))

    if isinstance(header, wire.MulticastHeader):
        tree = state.trees.get(header.tree_id)
        if tree is None:
            return _mismatch('unknown path id', f"TreeID {header.tree_id}")
        path = tree.path_to(report.switch)
        if path is None:
            return _mismatch((report.switch,), f"switch {report.switch} is not on tree {header.tree_id}")
        segments = [(path, PvfTweak(header.tree_id, header.seq_no))]
    else:
        segments, verdict = expected_segments(header, state)
        if verdict is not None:
            return verdict
        state.flows[header.flow_blocks[0].flow_id].seq_window.add(header.flow_blocks[0].seq_no)
        path = segments[-1][0]
        if path[-1] != report.switch:
            return _mismatch((report.switch,), f"reported by {report.switch}, path ends at {path[-1]}")

    try:
        expected = expected_pvf(segments, state.keystore)
    except ProvisioningError as exc:
        return _mismatch('unknown switch key', str(exc))
    if expected != header.pvf:
        traversed = tuple(s for switches, _ in segments for s in switches)
        logger.warning(f"PVF mismatch on report from switch {report.switch}: "
                       f"expected {expected.hex()}, got {header.pvf.hex()}")
        return _mismatch(traversed, f"expected {expected.hex()} got {header.pvf.hex()}")
    return VALID


# ==========================================
# 2. REPLAY ANALYSIS
# ==========================================
def detect_pvf_replay(flow_record, window=None, threshold=None):
    """Flag sequence numbers that occur more than ``threshold`` times in the window."""
    window = window if window is not None else flow_record.seq_window
    threshold = threshold if threshold is not None else conf.get('REPLAY_THRESHOLD')
    repeated = {seq: n for seq, n in window.counts().items() if n > threshold}
    if not repeated:
        return VALID
    worst = max(repeated, key=lambda seq: (repeated[seq], -seq))
    logger.warning(f"Replay suspected on flow {flow_record.name or flow_record.flow_id}: "
                   f"{len(repeated)} sequence numbers above {threshold}")
    return ValidationVerdict(Outcome.REPLAY_SUSPECTED, tuple(sorted(repeated)),
                             f"SeqNo {worst} seen {repeated[worst]} times")


# ==========================================
# 3. COUNTER RECONCILIATION
# ==========================================
def reconcile_counters(reports, path):
    """Compare per-switch packet counts of one flow along its path.

    Honest counts never rise along the path. A count above everything
    upstream that falls again at the next switch (or ends the path) is an
    inflated report. Among the rest, a count lower than a later one is an
    under-report. Both are named as dishonest. Otherwise every step down is a
    drop, localized to the link between the two switches.
    """
    path = list(path)
    unknown = set(reports) - set(path)
    if unknown:
        raise AnalysisError(f"switches {sorted(unknown)} are not on the path")
    positions = [i for i, s in enumerate(path) if s in reports]
    if positions and positions != list(range(positions[0], positions[-1] + 1)):
        raise AnalysisError("counter reports do not cover a contiguous part of the path")

    switches = [path[i] for i in positions]
    counts = [reports[s] for s in switches]
    last = len(counts) - 1
    inflated = {i for i in range(1, last + 1)
                if counts[i] > max(counts[:i]) and (i == last or counts[i] > counts[i + 1])}
    credible = [i for i in range(last + 1) if i not in inflated]
    deflated = {i for k, i in enumerate(credible)
                if counts[i] < max((counts[j] for j in credible[k + 1:]), default=counts[i])}
    dishonest = tuple(switches[i] for i in sorted(inflated | deflated))
    if dishonest:
        return ValidationVerdict(Outcome.COUNTER_INCONSISTENT, dishonest,
                                 f"dishonest report: {', '.join(map(str, dishonest))}")
    drops = tuple((a, b) for (a, ca), (b, cb) in zip(zip(switches, counts), zip(switches[1:], counts[1:]))
                  if cb < ca)
    if drops:
        return ValidationVerdict(Outcome.COUNTER_INCONSISTENT, drops,
                                 'packet drop on ' + ', '.join(f"{a}-{b}" for a, b in drops))
    return VALID


# ==========================================
# 4. OVERHEAD ESTIMATE
# ==========================================
@dataclass(frozen=True)
class ValidationOverhead:
    packet_rate: float        # packets/s reported to the PVC
    report_bandwidth: float   # bits/s of report traffic
    ratio: float              # report traffic / data traffic
    mac_rate: float           # PVF recomputations/s
    cpus: float               # CPUs needed at the given per-CPU validation rate

    @property
    def packet_rate_mpps(self):
        return self.packet_rate / 1e6


def estimate_validation_overhead(hosts, access_gbps, utilization, mean_packet_bytes, path_len,
                                 report_bytes=None, cpu_mpps=None):
    report_bytes = conf.get('REPORT_BYTES') if report_bytes is None else report_bytes
    cpu_mpps = conf.get('PVC_CPU_MPPS') if cpu_mpps is None else cpu_mpps
    if min(hosts, access_gbps, utilization, report_bytes) < 0 or mean_packet_bytes <= 0 or path_len < 1:
        raise ValueError("estimator inputs must be positive")
    traffic = hosts * access_gbps * 1e9 * utilization
    rate = traffic / (mean_packet_bytes * 8)
    bandwidth = rate * report_bytes * 8
    return ValidationOverhead(
        packet_rate=rate,
        report_bandwidth=bandwidth,
        ratio=bandwidth / traffic if traffic else 0.0,
        mac_rate=rate * path_len,
        cpus=rate / (cpu_mpps * 1e6) if cpu_mpps else 0.0,
    )
