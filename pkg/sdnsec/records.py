"""
Controller-side records and the rule messages the controller pushes to switches.
"""
from __future__ import annotations

import enum
import heapq
from collections import Counter, deque
from dataclasses import dataclass, field

from . import conf
from .exceptions import AdmissionError
from .wire import MAX_ID


@dataclass(frozen=True)
class Hop:
    switch: int
    egress_if: int


class SeqWindow:
    """Sliding window over the most recent reported sequence numbers of one flow."""

    def __init__(self, size=None):
        self.size = size or conf.get('REPLAY_WINDOW')
        self._recent = deque()
        self._counts = Counter()

    def add(self, seq_no):
        self._recent.append(seq_no)
        self._counts[seq_no] += 1
        if len(self._recent) > self.size:
            old = self._recent.popleft()
            self._counts[old] -= 1
            if not self._counts[old]:
                del self._counts[old]

    def counts(self):
        return Counter(self._counts)

    def __len__(self):
        return len(self._recent)


# ==========================================
# 1. RECORDS
# ==========================================
@dataclass
class FlowRecord:
    flow_key: tuple
    flow_id: int
    path: tuple[Hop, ...]
    exp_time: int
    egress_id: int
    fes: tuple
    do_not_detour: bool = False
    name: str = ''
    seq_window: SeqWindow = field(default_factory=SeqWindow, repr=False)

    @property
    def switches(self):
        return [hop.switch for hop in self.path]

    @property
    def ingress(self):
        return self.path[0].switch

    def expired(self, now_s):
        return self.exp_time <= now_s


@dataclass(frozen=True)
class FailoverPathRecord:
    failover_path_id: int
    head: int
    egress_id: int
    path: tuple[Hop, ...]
    exp_time: int
    fes: tuple

    @property
    def switches(self):
        return [hop.switch for hop in self.path]

    @property
    def is_identity(self):
        return self.head == self.egress_id


class InstallState(str, enum.Enum):
    PENDING = 'pending'
    ACKED = 'acked'


@dataclass
class MulticastTreeRecord:
    tree_id: int
    group: str
    root: int
    exp_time: int
    interfaces: dict          # switch -> sorted egress interfaces
    parents: dict             # switch -> parent switch (root maps to None)
    install_state: dict       # non-root switch -> InstallState
    safeguard: bool = True
    ingress_enabled: bool = False

    def fully_acked(self):
        return all(state == InstallState.ACKED for state in self.install_state.values())

    def path_to(self, switch_id):
        """Root-to-``switch_id`` switch sequence along the tree."""
        if switch_id not in self.parents:
            return None
        path = [switch_id]
        while self.parents[path[-1]] is not None:
            path.append(self.parents[path[-1]])
        return path[::-1]


# ==========================================
# 2. RULE MESSAGES
# ==========================================
@dataclass(frozen=True)
class IngressRule:
    flow_key: tuple
    flow_id: int
    exp_time: int
    egress_id: int
    fes: tuple
    out_port: int
    do_not_detour: bool = False


@dataclass(frozen=True)
class EgressRule:
    flow_key: tuple
    out_port: int


@dataclass(frozen=True)
class TreeInstall:
    tree_id: int
    exp_time: int
    interfaces: tuple


@dataclass(frozen=True)
class TreeEnable:
    group: str
    tree_id: int
    exp_time: int


def ingress_rule(record):
    return IngressRule(flow_key=record.flow_key, flow_id=record.flow_id, exp_time=record.exp_time,
                       egress_id=record.egress_id, fes=record.fes, out_port=record.path[0].egress_if,
                       do_not_detour=record.do_not_detour)


def egress_rule(record):
    return EgressRule(flow_key=record.flow_key, out_port=record.path[-1].egress_if)


# ==========================================
# 3. IDENTIFIER ALLOCATION
# ==========================================
class IdAllocator:
    """FlowIDs count up from 1, FailoverPathIDs count down from the top of the same 24-bit space."""

    def __init__(self):
        self._next_flow = 1
        self._next_failover = MAX_ID
        self._freed = []
        self._freed_failover = []  # negated, so the highest free ID pops first

    def allocate_flow(self):
        if self._freed:
            return heapq.heappop(self._freed)
        if self._next_flow >= self._next_failover:
            raise AdmissionError("FlowID space exhausted")
        flow_id = self._next_flow
        self._next_flow += 1
        return flow_id

    def release_flow(self, flow_id):
        heapq.heappush(self._freed, flow_id)

    def allocate_failover(self):
        if self._freed_failover:
            return -heapq.heappop(self._freed_failover)
        if self._next_failover <= self._next_flow:
            raise AdmissionError("FailoverPathID space exhausted")
        failover_id = self._next_failover
        self._next_failover -= 1
        return failover_id

    def release_failover(self, failover_id):
        heapq.heappush(self._freed_failover, -failover_id)


# ==========================================
# 4. SWITCH-TO-CONTROLLER MESSAGES
# ==========================================
@dataclass(frozen=True)
class Report:
    """A header (with its final PVF) reported by ``switch``."""
    switch: int
    header: bytes
    time_ms: float = 0


@dataclass(frozen=True)
class DropNotice:
    switch: int
    reason: str
    header: bytes
    time_ms: float = 0


@dataclass(frozen=True)
class TreeAck:
    switch: int
    tree_id: int


# ==========================================
# 5. TABLE PUSHES
# ==========================================
@dataclass(frozen=True)
class FailoverTable:
    """Replaces a switch's whole failover table: egress switch -> FailoverPathRecord."""
    entries: dict


@dataclass(frozen=True)
class MonitorFlows:
    flow_ids: frozenset


@dataclass(frozen=True)
class ReportPolicy:
    """Which delivered packets a switch reports: all of them, or those of ``flow_ids``."""
    report_all: bool = False
    flow_ids: frozenset = frozenset()
