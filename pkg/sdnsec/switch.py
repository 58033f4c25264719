"""
Data-plane state machines for ingress, core and egress switches.

A switch never raises on bad traffic: every call returns outcomes (``Forward``,
``Deliver``, ``Drop``, ``TableMiss``) for the event loop to act on. Core
processing reads forwarding decisions from the packet header alone; the only
per-flow structure a core consults is the monitor table, and only when the
controller has asked it to count something.
"""
from __future__ import annotations

import enum
import logging
from collections import Counter, deque
from dataclasses import dataclass, field, replace

from . import conf, crypto, wire
from .exceptions import ParseError
from .records import (EgressRule, FailoverTable, IngressRule, MonitorFlows, Report,
                      ReportPolicy, TreeAck, TreeEnable, TreeInstall)

logger = logging.getLogger(__name__)

SEQ_MASK = wire.MAX_ID


class DropReason(str, enum.Enum):
    MAC_VERIFICATION_FAILED = 'mac_verification_failed'
    EXPIRED = 'expired'
    UNKNOWN_TREE = 'unknown_tree'
    NO_FAILOVER = 'no_failover'
    DO_NOT_DETOUR = 'do_not_detour'
    MALFORMED = 'malformed'
    NO_EGRESS_RULE = 'no_egress_rule'


def now_seconds(now_ms):
    return int(now_ms // 1000)


def is_expired(exp_time, now_ms):
    return exp_time <= now_seconds(now_ms)


# ==========================================
# 1. PACKETS AND OUTCOMES
# ==========================================
@dataclass(frozen=True)
class Packet:
    uid: int
    flow_key: tuple
    size: int = 0
    payload: bytes = b''
    header: bytes | None = None
    group: str = ''
    label: str = ''

    def with_header(self, header):
        return replace(self, header=None if header is None else wire.encode(header))


@dataclass(frozen=True)
class Forward:
    out_if: int
    packet: Packet


@dataclass(frozen=True)
class Deliver:
    port: int
    packet: Packet
    report: Report | None = None


@dataclass(frozen=True)
class Drop:
    reason: DropReason
    packet: Packet
    notify: bool = True


@dataclass(frozen=True)
class TableMiss:
    flow_key: tuple
    packet: Packet
    request: bool


# ==========================================
# 2. TABLES
# ==========================================
@dataclass
class IngressEntry:
    rule: IngressRule
    seq_counter: int = 0
    pkt_counter: int = 0


class IngressTable:
    """FlowKey -> header template plus the flow's SeqNo and packet counters."""

    def __init__(self):
        self._entries = {}
        self.lookups = 0

    def install(self, rule):
        self._entries[rule.flow_key] = IngressEntry(rule)

    def lookup(self, flow_key, now_ms, *, allow_expired=False):
        self.lookups += 1
        entry = self._entries.get(flow_key)
        if entry is None or (is_expired(entry.rule.exp_time, now_ms) and not allow_expired):
            return None
        return entry

    def __len__(self):
        return len(self._entries)


class EgressTable:
    def __init__(self):
        self._ports = {}
        self.delivered = Counter()

    def install(self, rule):
        self._ports[rule.flow_key] = rule.out_port

    def lookup(self, flow_key):
        return self._ports.get(flow_key)

    def __len__(self):
        return len(self._ports)


@dataclass
class MulticastEntry:
    exp_time: int
    interfaces: tuple


@dataclass
class GroupEntry:
    tree_id: int
    exp_time: int
    seq_counter: int = 0


@dataclass
class CoreState:
    keys: crypto.SwitchKeys
    failover_table: dict = field(default_factory=dict)     # egress switch -> candidate FailoverPathRecords
    multicast_table: dict = field(default_factory=dict)    # tree id -> MulticastEntry
    monitor_table: dict = field(default_factory=dict)      # flow id -> packet count
    link_state: dict = field(default_factory=dict)         # interface -> up
    per_flow_lookups: int = 0

    def link_up(self, iface):
        return self.link_state.get(iface, True)

    def count(self, flow_id):
        if not self.monitor_table:
            return
        self.per_flow_lookups += 1
        if flow_id in self.monitor_table:
            self.monitor_table[flow_id] += 1

    def table_sizes(self):
        return {
            'failover': len(self.failover_table),
            'multicast': len(self.multicast_table),
            'monitor': len(self.monitor_table),
        }


# ==========================================
# 3. SWITCH
# ==========================================
class Switch:
    def __init__(self, switch_id, keys, *, host_ports=(), link_ports=(), miss_queue_limit=None):
        self.id = switch_id
        self.host_ports = frozenset(host_ports)
        self.ingress_table = IngressTable()
        self.egress_table = EgressTable()
        self.core = CoreState(keys=keys, link_state={port: True for port in link_ports})
        self.groups = {}
        self.report_policy = ReportPolicy(report_all=True)
        self.miss_queue_limit = miss_queue_limit or conf.get('MISS_QUEUE_LIMIT')
        self._miss_queues = {}
        self.miss_overflows = 0

    def __repr__(self):
        return f"<Switch {self.id}>"

    # --- control plane ------------------------------------------------
    def apply(self, message, now_ms):
        """Install a controller message; returns outcomes it releases and acks it owes."""
        if isinstance(message, IngressRule):
            self.ingress_table.install(message)
            return self._flush(message.flow_key, now_ms), []
        if isinstance(message, EgressRule):
            self.egress_table.install(message)
        elif isinstance(message, FailoverTable):
            self.core.failover_table = dict(message.entries)
        elif isinstance(message, MonitorFlows):
            self.core.monitor_table = {fid: self.core.monitor_table.get(fid, 0) for fid in message.flow_ids}
        elif isinstance(message, ReportPolicy):
            self.report_policy = message
        elif isinstance(message, TreeInstall):
            self.core.multicast_table[message.tree_id] = MulticastEntry(message.exp_time, tuple(message.interfaces))
            return [], [TreeAck(self.id, message.tree_id)]
        elif isinstance(message, TreeEnable):
            self.groups[message.group] = GroupEntry(message.tree_id, message.exp_time)
            logger.info(f"Switch {self.id}: group {message.group} now uses tree {message.tree_id}")
        else:
            raise TypeError(f"switch {self.id} cannot apply {type(message).__name__}")
        return [], []

    def set_link_state(self, iface, up):
        self.core.link_state[iface] = up

    def counters(self):
        return dict(self.core.monitor_table)

    def _flush(self, flow_key, now_ms):
        queued = self._miss_queues.pop(flow_key, ())
        outcomes = []
        for packet in queued:
            outcomes.extend(self.ingress_process(packet, now_ms, flush=True))
        return outcomes

    def _enqueue(self, packet):
        queue = self._miss_queues.get(packet.flow_key)
        request = queue is None
        if request:
            queue = self._miss_queues[packet.flow_key] = deque()
        if len(queue) >= self.miss_queue_limit:
            queue.popleft()
            self.miss_overflows += 1
        queue.append(packet)
        return TableMiss(packet.flow_key, packet, request)

    def _should_report(self, flow_id):
        return self.report_policy.report_all or flow_id in self.report_policy.flow_ids

    # --- data plane ---------------------------------------------------
    def receive(self, packet, in_if, now_ms):
        """Dispatch a packet arriving on ``in_if``."""
        if packet.header is None:
            if in_if in self.host_ports:
                if packet.group:
                    return self.multicast_ingress(packet, now_ms)
                return self.ingress_process(packet, now_ms)
            return [Drop(DropReason.MALFORMED, packet)]
        try:
            header = wire.decode(packet.header)
        except ParseError as exc:
            logger.warning(f"Switch {self.id}: undecodable header ({exc})")
            return [Drop(DropReason.MALFORMED, packet)]
        if isinstance(header, wire.MulticastHeader):
            return self.multicast_process(header, packet, now_ms, in_if=in_if)
        if header.egress_id == self.id:
            return self.egress_process(header, packet, now_ms)
        return self.core_process(header, packet, now_ms)

    def ingress_process(self, packet, now_ms, *, flush=False):
        entry = self.ingress_table.lookup(packet.flow_key, now_ms, allow_expired=flush)
        if entry is None:
            return [self._enqueue(packet)]
        rule = entry.rule
        entry.seq_counter = (entry.seq_counter + 1) & SEQ_MASK
        entry.pkt_counter += 1
        header = wire.SdnsecHeader(
            fixed=wire.HeaderFixed(do_not_detour=rule.do_not_detour, exp_time=rule.exp_time),
            flow_blocks=(wire.FlowInfoBlock(rule.flow_id, entry.seq_counter, rule.egress_id),),
            pvf=bytes(wire.PVF_LEN),
            fes=rule.fes,
        )
        self.core.count(rule.flow_id)

        if rule.egress_id == self.id and not rule.fes:
            # Source and destination share this switch.
            header = replace(header, pvf=crypto.pvf_init(self.core.keys, self._tweak(header)))
            return [self._deliver(header, packet, rule.out_port)]

        out_if = rule.out_port
        if not self.core.link_up(out_if):
            rewritten = self._detour(header, packet)
            if isinstance(rewritten, Drop):
                return [rewritten]
            header, out_if = rewritten
        header = replace(header, pvf=crypto.pvf_init(self.core.keys, self._tweak(header)))
        logger.debug(f"Switch {self.id}: ingress flow {rule.flow_id} seq {entry.seq_counter} -> if {out_if}")
        return [Forward(out_if, packet.with_header(header))]

    def _verify_fe(self, header):
        """Check the FE at ``fe_ptr`` against this switch's key; returns a DropReason or None."""
        fixed = header.fixed
        if fixed.fe_ptr >= len(header.fes):
            return DropReason.MALFORMED
        flow_id = header.current_flow.flow_id
        fe = header.current_fe
        prev = crypto.previous_chain(header.fes, fixed.fe_ptr, flow_id, fixed.exp_time)
        b = crypto.bootstrap_chain(flow_id, fixed.exp_time)
        if crypto.fe_mac(self.core.keys, fe.egress_if, prev, b) != fe.mac:
            return DropReason.MAC_VERIFICATION_FAILED
        return None

    @staticmethod
    def _tweak(header):
        block = header.current_flow
        return crypto.PvfTweak(block.flow_id, block.seq_no)

    def _step(self, header):
        return crypto.pvf_step(self.core.keys, header.pvf, self._tweak(header))

    def core_process(self, header, packet, now_ms):
        if is_expired(header.fixed.exp_time, now_ms):
            return [self._drop(DropReason.EXPIRED, packet)]
        reason = self._verify_fe(header)
        if reason is not None:
            return [self._drop(reason, packet)]

        out_if = header.current_fe.egress_if
        if self.core.link_up(out_if):
            header = replace(header, fixed=replace(header.fixed, fe_ptr=header.fixed.fe_ptr + 1))
        else:
            rewritten = self._detour(header, packet)
            if isinstance(rewritten, Drop):
                return [rewritten]
            header, out_if = rewritten
        header = replace(header, pvf=self._step(header))
        self.core.count(header.flow_blocks[0].flow_id)
        return [Forward(out_if, packet.with_header(header))]

    def _detour(self, header, packet):
        if header.fixed.do_not_detour:
            return self._drop(DropReason.DO_NOT_DETOUR, packet)
        result = self.failover_rewrite(header)
        if isinstance(result, DropReason):
            return self._drop(result, packet)
        return result

    def failover_rewrite(self, header):
        """Swap in a precomputed failover path toward the header's egress.

        The first candidate whose own first link is up wins. Returns
        ``(header, out_if)`` with this switch's failover slot consumed
        (``fe_ptr`` = 1), or a DropReason. The PVF is left for the caller, which
        steps it under the appended block's tweak.
        """
        if header.fixed.lfc >= wire.MAX_LFC:
            return DropReason.NO_FAILOVER
        candidates = self.core.failover_table.get(header.egress_id, ())
        record = next((r for r in candidates if r.fes and self.core.link_up(r.fes[0].egress_if)), None)
        if record is None:
            return DropReason.NO_FAILOVER
        out_if = record.fes[0].egress_if
        block = wire.FlowInfoBlock(record.failover_path_id, header.current_flow.seq_no, header.egress_id)
        fixed = replace(header.fixed, lfc=header.fixed.lfc + 1, fe_ptr=1, exp_time=record.exp_time)
        logger.info(f"Switch {self.id}: failover {record.failover_path_id} toward egress {header.egress_id}")
        return replace(header, fixed=fixed, flow_blocks=header.flow_blocks + (block,), fes=record.fes), out_if

    def egress_process(self, header, packet, now_ms):
        if is_expired(header.fixed.exp_time, now_ms):
            return [self._drop(DropReason.EXPIRED, packet)]
        reason = self._verify_fe(header)
        if reason is not None:
            return [self._drop(reason, packet)]
        header = replace(header, pvf=self._step(header),
                         fixed=replace(header.fixed, fe_ptr=header.fixed.fe_ptr + 1))
        self.core.count(header.flow_blocks[0].flow_id)
        port = self.egress_table.lookup(packet.flow_key)
        if port is None:
            return [self._drop(DropReason.NO_EGRESS_RULE, packet)]
        return [self._deliver(header, packet, port)]

    def _deliver(self, header, packet, port):
        self.egress_table.delivered[header.flow_blocks[0].flow_id] += 1
        report = None
        if self._should_report(header.flow_blocks[0].flow_id):
            report = Report(self.id, wire.encode(header))
        return Deliver(port, replace(packet, header=None), report)

    def _drop(self, reason, packet):
        logger.warning(f"Switch {self.id}: dropped packet {packet.uid} ({reason.value})")
        return Drop(reason, packet)

    # --- multicast ----------------------------------------------------
    def multicast_ingress(self, packet, now_ms):
        group = self.groups.get(packet.group)
        if group is None or is_expired(group.exp_time, now_ms):
            return [self._drop(DropReason.UNKNOWN_TREE, packet)]
        group.seq_counter = (group.seq_counter + 1) & SEQ_MASK
        tweak = crypto.PvfTweak(group.tree_id, group.seq_counter)
        header = wire.MulticastHeader(exp_time=group.exp_time, tree_id=group.tree_id,
                                      seq_no=group.seq_counter, pvf=crypto.pvf_init(self.core.keys, tweak))
        entry = self.core.multicast_table.get(group.tree_id)
        if entry is None:
            return [self._drop(DropReason.UNKNOWN_TREE, packet)]
        return self._replicate(header, packet, entry, skip_port=packet.flow_key[0])

    def multicast_process(self, header, packet, now_ms, in_if=None):
        if is_expired(header.exp_time, now_ms):
            return [self._drop(DropReason.EXPIRED, packet)]
        entry = self.core.multicast_table.get(header.tree_id)
        if entry is None or is_expired(entry.exp_time, now_ms):
            return [self._drop(DropReason.UNKNOWN_TREE, packet)]
        tweak = crypto.PvfTweak(header.tree_id, header.seq_no)
        header = replace(header, pvf=crypto.pvf_step(self.core.keys, header.pvf, tweak))
        return self._replicate(header, packet, entry, skip_port=in_if)

    def _replicate(self, header, packet, entry, skip_port=None):
        outcomes = []
        encoded = None
        report_made = False
        for iface in entry.interfaces:
            if iface == skip_port:
                continue
            if iface in self.host_ports:
                report = None
                if not report_made and self._should_report(header.tree_id):
                    report = Report(self.id, wire.encode(header))
                    report_made = True
                outcomes.append(Deliver(iface, replace(packet, header=None), report))
            else:
                encoded = encoded or wire.encode(header)
                outcomes.append(Forward(iface, replace(packet, header=encoded)))
        return outcomes
