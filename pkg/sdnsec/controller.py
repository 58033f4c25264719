"""
The controller: one serialized state machine owning the key store, flow and
failover records, multicast trees and the reports switches send back.

Every mutating handler returns the messages it wants delivered as a list of
``(switch_id, message)`` pairs, in the order they must be sent; the caller owns
the channel. Read-only analysis goes through ``pvc`` against this object.
"""
from __future__ import annotations

import heapq
import logging
from collections import Counter

from . import conf, pcc, pvc
from .crypto import KeyStore
from .exceptions import AdmissionError, TreeNotReadyError, UnreachableError
from .records import (FailoverTable, IdAllocator, InstallState, MonitorFlows, ReportPolicy,
                      SeqWindow, TreeEnable, TreeInstall, egress_rule, ingress_rule)

logger = logging.getLogger(__name__)


class FlowPolicy:
    """Per-flow admission hints: a display name, a pinned path, the do-not-detour bit and a TTL."""

    __slots__ = ('name', 'path', 'do_not_detour', 'ttl')

    def __init__(self, name='', path=None, do_not_detour=False, ttl=None):
        self.name = name
        self.path = list(path) if path else None
        self.do_not_detour = do_not_detour
        self.ttl = ttl


class Controller:
    def __init__(self, topology, keystore=None, *, flow_ttl=None, failover_ttl=None, replay_window=None):
        self.topology = topology
        self.keystore = keystore if keystore is not None else KeyStore()
        self.ids = IdAllocator()
        self.flow_ttl = conf.get('DEFAULT_FLOW_TTL') if flow_ttl is None else flow_ttl
        self.failover_ttl = conf.get('FAILOVER_TTL') if failover_ttl is None else failover_ttl
        self.replay_window = replay_window or conf.get('REPLAY_WINDOW')

        self.flows = {}            # FlowID -> FlowRecord, superseded records included
        self.active = {}           # FlowKey -> FlowID
        self.policies = {}         # FlowKey -> FlowPolicy
        self.failovers = {}        # FailoverPathID -> FailoverPathRecord, every generation
        self.failover_tables = {}  # switch -> {egress switch -> candidate FailoverPathRecords}
        self.trees = {}            # TreeID -> MulticastTreeRecord
        self.groups = {}           # group -> TreeID in use at the ingress
        self.monitored = set()     # flow names whose packets are counted on path
        self.reported = None       # None: report everything; else flow names
        self.drops = Counter()
        self.requests = 0
        self._expiry = []          # (exp_time, FlowID) heap
        self._failover_expiry = []  # (exp_time, FailoverPathID) heap
        self._next_tree = 1

        for switch_id in sorted(topology.switches):
            self.keystore.provision(switch_id)

    def __repr__(self):
        return f"<Controller flows={len(self.flows)} trees={len(self.trees)}>"

    # ==========================================
    # 1. FLOWS
    # ==========================================
    def set_policy(self, flow_key, policy):
        self.policies[flow_key] = policy

    def flow_name(self, flow_id):
        record = self.flows.get(flow_id)
        return (record.name or str(flow_id)) if record else str(flow_id)

    def active_record(self, flow_key):
        flow_id = self.active.get(flow_key)
        return self.flows.get(flow_id) if flow_id is not None else None

    def _admit(self, flow_key, now_s, *, avoid_policy_path=False):
        policy = self.policies.get(flow_key) or FlowPolicy()
        ttl = self.flow_ttl if policy.ttl is None else policy.ttl
        path = None if avoid_policy_path else policy.path
        record = pcc.admit_flow(flow_key, self.topology, self.keystore, now_s, ttl, self.ids,
                                path=path, do_not_detour=policy.do_not_detour, name=policy.name)
        record.seq_window = SeqWindow(self.replay_window)
        self.flows[record.flow_id] = record
        heapq.heappush(self._expiry, (record.exp_time, record.flow_id))
        self.active[flow_key] = record.flow_id
        return record

    def _rules_for(self, record):
        # Counting and reporting must be in place before the first packet is
        # released; the egress rule goes before the ingress rule for the same reason.
        messages = []
        if record.name in self.monitored:
            messages.extend(self._monitor_messages())
        if self.reported is not None and record.name in self.reported:
            messages.extend(self._report_messages())
        messages.append((record.path[-1].switch, egress_rule(record)))
        messages.append((record.ingress, ingress_rule(record)))
        return messages

    def handle_miss(self, switch_id, flow_key, now_s):
        """Table miss at an ingress: admit the flow (or re-send a live record) and push its rules."""
        self.requests += 1
        self.expire_flows(now_s)
        record = self.active_record(flow_key)
        if record is None or record.expired(now_s):
            try:
                record = self._admit(flow_key, now_s)
            except (UnreachableError, AdmissionError) as exc:
                logger.warning(f"Refused flow at switch {switch_id}: {exc}")
                return []
        return self._rules_for(record)

    def expire_flows(self, now_s, grace_s=1):
        """Forget flow and failover records expired for more than ``grace_s`` seconds and free their IDs."""
        released = 0
        while self._expiry and self._expiry[0][0] + grace_s <= now_s:
            exp_time, flow_id = heapq.heappop(self._expiry)
            record = self.flows.get(flow_id)
            if record is None or record.exp_time != exp_time:
                continue
            del self.flows[flow_id]
            if self.active.get(record.flow_key) == flow_id:
                del self.active[record.flow_key]
            self.ids.release_flow(flow_id)
            released += 1
        if released:
            logger.debug(f"Released {released} expired FlowIDs")

        released = 0
        while self._failover_expiry and self._failover_expiry[0][0] + grace_s <= now_s:
            exp_time, failover_id = heapq.heappop(self._failover_expiry)
            record = self.failovers.get(failover_id)
            if record is None or record.exp_time != exp_time:
                continue
            del self.failovers[failover_id]
            self.ids.release_failover(failover_id)
            released += 1
        if released:
            logger.debug(f"Released {released} expired FailoverPathIDs")

    # ==========================================
    # 2. FAILOVER AND LINK FAILURES
    # ==========================================
    def precompute_failover(self, now_s):
        self.failover_tables = pcc.failover_candidates(self.topology, self.keystore, now_s,
                                                       self.failover_ttl, self.ids)
        for table in self.failover_tables.values():
            for candidates in table.values():
                for record in candidates:
                    self.failovers[record.failover_path_id] = record
                    if not record.is_identity:
                        heapq.heappush(self._failover_expiry, (record.exp_time, record.failover_path_id))
        return [(switch_id, FailoverTable(self.failover_tables.get(switch_id, {})))
                for switch_id in sorted(self.topology.switches)]

    def handle_link_failure(self, a, b, now_s):
        """Mark a-b down, move every active flow that crossed it and rebuild failover tables."""
        self.topology.set_link_state(a, b, False)
        failed = frozenset((a, b))
        messages = []
        for flow_key, flow_id in sorted(self.active.items(), key=lambda item: item[1]):
            record = self.flows[flow_id]
            switches = record.switches
            if not any(frozenset(pair) == failed for pair in zip(switches, switches[1:])):
                continue
            try:
                new = self._admit(flow_key, now_s, avoid_policy_path=True)
            except (UnreachableError, AdmissionError) as exc:
                logger.warning(f"Flow {record.name or flow_id} has no path after {a}-{b} failed: {exc}")
                continue
            logger.info(f"Moved flow {record.name or flow_id} from FlowID {flow_id} to {new.flow_id}")
            messages.extend(self._rules_for(new))
        messages.extend(self.precompute_failover(now_s))
        return messages

    # ==========================================
    # 3. MULTICAST
    # ==========================================
    def create_multicast_tree(self, group, source, members, now_s, *, ttl=None, safeguard=True):
        """Build a fresh tree and return its install messages.

        With the safeguard, every non-root switch is installed first and the
        ingress is enabled from ``handle_ack``. Without it the ingress is
        installed and enabled straight away.
        """
        tree_id = self._next_tree
        self._next_tree += 1
        record = pcc.create_multicast_tree(self.topology, source, members, self.keystore, now_s,
                                           self.flow_ttl if ttl is None else ttl, tree_id,
                                           group=group, safeguard=safeguard)
        self.trees[tree_id] = record
        installs = [(s, TreeInstall(tree_id, record.exp_time, record.interfaces[s]))
                    for s in sorted(record.install_state)]
        if safeguard and installs:
            return installs
        return self._enable(record) + installs

    def handle_ack(self, ack):
        record = self.trees.get(ack.tree_id)
        if record is None or ack.switch not in record.install_state:
            return []
        record.install_state[ack.switch] = InstallState.ACKED
        if record.safeguard and not record.ingress_enabled and record.fully_acked():
            return self.enable_tree(ack.tree_id)
        return []

    def enable_tree(self, tree_id):
        record = self.trees[tree_id]
        if record.safeguard and not record.fully_acked():
            pending = [s for s, state in record.install_state.items() if state != InstallState.ACKED]
            raise TreeNotReadyError(f"tree {tree_id} still pending at switches {pending}")
        return self._enable(record)

    def _enable(self, record):
        record.ingress_enabled = True
        self.groups[record.group] = record.tree_id
        logger.info(f"Enabling tree {record.tree_id} for group {record.group} at switch {record.root}")
        return [(record.root, TreeInstall(record.tree_id, record.exp_time, record.interfaces[record.root])),
                (record.root, TreeEnable(record.group, record.tree_id, record.exp_time))]

    # ==========================================
    # 4. MONITORING AND REPORTS
    # ==========================================
    def monitor(self, names):
        self.monitored = set(names)
        return self._monitor_messages()

    def _monitor_messages(self):
        ids = frozenset(fid for fid, rec in self.flows.items() if rec.name in self.monitored)
        return [(s, MonitorFlows(ids)) for s in sorted(self.topology.switches)]

    def report(self, names=None):
        """Instruct switches which deliveries to report; ``None`` means all of them."""
        self.reported = None if names is None else set(names)
        return self._report_messages()

    def _report_messages(self):
        if self.reported is None:
            policy = ReportPolicy(report_all=True)
        else:
            ids = {fid for fid, rec in self.flows.items() if rec.name in self.reported}
            ids |= {tid for tid, tree in self.trees.items() if tree.group in self.reported}
            policy = ReportPolicy(report_all=False, flow_ids=frozenset(ids))
        return [(s, policy) for s in sorted(self.topology.switches)]

    def handle_drop(self, notice):
        self.drops[notice.reason] += 1
        logger.warning(f"Switch {notice.switch} reported a {notice.reason} drop")

    def validate(self, report):
        return pvc.validate_header(report, self)

    def reset_windows(self):
        for record in self.flows.values():
            record.seq_window = SeqWindow(self.replay_window)
