"""
Deterministic discrete-event simulation of an SDNsec network.

Switches, links and the controller channel run on one simpy environment; virtual
time is in milliseconds and a run is a pure function of its scenario (the seed
included). The result is an ``EventTrace``; ``audit`` turns a trace into
verdicts the way the path validation component would.
"""
from __future__ import annotations

import itertools
import json
import logging
import random
from collections import Counter
from dataclasses import asdict, dataclass, field, fields

import simpy
from django.core.serializers.json import DjangoJSONEncoder

from . import conf, pvc, wire
from .adversary import Adversary, AdversaryBehavior, AdversaryKind, Discard, flood_keys
from .controller import Controller, FlowPolicy
from .crypto import KeyStore
from .exceptions import ScenarioError
from .records import DropNotice, Report
from .switch import Deliver, Drop, Forward, Packet, Switch, TableMiss, now_seconds
from .topology import FlowKey

logger = logging.getLogger(__name__)

__all__ = [
    'AdversaryBehavior', 'AdversaryKind', 'EventTrace', 'FlowOutcome', 'PvcInputs', 'RunSummary',
    'Simulation', 'TraceEvent', 'audit', 'check', 'collect_reports', 'run_scenario',
]


# ==========================================
# 1. TRACE
# ==========================================
@dataclass(frozen=True)
class TraceEvent:
    time_ms: float
    seq: int
    event: str
    switch: int | None = None
    flow: str = ''
    packet: int | None = None
    iface: int | None = None
    reason: str = ''
    header: str = ''
    flow_id: int | None = None
    count: int | None = None


class EventTrace:
    """Totally ordered event log of one run.

    ``controller`` and ``scenario`` ride along for in-process analysis and are
    not part of the exported trace.
    """

    def __init__(self, events=None):
        self.events = list(events or ())
        self.controller = None
        self.scenario = None

    def record(self, time_ms, event, **values):
        item = TraceEvent(time_ms=time_ms, seq=len(self.events), event=event, **values)
        self.events.append(item)
        return item

    def of(self, *kinds):
        return [e for e in self.events if e.event in kinds]

    def __iter__(self):
        return iter(self.events)

    def __len__(self):
        return len(self.events)

    def to_jsonl(self):
        return ''.join(json.dumps(asdict(e), cls=DjangoJSONEncoder, separators=(',', ':')) + '\n'
                       for e in self.events)

    def write(self, path):
        with open(path, 'w', encoding='utf-8', newline='\n') as fh:
            fh.write(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text):
        known = {f.name for f in fields(TraceEvent)}
        events = []
        for number, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                events.append(TraceEvent(**{k: v for k, v in raw.items() if k in known}))
            except (ValueError, TypeError) as exc:
                raise ScenarioError(f"bad trace record: {exc}", line=number, column=1) from None
        return cls(events)


# ==========================================
# 2. SIMULATION
# ==========================================
class Simulation:
    def __init__(self, scenario):
        self.scenario = scenario
        self.env = simpy.Environment()
        self.topology = scenario.build_topology()
        self.link_delay = conf.get('LINK_DELAY_MS') if scenario.link_delay_ms is None else scenario.link_delay_ms
        self.control_delay = (conf.get('CONTROL_DELAY_MS') if scenario.control_delay_ms is None
                              else scenario.control_delay_ms)
        self.epoch_ms = scenario.epoch * 1000

        keystore = KeyStore(rng=random.Random(f"keys:{scenario.seed}"))
        self.controller = Controller(self.topology, keystore, flow_ttl=scenario.flow_ttl,
                                     failover_ttl=scenario.failover_ttl)
        self.switches = {}
        for switch_id in sorted(self.topology.switches):
            hosts = [h.port for h in self.topology.hosts_at(switch_id)]
            links = [link.interface_of(switch_id) for link in self.topology.links if switch_id in link.endpoints]
            self.switches[switch_id] = Switch(switch_id, keystore.get(switch_id), host_ports=hosts, link_ports=links)

        self.adversaries = {}
        self.trace = EventTrace()
        self.trace.controller = self.controller
        self.trace.scenario = scenario
        self._uids = itertools.count(1)
        self.uplink = simpy.Store(self.env)
        self.downlink = simpy.Store(self.env)
        self.env.process(self._uplink_loop())
        self.env.process(self._downlink_loop())

    # --- clock --------------------------------------------------------
    @property
    def now_ms(self):
        return self.epoch_ms + self.env.now

    @property
    def now_s(self):
        return now_seconds(self.now_ms)

    def _record(self, event, **values):
        return self.trace.record(self.env.now, event, **values)

    # --- controller channel -------------------------------------------
    def _send(self, messages):
        for switch_id, message in messages:
            self.downlink.put((switch_id, message))

    def _downlink_loop(self):
        while True:
            switch_id, message = yield self.downlink.get()
            yield self.env.timeout(self.control_delay)
            self._apply(switch_id, message)

    def _uplink_loop(self):
        while True:
            kind, switch_id, body = yield self.uplink.get()
            yield self.env.timeout(self.control_delay)
            if kind == 'miss':
                self._send(self.controller.handle_miss(switch_id, body, self.now_s))
            elif kind == 'ack':
                self._send(self.controller.handle_ack(body))

    def _apply(self, switch_id, message):
        released, acks = self.switches[switch_id].apply(message, self.now_ms)
        self._record('rule', switch=switch_id, reason=type(message).__name__)
        for outcome in released:
            self._handle(switch_id, outcome, None)
        for ack in acks:
            self.uplink.put(('ack', switch_id, ack))

    def _notify(self, switch_id, reason, header):
        def deliver():
            yield self.env.timeout(self.control_delay)
            self.controller.handle_drop(DropNotice(switch_id, reason, header, self.now_ms))
        self.env.process(deliver())

    # --- data plane ---------------------------------------------------
    def _arrive(self, switch_id, in_if, packet):
        adversary = self.adversaries.get(switch_id)
        if adversary is not None and adversary.wants_tunnel(packet):
            self.env.process(self._tunnel(switch_id, in_if, packet, adversary.behavior.via))
            return
        outcomes = self.switches[switch_id].receive(packet, in_if, self.now_ms)
        if adversary is not None:
            outcomes = adversary.tamper(outcomes)
        for outcome in outcomes:
            self._handle(switch_id, outcome, packet.header)

    def _tunnel(self, switch_id, in_if, packet, via):
        loop = (switch_id,) + tuple(via) + (switch_id,)
        for a, b in zip(loop, loop[1:]):
            self._record('tunnel', switch=a, flow=packet.label, packet=packet.uid,
                         iface=self.topology.interface_toward(a, b))
            yield self.env.timeout(self.link_delay)
        self._arrive(switch_id, in_if, packet)

    def _handle(self, switch_id, outcome, in_header):
        packet = outcome.packet
        if isinstance(outcome, Forward):
            header = packet.header or b''
            if _lfc(header) > _lfc(in_header):
                self._record('rewrite', switch=switch_id, flow=packet.label, packet=packet.uid,
                             iface=outcome.out_if, header=header.hex())
            self._record('forward', switch=switch_id, flow=packet.label, packet=packet.uid,
                         iface=outcome.out_if, header=header.hex())
            self._transmit(switch_id, outcome.out_if, packet)
        elif isinstance(outcome, Deliver):
            self._record('deliver', switch=switch_id, flow=packet.label, packet=packet.uid, iface=outcome.port)
            if outcome.report is not None:
                self._record('report', switch=switch_id, flow=packet.label, packet=packet.uid,
                             header=outcome.report.header.hex())
        elif isinstance(outcome, Drop):
            self._record('drop', switch=switch_id, flow=packet.label, packet=packet.uid,
                         reason=outcome.reason.value, header=(packet.header or b'').hex())
            if outcome.notify:
                self._notify(switch_id, outcome.reason.value, packet.header or b'')
        elif isinstance(outcome, Discard):
            self._record('discard', switch=switch_id, flow=packet.label, packet=packet.uid)
        elif isinstance(outcome, TableMiss):
            self._record('miss', switch=switch_id, flow=packet.label, packet=packet.uid)
            if outcome.request:
                self.uplink.put(('miss', switch_id, outcome.flow_key))

    def _transmit(self, switch_id, iface, packet):
        attachment = self.topology.attachment(switch_id, iface)
        if attachment is None or attachment[0] != 'switch':
            self._record('lost', switch=switch_id, flow=packet.label, packet=packet.uid, iface=iface)
            return
        if not self.switches[switch_id].core.link_up(iface):
            self._record('lost', switch=switch_id, flow=packet.label, packet=packet.uid, iface=iface)
            return
        _, peer, peer_if = attachment

        def hop():
            yield self.env.timeout(self.link_delay)
            self._arrive(peer, peer_if, packet)
        self.env.process(hop())

    def inject(self, host, flow_key, label, size=0, payload=b'', group=''):
        packet = Packet(uid=next(self._uids), flow_key=flow_key, size=size, payload=payload,
                        group=group, label=label)
        self._record('inject', switch=host.switch, flow=label, packet=packet.uid, iface=host.port)
        self._arrive(host.switch, host.port, packet)
        return packet

    # --- scheduled mutations -----------------------------------------
    def fail_link(self, time_ms, a, b):
        """Take link a-b down at ``time_ms``; the controller hears about it after ``reconfigure_after_ms``."""
        link = self.topology.link_between(a, b)

        def run():
            yield self.env.timeout(max(0, time_ms - self.env.now))
            self.switches[link.a].set_link_state(link.if_a, False)
            self.switches[link.b].set_link_state(link.if_b, False)
            self._record('failure', switch=link.a, iface=link.if_a, reason=str(link))
            yield self.env.timeout(self.scenario.reconfigure_after_ms)
            self._record('reconfigure', reason=str(link))
            self._send(self.controller.handle_link_failure(link.a, link.b, self.now_s))
        self.env.process(run())

    def attach_adversary(self, where, behavior, time_ms=0):
        """Compromise a switch (by id) or a host (by name) from ``time_ms`` on."""
        if behavior.kind == AdversaryKind.FLOOD_FLOWS:
            host = self.topology.host(where)
            self.env.process(self._flood(host, behavior, time_ms))
            return
        if where not in self.switches:
            raise ScenarioError(f"no switch {where} to compromise")
        rng = random.Random(f"adversary:{self.scenario.seed}:{where}")
        adversary = Adversary(self.switches[where], behavior, self.topology, rng)
        if time_ms <= self.env.now:
            self.adversaries[where] = adversary
            return

        def run():
            yield self.env.timeout(max(0, time_ms - self.env.now))
            self.adversaries[where] = adversary
            logger.info(f"Switch {where} turns {behavior}")
        self.env.process(run())

    def _flood(self, host, behavior, time_ms):
        """Fresh flow keys from a malicious host, ``rate`` packets per ms."""
        yield self.env.timeout(time_ms)
        others = [h for h in sorted(self.topology.hosts) if h != host.name]
        if not behavior.dst and not others:
            return
        dst = self.topology.host(behavior.dst or others[0])
        rng = random.Random(f"flood:{self.scenario.seed}:{host.name}")
        interval = 1 / behavior.rate if behavior.rate > 0 else 1
        label = f"flood:{host.name}"
        for key in flood_keys(host, dst, behavior.count, rng):
            self.inject(host, key, label)
            yield self.env.timeout(interval)

    # --- traffic ------------------------------------------------------
    def _flow_process(self, spec):
        src = self.topology.host(spec.src)
        dst = self.topology.host(spec.dst)
        key = FlowKey.between(src, dst, tp_src=spec.tp_src, tp_dst=spec.tp_dst)
        self.controller.set_policy(key, FlowPolicy(spec.name, spec.path, spec.do_not_detour, spec.ttl))
        yield self.env.timeout(spec.start_ms)
        for i in range(spec.packets):
            if self.env.now > self.scenario.duration_ms:
                break
            size = spec.sizes[i % len(spec.sizes)]
            self.inject(src, key, spec.name, size=size, payload=f"{spec.name}:{i}".encode())
            yield self.env.timeout(spec.interval_ms)

    def _multicast_process(self, index, spec):
        source = self.topology.host(spec.source)
        yield self.env.timeout(spec.at_ms)
        self._record('tree', switch=source.switch, flow=spec.group)
        self._send(self.controller.create_multicast_tree(spec.group, source, spec.members, self.now_s,
                                                         ttl=spec.ttl, safeguard=spec.safeguard))
        if not spec.packets:
            return
        yield self.env.timeout(max(0, spec.start_ms - self.env.now))
        key = FlowKey.multicast(source, index)
        for i in range(spec.packets):
            if self.env.now > self.scenario.duration_ms:
                break
            self.inject(source, key, spec.group, size=spec.size, payload=f"{spec.group}:{i}".encode(),
                        group=spec.group)
            yield self.env.timeout(spec.interval_ms)

    def _boot(self):
        """Switch registration: failover tables and monitoring policy land before any traffic."""
        scenario = self.scenario
        messages = self.controller.precompute_failover(self.now_s)
        messages += self.controller.monitor(scenario.monitoring.flows)
        messages += self.controller.report(None if scenario.monitoring.report is None
                                           else scenario.monitoring.report)
        for switch_id, message in messages:
            self.switches[switch_id].apply(message, self.now_ms)

    def run(self):
        scenario = self.scenario
        self._boot()
        for spec in scenario.adversaries:
            self.attach_adversary(spec.host or spec.switch, spec.behavior, spec.at_ms)
        for failure in scenario.failures:
            self.fail_link(failure.at_ms, *failure.link)
        for spec in scenario.flows:
            self.env.process(self._flow_process(spec))
        for index, spec in enumerate(scenario.multicast, start=1):
            self.env.process(self._multicast_process(index, spec))
        self.env.run()
        self._pull_counters()
        logger.info(f"Scenario {scenario.name}: {len(self.trace)} events, "
                    f"{len(self.trace.of('deliver'))} deliveries, {len(self.trace.of('drop'))} drops")
        return self.trace

    def _pull_counters(self):
        for switch_id in sorted(self.switches):
            counts = self.switches[switch_id].counters()
            adversary = self.adversaries.get(switch_id)
            if adversary is not None:
                counts = adversary.report_counters(counts)
            for flow_id in sorted(counts):
                self.trace.record(self.env.now, 'counters', switch=switch_id, flow=self.controller.flow_name(flow_id),
                                  flow_id=flow_id, count=counts[flow_id])


def _lfc(raw):
    """Link-failure counter of an encoded unicast header; 0 for anything else."""
    if not raw or raw[0] & wire.PKT_TYPE_BIT:
        return 0
    return raw[0] & wire.LFC_MASK


def run_scenario(scenario):
    """Execute ``scenario`` to completion and return its trace."""
    return Simulation(scenario).run()


# ==========================================
# 3. ANALYSIS
# ==========================================
@dataclass
class PvcInputs:
    reports: list = field(default_factory=list)     # (label, Report)
    counters: dict = field(default_factory=dict)    # flow id -> {switch: count}


def collect_reports(trace):
    """Egress reports and pulled monitor counters, in trace order."""
    inputs = PvcInputs()
    for event in trace:
        if event.event == 'report':
            inputs.reports.append((event.flow, Report(event.switch, bytes.fromhex(event.header), event.time_ms)))
        elif event.event == 'counters':
            inputs.counters.setdefault(event.flow_id, {})[event.switch] = event.count
    return inputs


@dataclass
class FlowOutcome:
    name: str
    injected: int = 0
    delivered: int = 0
    drops: Counter = field(default_factory=Counter)
    verdicts: Counter = field(default_factory=Counter)
    mismatch_detail: set = field(default_factory=set)
    replay: pvc.ValidationVerdict | None = None
    counters: pvc.ValidationVerdict | None = None
    tainted: bool = False


@dataclass
class RunSummary:
    name: str
    seed: int
    injected: int = 0
    deliveries: int = 0
    drops: Counter = field(default_factory=Counter)
    discards: int = 0
    verdicts: Counter = field(default_factory=Counter)
    flows: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.failures

    def flow(self, name):
        return self.flows.setdefault(name, FlowOutcome(name))


def format_detail(item):
    if isinstance(item, tuple):
        return '-'.join(str(part) for part in item)
    return str(item)


def audit(trace, controller=None, scenario=None):
    """Validate every report in ``trace`` and run replay and counter analysis."""
    controller = controller or trace.controller
    scenario = scenario or trace.scenario
    if controller is None or scenario is None:
        raise ValueError("audit needs the controller state and scenario of the run")
    controller.reset_windows()
    summary = RunSummary(scenario.name, scenario.seed)

    compromised = {spec.switch for spec in scenario.adversaries
                   if spec.switch is not None and spec.behavior.kind != AdversaryKind.HONEST}
    for event in trace:
        outcome = summary.flow(event.flow) if event.flow else None
        if event.event == 'inject':
            summary.injected += 1
            outcome.injected += 1
            outcome.tainted |= event.flow.startswith('flood:')
        elif event.event == 'deliver':
            summary.deliveries += 1
            outcome.delivered += 1
        elif event.event == 'drop':
            summary.drops[event.reason] += 1
            outcome.drops[event.reason] += 1
        elif event.event == 'discard':
            summary.discards += 1
        if outcome is not None and event.switch in compromised and event.event != 'counters':
            outcome.tainted = True

    inputs = collect_reports(trace)
    for label, report in inputs.reports:
        verdict = pvc.validate_header(report, controller)
        summary.verdicts[verdict.outcome.value] += 1
        outcome = summary.flow(label)
        outcome.verdicts[verdict.outcome.value] += 1
        if not verdict.valid:
            outcome.mismatch_detail.update(format_detail(d) for d in verdict.detail)

    threshold = scenario.replay_threshold
    for record in sorted(controller.flows.values(), key=lambda r: r.flow_id):
        if not len(record.seq_window):
            continue
        verdict = pvc.detect_pvf_replay(record, threshold=threshold)
        outcome = summary.flow(record.name or str(record.flow_id))
        if not verdict.valid or outcome.replay is None:
            outcome.replay = verdict

    for flow_id, per_switch in sorted(inputs.counters.items()):
        record = controller.flows.get(flow_id)
        if record is None:
            continue
        path = record.switches
        counts = {s: c for s, c in per_switch.items() if s in path}
        if not counts:
            continue
        verdict = pvc.reconcile_counters(counts, path)
        outcome = summary.flow(record.name or str(flow_id))
        if not verdict.valid or outcome.counters is None:
            outcome.counters = verdict

    summary.failures = check(summary, scenario)
    return summary


def check(summary, scenario):
    """Compare a summary with the scenario's ``expect`` block, or with honest-run rules when it has none."""
    failures = []
    expect = scenario.expect
    if expect is None:
        for name, outcome in sorted(summary.flows.items()):
            if outcome.tainted:
                continue
            if outcome.drops:
                failures.append(f"flow {name}: dropped {dict(outcome.drops)}")
            bad = {k: v for k, v in outcome.verdicts.items() if k != pvc.Outcome.VALID.value}
            if bad:
                failures.append(f"flow {name}: verdicts {bad}")
            if outcome.replay is not None and not outcome.replay.valid:
                failures.append(f"flow {name}: {outcome.replay.evidence}")
            if outcome.counters is not None and not outcome.counters.valid:
                failures.append(f"flow {name}: {outcome.counters.evidence}")
        return failures

    if expect.deliveries is not None and summary.deliveries != expect.deliveries:
        failures.append(f"expected {expect.deliveries} deliveries, got {summary.deliveries}")
    for reason, count in expect.drops.items():
        if summary.drops.get(reason, 0) != count:
            failures.append(f"expected {count} {reason} drops, got {summary.drops.get(reason, 0)}")
    for outcome, count in expect.verdicts.items():
        if summary.verdicts.get(outcome, 0) != count:
            failures.append(f"expected {count} {outcome} verdicts, got {summary.verdicts.get(outcome, 0)}")
    if expect.replay is not None:
        flagged = sorted(n for n, o in summary.flows.items() if o.replay is not None and not o.replay.valid)
        if flagged != sorted(expect.replay):
            failures.append(f"expected replay flags on {sorted(expect.replay)}, got {flagged}")
    if expect.counters is not None:
        for name, detail in expect.counters.items():
            verdict = summary.flows.get(name, FlowOutcome(name)).counters
            got = tuple(format_detail(d) for d in verdict.detail) if verdict is not None else ()
            if sorted(got) != sorted(detail):
                failures.append(f"flow {name}: expected counter flags {list(detail)}, got {list(got)}")
    return failures
