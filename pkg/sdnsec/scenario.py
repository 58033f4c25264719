"""
Scenario files: YAML documents describing a topology, traffic, link failures,
adversaries, monitoring and the expected outcome of a run.

Grammar (every key optional unless marked required)::

    name: str
    seed: int                      # keys, adversary randomness
    duration_ms: int               # traffic stops being injected after this
    epoch: int                     # virtual wall clock at t=0, whole seconds
    link_delay_ms: number
    controller:
      delay_ms: number             # per message on the serialized channel
      reconfigure_after_ms: number # failure -> controller re-admission
      replay_threshold: int
      flow_ttl: int
      failover_ttl: int
    topology:                      # required
      switches: [{id: int, role: edge|core, interfaces: int}]
      links: [[a, if_a, b, if_b]]
      hosts: [{name: str, switch: int, port: int, mac: str, ip: str}]
    flows:
      - {name, src, dst, packets, start_ms, interval_ms, size | sizes,
         tp_src, tp_dst, path: [switch ids], do_not_detour, ttl}
    multicast:
      - {group, source, members: [hosts], at_ms, safeguard, ttl,
         packets, start_ms, interval_ms, size}
    failures:
      - {at_ms, link: [a, b]}
    adversaries:
      - {switch: int | host: str, behavior: kind, at_ms, <behavior params>}
    monitoring:
      report: all | none | [flow or group names]
      flows: [flow names]          # counted at every switch on their path
    expect:
      deliveries: int
      drops: {reason: int}
      verdicts: {outcome: int}
      replay: [flow names]         # exactly these flows are flagged
      counters: {flow: [switch id | "a-b"]}
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .adversary import PARAMS, AdversaryBehavior, AdversaryKind
from .exceptions import ScenarioError
from .pvc import Outcome
from .switch import DropReason
from .topology import Host, Link, SwitchRole, SwitchSpec, Topology

logger = logging.getLogger(__name__)

SCENARIO_DIR = Path(__file__).resolve().parent / 'scenarios'


# ==========================================
# 1. SCENARIO TYPES
# ==========================================
@dataclass(frozen=True)
class FlowSpec:
    name: str
    src: str
    dst: str
    packets: int = 10
    start_ms: float = 0
    interval_ms: float = 1
    sizes: tuple = (200,)
    tp_src: int = 49152
    tp_dst: int = 80
    path: tuple | None = None
    do_not_detour: bool = False
    ttl: int | None = None


@dataclass(frozen=True)
class MulticastSpec:
    group: str
    source: str
    members: tuple
    at_ms: float = 0
    safeguard: bool = True
    ttl: int | None = None
    packets: int = 0
    start_ms: float = 0
    interval_ms: float = 1
    size: int = 200


@dataclass(frozen=True)
class FailureSpec:
    at_ms: float
    link: tuple


@dataclass(frozen=True)
class AdversarySpec:
    behavior: AdversaryBehavior
    switch: int | None = None
    host: str = ''
    at_ms: float = 0


@dataclass(frozen=True)
class MonitoringSpec:
    report: tuple | None = None      # None: every delivery is reported
    flows: tuple = ()


@dataclass(frozen=True)
class Expectation:
    deliveries: int | None = None
    drops: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    replay: tuple | None = None
    counters: dict | None = None


@dataclass(frozen=True)
class Scenario:
    name: str
    switches: tuple
    links: tuple
    hosts: tuple
    seed: int = 0
    duration_ms: float = 1000
    epoch: int = 1_000_000
    link_delay_ms: float | None = None
    control_delay_ms: float | None = None
    reconfigure_after_ms: float = 10
    replay_threshold: int | None = None
    flow_ttl: int | None = None
    failover_ttl: int | None = None
    flows: tuple = ()
    multicast: tuple = ()
    failures: tuple = ()
    adversaries: tuple = ()
    monitoring: MonitoringSpec = MonitoringSpec()
    expect: Expectation | None = None
    source: str = ''

    def build_topology(self):
        return Topology(self.switches, self.links, self.hosts)

    def flow(self, name):
        return next(f for f in self.flows if f.name == name)


# ==========================================
# 2. NODE HELPERS
# ==========================================
def _error(node, message):
    mark = node.start_mark if node is not None else None
    if mark is None:
        return ScenarioError(message)
    return ScenarioError(message, line=mark.line + 1, column=mark.column + 1)


def _value(node):
    return yaml.SafeLoader('').construct_object(node, deep=True)


def _mapping(node, allowed, where, required=()):
    if not isinstance(node, yaml.MappingNode):
        raise _error(node, f"{where} must be a mapping")
    items = {}
    for key_node, value_node in node.value:
        key = _value(key_node)
        if key not in allowed:
            raise _error(key_node, f"unknown key '{key}' in {where}")
        if key in items:
            raise _error(key_node, f"duplicate key '{key}' in {where}")
        items[key] = value_node
    for key in required:
        if key not in items:
            raise _error(node, f"{where} needs '{key}'")
    return items


def _sequence(node, where):
    if not isinstance(node, yaml.SequenceNode):
        raise _error(node, f"{where} must be a list")
    return node.value


def _int(node, where, low=None, high=None):
    value = _value(node)
    if not isinstance(value, int) or isinstance(value, bool):
        raise _error(node, f"{where} must be an integer")
    if low is not None and value < low:
        raise _error(node, f"{where} must be at least {low}, got {value}")
    if high is not None and value > high:
        raise _error(node, f"{where} must be at most {high}, got {value}")
    return value


def _number(node, where, low=0):
    value = _value(node)
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise _error(node, f"{where} must be a number")
    if value < low:
        raise _error(node, f"{where} must be at least {low}")
    return value


def _bool(node, where):
    value = _value(node)
    if not isinstance(value, bool):
        raise _error(node, f"{where} must be true or false")
    return value


def _str(node, where):
    value = _value(node)
    if not isinstance(value, str) or not value:
        raise _error(node, f"{where} must be a non-empty string")
    return value


# ==========================================
# 3. SECTIONS
# ==========================================
def _topology(node):
    items = _mapping(node, {'switches', 'links', 'hosts'}, 'topology', required=('switches',))
    switches = []
    for sw in _sequence(items['switches'], 'topology.switches'):
        fields = _mapping(sw, {'id', 'role', 'interfaces'}, 'switch', required=('id',))
        role = SwitchRole.CORE
        if 'role' in fields:
            try:
                role = SwitchRole(_str(fields['role'], 'role'))
            except ValueError:
                raise _error(fields['role'], "role must be 'edge' or 'core'") from None
        interfaces = _int(fields['interfaces'], 'interfaces', 1, 255) if 'interfaces' in fields else 255
        switches.append(SwitchSpec(_int(fields['id'], 'switch id', 1), role, interfaces))

    links = []
    for ln in _sequence(items['links'], 'topology.links') if 'links' in items else ():
        parts = _sequence(ln, 'link')
        if len(parts) != 4:
            raise _error(ln, "a link is [switch_a, if_a, switch_b, if_b]")
        a, if_a, b, if_b = (_int(p, 'link field', 0) for p in parts)
        links.append((ln, Link(a, if_a, b, if_b)))

    hosts = []
    for h in _sequence(items['hosts'], 'topology.hosts') if 'hosts' in items else ():
        fields = _mapping(h, {'name', 'switch', 'port', 'mac', 'ip'}, 'host', required=('name', 'switch', 'port'))
        hosts.append((h, Host(_str(fields['name'], 'host name'), _int(fields['switch'], 'host switch', 1),
                              _int(fields['port'], 'host port', 1, 255),
                              _str(fields['mac'], 'mac') if 'mac' in fields else '',
                              _str(fields['ip'], 'ip') if 'ip' in fields else '')))
    return switches, links, hosts


def _flow(node, index):
    allowed = {'name', 'src', 'dst', 'packets', 'start_ms', 'interval_ms', 'size', 'sizes',
               'tp_src', 'tp_dst', 'path', 'do_not_detour', 'ttl'}
    f = _mapping(node, allowed, 'flow', required=('src', 'dst'))
    if 'size' in f and 'sizes' in f:
        raise _error(node, "give either 'size' or 'sizes'")
    if 'sizes' in f:
        sizes = tuple(_int(s, 'packet size', 1) for s in _sequence(f['sizes'], 'sizes'))
        if not sizes:
            raise _error(f['sizes'], "sizes must not be empty")
    else:
        sizes = (_int(f['size'], 'size', 1),) if 'size' in f else (200,)
    return FlowSpec(
        name=_str(f['name'], 'flow name') if 'name' in f else f"flow{index}",
        src=_str(f['src'], 'src'),
        dst=_str(f['dst'], 'dst'),
        packets=_int(f['packets'], 'packets', 0) if 'packets' in f else 10,
        start_ms=_number(f['start_ms'], 'start_ms') if 'start_ms' in f else 0,
        interval_ms=_number(f['interval_ms'], 'interval_ms') if 'interval_ms' in f else 1,
        sizes=sizes,
        tp_src=_int(f['tp_src'], 'tp_src', 0, 0xFFFF) if 'tp_src' in f else 49152 + index,
        tp_dst=_int(f['tp_dst'], 'tp_dst', 0, 0xFFFF) if 'tp_dst' in f else 80,
        path=tuple(_int(s, 'path switch', 1) for s in _sequence(f['path'], 'path')) if 'path' in f else None,
        do_not_detour=_bool(f['do_not_detour'], 'do_not_detour') if 'do_not_detour' in f else False,
        ttl=_int(f['ttl'], 'ttl', 0) if 'ttl' in f else None,
    )


def _multicast(node):
    allowed = {'group', 'source', 'members', 'at_ms', 'safeguard', 'ttl', 'packets', 'start_ms',
               'interval_ms', 'size'}
    m = _mapping(node, allowed, 'multicast', required=('group', 'source', 'members'))
    members = tuple(_str(h, 'member') for h in _sequence(m['members'], 'members'))
    if not members:
        raise _error(m['members'], "a multicast group needs at least one member")
    return MulticastSpec(
        group=_str(m['group'], 'group'),
        source=_str(m['source'], 'source'),
        members=members,
        at_ms=_number(m['at_ms'], 'at_ms') if 'at_ms' in m else 0,
        safeguard=_bool(m['safeguard'], 'safeguard') if 'safeguard' in m else True,
        ttl=_int(m['ttl'], 'ttl', 0) if 'ttl' in m else None,
        packets=_int(m['packets'], 'packets', 0) if 'packets' in m else 0,
        start_ms=_number(m['start_ms'], 'start_ms') if 'start_ms' in m else 0,
        interval_ms=_number(m['interval_ms'], 'interval_ms') if 'interval_ms' in m else 1,
        size=_int(m['size'], 'size', 1) if 'size' in m else 200,
    )


def _failure(node):
    f = _mapping(node, {'at_ms', 'link'}, 'failure', required=('at_ms', 'link'))
    ends = _sequence(f['link'], 'failure link')
    if len(ends) != 2:
        raise _error(f['link'], "a failed link is [switch_a, switch_b]")
    return f['link'], FailureSpec(_number(f['at_ms'], 'at_ms'), tuple(_int(e, 'switch', 1) for e in ends))


def _adversary(node):
    allowed = {'switch', 'host', 'behavior', 'at_ms'} | set().union(*PARAMS.values())
    a = _mapping(node, allowed, 'adversary', required=('behavior',))
    try:
        kind = AdversaryKind(_str(a['behavior'], 'behavior'))
    except ValueError:
        raise _error(a['behavior'], f"unknown behavior; expected one of "
                                    f"{', '.join(k.value for k in AdversaryKind)}") from None
    params = {}
    for key, value_node in a.items():
        if key in ('switch', 'host', 'behavior', 'at_ms'):
            continue
        if key not in PARAMS[kind]:
            raise _error(value_node, f"'{key}' does not apply to {kind.value}")
        value = _value(value_node)
        if key == 'via':
            value = tuple(_int(v, 'via switch', 1) for v in _sequence(value_node, 'via'))
        elif key in ('rate', 'factor'):
            value = _number(value_node, key)
            if key == 'rate' and kind != AdversaryKind.FLOOD_FLOWS and value > 1:
                raise _error(value_node, "drop rate is a fraction in 0..1")
        elif key == 'advance_pointer':
            value = _bool(value_node, key)
        elif key in ('source', 'dst'):
            value = _str(value_node, key)
        else:
            value = _int(value_node, key, 0)
        params[key] = value
    if ('switch' in a) == ('host' in a):
        raise _error(node, "an adversary sits on exactly one of 'switch' or 'host'")
    if (kind == AdversaryKind.FLOOD_FLOWS) != ('host' in a):
        raise _error(node, "flood_flows runs on a host; every other behavior runs on a switch")
    try:
        behavior = AdversaryBehavior(kind, **params)
    except ScenarioError as exc:
        raise _error(node, exc.message) from None
    return node, AdversarySpec(
        behavior=behavior,
        switch=_int(a['switch'], 'switch', 1) if 'switch' in a else None,
        host=_str(a['host'], 'host') if 'host' in a else '',
        at_ms=_number(a['at_ms'], 'at_ms') if 'at_ms' in a else 0,
    )


def _monitoring(node):
    m = _mapping(node, {'report', 'flows'}, 'monitoring')
    report = None
    if 'report' in m:
        if isinstance(m['report'], yaml.ScalarNode):
            word = _str(m['report'], 'report')
            if word not in ('all', 'none'):
                raise _error(m['report'], "report is 'all', 'none' or a list of names")
            report = None if word == 'all' else ()
        else:
            report = tuple(_str(n, 'report name') for n in _sequence(m['report'], 'report'))
    flows = tuple(_str(n, 'flow name') for n in _sequence(m['flows'], 'monitoring.flows')) if 'flows' in m else ()
    return MonitoringSpec(report=report, flows=flows)


def _expect(node):
    e = _mapping(node, {'deliveries', 'drops', 'verdicts', 'replay', 'counters'}, 'expect')
    for key in ('drops', 'verdicts'):
        if key in e and not isinstance(e[key], yaml.MappingNode):
            raise _error(e[key], f"expect.{key} must be a mapping")
    drops = {}
    for key_node, value_node in (e['drops'].value if 'drops' in e else ()):
        try:
            drops[DropReason(_value(key_node)).value] = _int(value_node, 'drop count', 0)
        except ValueError:
            raise _error(key_node, f"unknown drop reason '{_value(key_node)}'") from None
    verdicts = {}
    for key_node, value_node in (e['verdicts'].value if 'verdicts' in e else ()):
        try:
            verdicts[Outcome(_value(key_node)).value] = _int(value_node, 'verdict count', 0)
        except ValueError:
            raise _error(key_node, f"unknown verdict outcome '{_value(key_node)}'") from None
    counters = None
    if 'counters' in e:
        if not isinstance(e['counters'], yaml.MappingNode):
            raise _error(e['counters'], "expect.counters must be a mapping")
        counters = {}
        for key_node, value_node in e['counters'].value:
            counters[_str(key_node, 'flow')] = tuple(str(_value(n)) for n in _sequence(value_node, 'counter detail'))
    return Expectation(
        deliveries=_int(e['deliveries'], 'deliveries', 0) if 'deliveries' in e else None,
        drops=drops,
        verdicts=verdicts,
        replay=tuple(_str(n, 'flow') for n in _sequence(e['replay'], 'replay')) if 'replay' in e else None,
        counters=counters,
    )


# ==========================================
# 4. LOADING
# ==========================================
TOP_LEVEL = {'name', 'seed', 'duration_ms', 'epoch', 'link_delay_ms', 'controller', 'topology', 'flows',
             'multicast', 'failures', 'adversaries', 'monitoring', 'expect'}
CONTROLLER_KEYS = {'delay_ms', 'reconfigure_after_ms', 'replay_threshold', 'flow_ttl', 'failover_ttl'}


def parse_scenario(text, source=''):
    """Parse and validate a scenario document. Every problem raises ``ScenarioError``."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ScenarioError(exc.problem or str(exc), line=mark.line + 1 if mark else None,
                            column=mark.column + 1 if mark else None) from None
    if root is None:
        raise ScenarioError("empty scenario")
    top = _mapping(root, TOP_LEVEL, 'scenario', required=('topology',))
    ctl = _mapping(top['controller'], CONTROLLER_KEYS, 'controller') if 'controller' in top else {}

    switches, links, hosts = _topology(top['topology'])
    try:
        topology = Topology(switches, [link for _, link in links], [host for _, host in hosts])
    except ScenarioError as exc:
        raise _error(top['topology'], str(exc)) from None

    flows = tuple(_flow(n, i) for i, n in enumerate(_sequence(top['flows'], 'flows'), start=1)) \
        if 'flows' in top else ()
    multicast = tuple(_multicast(n) for n in _sequence(top['multicast'], 'multicast')) if 'multicast' in top else ()
    failures = [_failure(n) for n in _sequence(top['failures'], 'failures')] if 'failures' in top else []
    adversaries = [_adversary(n) for n in _sequence(top['adversaries'], 'adversaries')] \
        if 'adversaries' in top else []

    scenario = Scenario(
        name=_str(top['name'], 'name') if 'name' in top else Path(source).stem or 'scenario',
        switches=tuple(switches),
        links=tuple(link for _, link in links),
        hosts=tuple(topology.hosts.values()),
        seed=_int(top['seed'], 'seed', 0) if 'seed' in top else 0,
        duration_ms=_number(top['duration_ms'], 'duration_ms') if 'duration_ms' in top else 1000,
        epoch=_int(top['epoch'], 'epoch', 0, 0xFFFFFFFF) if 'epoch' in top else 1_000_000,
        link_delay_ms=_number(top['link_delay_ms'], 'link_delay_ms') if 'link_delay_ms' in top else None,
        control_delay_ms=_number(ctl['delay_ms'], 'delay_ms') if 'delay_ms' in ctl else None,
        reconfigure_after_ms=_number(ctl['reconfigure_after_ms'], 'reconfigure_after_ms')
        if 'reconfigure_after_ms' in ctl else 10,
        replay_threshold=_int(ctl['replay_threshold'], 'replay_threshold', 1)
        if 'replay_threshold' in ctl else None,
        flow_ttl=_int(ctl['flow_ttl'], 'flow_ttl', 0) if 'flow_ttl' in ctl else None,
        failover_ttl=_int(ctl['failover_ttl'], 'failover_ttl', 0) if 'failover_ttl' in ctl else None,
        flows=flows,
        multicast=multicast,
        failures=tuple(spec for _, spec in failures),
        adversaries=tuple(spec for _, spec in adversaries),
        monitoring=_monitoring(top['monitoring']) if 'monitoring' in top else MonitoringSpec(),
        expect=_expect(top['expect']) if 'expect' in top else None,
        source=str(source),
    )
    _check_references(scenario, topology, top, failures, adversaries)
    return scenario


def _check_references(scenario, topology, top, failures, adversaries):
    flow_nodes = _sequence(top['flows'], 'flows') if 'flows' in top else []
    names = set()
    for node, flow in zip(flow_nodes, scenario.flows):
        for host in (flow.src, flow.dst):
            if host not in topology.hosts:
                raise _error(node, f"flow {flow.name}: unknown host {host}")
        if flow.name in names:
            raise _error(node, f"duplicate flow name {flow.name}")
        names.add(flow.name)
        if flow.path is not None:
            src, dst = topology.host(flow.src), topology.host(flow.dst)
            if flow.path[0] != src.switch or flow.path[-1] != dst.switch:
                raise _error(node, f"flow {flow.name}: path must run from switch {src.switch} to {dst.switch}")
            for a, b in zip(flow.path, flow.path[1:]):
                if not topology.graph.has_edge(a, b):
                    raise _error(node, f"flow {flow.name}: path uses missing link {a}-{b}")

    multicast_nodes = _sequence(top['multicast'], 'multicast') if 'multicast' in top else []
    for node, spec in zip(multicast_nodes, scenario.multicast):
        for host in (spec.source,) + spec.members:
            if host not in topology.hosts:
                raise _error(node, f"group {spec.group}: unknown host {host}")

    for node, failure in failures:
        if not topology.graph.has_edge(*failure.link):
            raise _error(node, f"no link {failure.link[0]}-{failure.link[1]} to fail")

    groups = {m.group for m in scenario.multicast}
    for node, spec in adversaries:
        if spec.switch is not None and spec.switch not in topology.switches:
            raise _error(node, f"adversary on unknown switch {spec.switch}")
        if spec.host and spec.host not in topology.hosts:
            raise _error(node, f"adversary on unknown host {spec.host}")
        behavior = spec.behavior
        if behavior.source and behavior.source not in names:
            raise _error(node, f"pvf_replay source {behavior.source} is not a flow")
        if behavior.dst and behavior.dst not in topology.hosts:
            raise _error(node, f"flood destination {behavior.dst} is not a host")
        for attr in ('return_switch', 'target'):
            value = getattr(behavior, attr)
            if value is not None and value not in topology.switches:
                raise _error(node, f"{attr} {value} is not a switch")
        if behavior.via:
            loop = (spec.switch,) + behavior.via + (spec.switch,)
            for a, b in zip(loop, loop[1:]):
                if not topology.graph.has_edge(a, b):
                    raise _error(node, f"wormhole via {list(behavior.via)} needs link {a}-{b}")

    for name in scenario.monitoring.flows:
        if name not in names:
            raise _error(top['monitoring'], f"monitored flow {name} does not exist")
    for name in scenario.monitoring.report or ():
        if name not in names and name not in groups:
            raise _error(top['monitoring'], f"reported name {name} is neither a flow nor a group")


def load_scenario(path):
    """Read a scenario file; a bare name resolves to a bundled scenario."""
    path = Path(path)
    if not path.exists() and not path.suffix:
        bundled = SCENARIO_DIR / f"{path}.yaml"
        if bundled.exists():
            path = bundled
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror or exc}") from None
    scenario = parse_scenario(text, source=path)
    logger.info(f"Loaded scenario {scenario.name} from {path}")
    return scenario


def bundled_scenarios():
    return sorted(SCENARIO_DIR.glob('*.yaml'))
