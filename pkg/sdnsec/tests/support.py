"""Topologies and a synchronous hop-by-hop network for switch-level tests."""
import itertools
import random

from sdnsec.controller import Controller, FlowPolicy
from sdnsec.crypto import KeyStore
from sdnsec.switch import Forward, Packet, Switch, TableMiss
from sdnsec.topology import FlowKey, Host, Link, SwitchRole, SwitchSpec, Topology

NOW_S = 1_000_000
NOW_MS = NOW_S * 1000


def line_topology(n):
    """Switches 1..n in a line; h1 on switch 1, h2 on switch n, both on port 1.

    Switch i reaches i-1 on interface 2 and i+1 on interface 3.
    """
    edges = {1, n}
    switches = [SwitchSpec(i, SwitchRole.EDGE if i in edges else SwitchRole.CORE) for i in range(1, n + 1)]
    links = [Link(i, 3, i + 1, 2) for i in range(1, n)]
    hosts = [Host('h1', 1, 1, '', ''), Host('h2', n, 1, '', '')]
    return Topology(switches, links, hosts)


def graph_topology(edges, edge_switches, hosts):
    """Topology from switch pairs; interfaces are numbered from 2 per switch in edge order."""
    ids = sorted({s for pair in edges for s in pair} | {h[1] for h in hosts})
    switches = [SwitchSpec(i, SwitchRole.EDGE if i in edge_switches else SwitchRole.CORE) for i in ids]
    next_if = {i: 2 for i in ids}
    links = []
    for a, b in edges:
        links.append(Link(a, next_if[a], b, next_if[b]))
        next_if[a] += 1
        next_if[b] += 1
    return Topology(switches, links, [Host(name, sw, 1, '', '') for name, sw in hosts])


def square_topology():
    """1-2-4 and 1-3-4; h1 on 1, h2 on 4."""
    return graph_topology([(1, 2), (2, 4), (1, 3), (3, 4)], {1, 4}, [('h1', 1), ('h2', 4)])


class Network:
    """Controller plus switches, delivering packets instantly and in order."""

    def __init__(self, topology, seed=0, **controller_options):
        self.topology = topology
        self.keystore = KeyStore(rng=random.Random(seed))
        self.controller = Controller(topology, self.keystore, **controller_options)
        self.switches = {}
        for switch_id in sorted(topology.switches):
            self.switches[switch_id] = Switch(
                switch_id, self.keystore.get(switch_id),
                host_ports=[h.port for h in topology.hosts_at(switch_id)],
                link_ports=[link.interface_of(switch_id) for link in topology.links if switch_id in link.endpoints],
            )
        self.adversaries = {}
        # Misses are queued at the ingress unless the controller is asked to admit them.
        self.serve_misses = False
        self._uids = itertools.count(1)
        self.install(self.controller.precompute_failover(NOW_S))

    def install(self, messages, now_ms=NOW_MS):
        released = []
        for switch_id, message in messages:
            outcomes, acks = self.switches[switch_id].apply(message, now_ms)
            released.extend((switch_id, o) for o in outcomes)
            for ack in acks:
                self.install(self.controller.handle_ack(ack), now_ms)
        return released

    def admit(self, src='h1', dst='h2', now_s=NOW_S, tp_src=49152, **policy):
        key = FlowKey.between(self.topology.host(src), self.topology.host(dst), tp_src=tp_src)
        if policy:
            self.controller.set_policy(key, FlowPolicy(**policy))
        self.install(self.controller.handle_miss(self.topology.host(src).switch, key, now_s))
        return key

    def fail_link(self, a, b):
        link = self.topology.link_between(a, b)
        self.switches[link.a].set_link_state(link.if_a, False)
        self.switches[link.b].set_link_state(link.if_b, False)

    def packet(self, key, group=''):
        return Packet(uid=next(self._uids), flow_key=key, size=200, payload=b'x', group=group)

    def send(self, key, src='h1', now_ms=NOW_MS, group=''):
        """Inject one packet and follow it; returns (switch, outcome) for every non-forward outcome."""
        host = self.topology.host(src)
        return self.walk(host.switch, host.port, self.packet(key, group), now_ms)

    def walk(self, switch_id, in_if, packet, now_ms=NOW_MS):
        pending = [(switch_id, in_if, packet)]
        results = []
        while pending:
            at, iface, pkt = pending.pop(0)
            outcomes = self.switches[at].receive(pkt, iface, now_ms)
            if at in self.adversaries:
                outcomes = self.adversaries[at].tamper(outcomes)
            queue = [(at, outcome) for outcome in outcomes]
            while queue:
                at, outcome = queue.pop(0)
                if isinstance(outcome, Forward):
                    attachment = self.topology.attachment(at, outcome.out_if)
                    if attachment and attachment[0] == 'switch' and self.switches[at].core.link_up(outcome.out_if):
                        pending.append((attachment[1], attachment[2], outcome.packet))
                        continue
                elif isinstance(outcome, TableMiss) and outcome.request and self.serve_misses:
                    messages = self.controller.handle_miss(at, outcome.flow_key, now_ms // 1000)
                    queue.extend(self.install(messages, now_ms))
                    continue
                results.append((at, outcome))
        return results

    def first_hop(self, key, src='h1'):
        """Header bytes as they leave the ingress switch (after its rule is installed)."""
        host = self.topology.host(src)
        (outcome,) = self.switches[host.switch].receive(self.packet(key), host.port, NOW_MS)
        return outcome
