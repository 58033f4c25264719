"""
Network model: switches, links, hosts and flow keys, backed by a networkx graph.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import NamedTuple

import networkx as nx

from .exceptions import ScenarioError
from .wire import MAX_EGRESS_ID

logger = logging.getLogger(__name__)

MAX_INTERFACES = 255


class SwitchRole(str, enum.Enum):
    EDGE = 'edge'
    CORE = 'core'


@dataclass(frozen=True)
class SwitchSpec:
    id: int
    role: SwitchRole = SwitchRole.CORE
    interfaces: int = MAX_INTERFACES


@dataclass(frozen=True)
class Link:
    a: int
    if_a: int
    b: int
    if_b: int

    @property
    def endpoints(self):
        return frozenset((self.a, self.b))

    def interface_of(self, switch_id):
        return self.if_a if switch_id == self.a else self.if_b

    def __str__(self):
        return f"{self.a}-{self.b}"


@dataclass(frozen=True)
class Host:
    name: str
    switch: int
    port: int
    mac: str
    ip: str


class FlowKey(NamedTuple):
    """Exact-match subset of the OpenFlow match fields."""
    in_port: int
    eth_src: str
    eth_dst: str
    eth_type: int
    ip_src: str
    ip_dst: str
    ip_proto: int
    tp_src: int
    tp_dst: int

    @classmethod
    def between(cls, src, dst, tp_src=49152, tp_dst=80, ip_proto=6):
        return cls(src.port, src.mac, dst.mac, 0x0800, src.ip, dst.ip, ip_proto, tp_src, tp_dst)

    @classmethod
    def multicast(cls, src, group_index):
        """Flow key of traffic ``src`` sends to the ``group_index``-th multicast group."""
        low = group_index & 0x7FFFFF
        return cls(src.port, src.mac, f"01:00:5e:{low >> 16:02x}:{(low >> 8) & 0xFF:02x}:{low & 0xFF:02x}",
                   0x0800, src.ip, f"239.{low >> 16}.{(low >> 8) & 0xFF}.{low & 0xFF}", 17, 5000, 5000)


def _host_addresses(index):
    return f"02:00:00:00:{index >> 8:02x}:{index & 0xFF:02x}", f"10.0.{index >> 8}.{index & 0xFF}"


# ==========================================
# TOPOLOGY
# ==========================================
class Topology:
    def __init__(self, switches, links, hosts=()):
        self.switches = {}
        self.links = []
        self.hosts = {}
        self._by_mac = {}
        self._ports = {}  # (switch, iface) -> ('switch', peer, peer_if) | ('host', name)
        self.graph = nx.Graph()

        for spec in switches:
            self._add_switch(spec)
        for link in links:
            self._add_link(link)
        for index, host in enumerate(hosts, start=1):
            self._add_host(host, index)

    # --- construction -------------------------------------------------
    def _add_switch(self, spec):
        if not 1 <= spec.id <= MAX_EGRESS_ID:
            raise ScenarioError(f"switch id {spec.id} must fit 16 bits and be positive")
        if spec.id in self.switches:
            raise ScenarioError(f"duplicate switch {spec.id}")
        if not 1 <= spec.interfaces <= MAX_INTERFACES:
            raise ScenarioError(f"switch {spec.id}: interface count must be 1..{MAX_INTERFACES}")
        self.switches[spec.id] = spec
        self.graph.add_node(spec.id)

    def _claim_port(self, switch_id, iface, attachment):
        spec = self.switches.get(switch_id)
        if spec is None:
            raise ScenarioError(f"unknown switch {switch_id}")
        if not 1 <= iface <= spec.interfaces:
            raise ScenarioError(f"switch {switch_id}: interface {iface} outside 1..{spec.interfaces}")
        if (switch_id, iface) in self._ports:
            raise ScenarioError(f"switch {switch_id}: interface {iface} used twice")
        self._ports[(switch_id, iface)] = attachment

    def _add_link(self, link):
        if link.a == link.b:
            raise ScenarioError(f"link {link} is a self-loop")
        if self.graph.has_edge(link.a, link.b):
            raise ScenarioError(f"duplicate link {link}")
        self._claim_port(link.a, link.if_a, ('switch', link.b, link.if_b))
        self._claim_port(link.b, link.if_b, ('switch', link.a, link.if_a))
        self.links.append(link)
        self.graph.add_edge(link.a, link.b, link=link, up=True)

    def _add_host(self, host, index):
        if host.name in self.hosts:
            raise ScenarioError(f"duplicate host {host.name}")
        spec = self.switches.get(host.switch)
        if spec is None:
            raise ScenarioError(f"host {host.name} attached to unknown switch {host.switch}")
        if spec.role != SwitchRole.EDGE:
            raise ScenarioError(f"host {host.name} must attach to an edge switch, {host.switch} is core")
        if not host.mac or not host.ip:
            mac, ip = _host_addresses(index)
            host = Host(host.name, host.switch, host.port, host.mac or mac, host.ip or ip)
        self._claim_port(host.switch, host.port, ('host', host.name))
        self.hosts[host.name] = host
        self._by_mac[host.mac] = host

    # --- queries ------------------------------------------------------
    def host(self, name):
        try:
            return self.hosts[name]
        except KeyError:
            raise ScenarioError(f"unknown host {name}") from None

    def host_by_mac(self, mac):
        host = self._by_mac.get(mac)
        if host is not None:
            return host
        raise ScenarioError(f"no host with address {mac}")

    def edge_switches(self):
        return sorted(s for s, spec in self.switches.items() if spec.role == SwitchRole.EDGE)

    def hosts_at(self, switch_id):
        return sorted((h for h in self.hosts.values() if h.switch == switch_id), key=lambda h: h.port)

    def attachment(self, switch_id, iface):
        """What hangs off an interface: ('switch', peer, peer_if), ('host', name) or None."""
        return self._ports.get((switch_id, iface))

    def link_between(self, a, b):
        data = self.graph.get_edge_data(a, b)
        if data is None:
            raise ScenarioError(f"no link between {a} and {b}")
        return data['link']

    def interface_toward(self, a, b):
        return self.link_between(a, b).interface_of(a)

    def is_up(self, a, b):
        return self.graph[a][b]['up']

    def set_link_state(self, a, b, up):
        self.link_between(a, b)
        self.graph[a][b]['up'] = up
        logger.info(f"Link {a}-{b} {'restored' if up else 'failed'}")

    def live_view(self, exclude=()):
        """Graph view without failed links and without the switch pairs in ``exclude``."""
        excluded = {frozenset(pair) for pair in exclude}

        def keep(u, v):
            return self.graph[u][v]['up'] and frozenset((u, v)) not in excluded

        return nx.subgraph_view(self.graph, filter_edge=keep)
