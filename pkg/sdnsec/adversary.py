"""
Malicious switch and host behaviors.

A compromised switch first runs the honest pipeline (it holds valid keys) and
then tampers with what comes out of it. Every behavior is one attack: path
deviation by detour, forging or shortcut, packet replay, silent dropping, lying
about counters, state exhaustion from a host, and the adjacent-colluders
wormhole that path validation cannot see.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace

import networkx as nx

from . import wire
from .exceptions import ScenarioError, UnreachableError
from .pcc import shortest_switch_path
from .switch import Forward
from .topology import FlowKey

logger = logging.getLogger(__name__)


class AdversaryKind(str, enum.Enum):
    HONEST = 'honest'
    DETOUR = 'detour'
    FORGE = 'forge'
    SHORTCUT = 'shortcut'
    PVF_REPLAY = 'pvf_replay'
    SEQNO_REPLAY = 'seqno_replay'
    FLOOD_FLOWS = 'flood_flows'
    DROP_PACKETS = 'drop_packets'
    DISHONEST_COUNTER = 'dishonest_counter'
    WORMHOLE = 'wormhole'


PARAMS = {
    AdversaryKind.HONEST: frozenset(),
    AdversaryKind.DETOUR: frozenset({'return_switch'}),
    AdversaryKind.FORGE: frozenset({'target'}),
    AdversaryKind.SHORTCUT: frozenset({'skip', 'advance_pointer'}),
    AdversaryKind.PVF_REPLAY: frozenset({'source', 'copies'}),
    AdversaryKind.SEQNO_REPLAY: frozenset({'copies'}),
    AdversaryKind.FLOOD_FLOWS: frozenset({'rate', 'count', 'dst'}),
    AdversaryKind.DROP_PACKETS: frozenset({'rate'}),
    AdversaryKind.DISHONEST_COUNTER: frozenset({'factor'}),
    AdversaryKind.WORMHOLE: frozenset({'via'}),
}

REQUIRED = {
    AdversaryKind.FORGE: ('target',),
    AdversaryKind.PVF_REPLAY: ('source',),
    AdversaryKind.WORMHOLE: ('via',),
}


@dataclass(frozen=True)
class AdversaryBehavior:
    kind: AdversaryKind = AdversaryKind.HONEST
    return_switch: int | None = None
    target: int | None = None
    skip: int = 1
    advance_pointer: bool = False
    source: str = ''
    copies: int = 3
    rate: float = 0.5
    count: int = 100
    dst: str = ''
    factor: float = 0.5
    via: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, 'kind', AdversaryKind(self.kind))
        object.__setattr__(self, 'via', tuple(self.via))
        for name in REQUIRED.get(self.kind, ()):
            if getattr(self, name) in (None, '', ()):
                raise ScenarioError(f"{self.kind.value} needs '{name}'")
        if self.kind == AdversaryKind.SHORTCUT and self.skip < 1:
            raise ScenarioError("shortcut skips at least one switch")

    def __str__(self):
        return self.kind.value


@dataclass(frozen=True)
class Discard:
    """A packet silently eaten by a malicious switch; no notification is sent."""
    packet: object


class Adversary:
    """Tampers with the outcomes of one compromised switch."""

    def __init__(self, switch, behavior, topology, rng):
        self.switch = switch
        self.behavior = behavior
        self.topology = topology
        self.rng = rng
        self.tampered = 0
        self._captured = None
        self._tunneled = set()

    @property
    def kind(self):
        return self.behavior.kind

    def __repr__(self):
        return f"<Adversary {self.kind.value} at switch {self.switch.id}>"

    # --- hooks called by the simulation ---------------------------------
    def wants_tunnel(self, packet):
        """Wormhole: divert a fresh unicast packet through the colluders before processing it."""
        if self.kind != AdversaryKind.WORMHOLE or packet.header is None or packet.uid in self._tunneled:
            return False
        self._tunneled.add(packet.uid)
        return True

    def report_counters(self, counters):
        if self.kind != AdversaryKind.DISHONEST_COUNTER:
            return counters
        return {flow_id: int(count * self.behavior.factor) for flow_id, count in counters.items()}

    def tamper(self, outcomes):
        handler = {
            AdversaryKind.DETOUR: self._detour,
            AdversaryKind.FORGE: self._forge,
            AdversaryKind.SHORTCUT: self._shortcut,
            AdversaryKind.PVF_REPLAY: self._pvf_replay,
            AdversaryKind.SEQNO_REPLAY: self._seqno_replay,
            AdversaryKind.DROP_PACKETS: self._drop,
        }.get(self.kind)
        if handler is None:
            return outcomes
        result = []
        for outcome in outcomes:
            if isinstance(outcome, Forward):
                changed = handler(outcome)
                if changed != [outcome]:
                    self.tampered += 1
                result.extend(changed)
            else:
                result.append(outcome)
        return result

    # --- helpers ----------------------------------------------------------
    def _peer(self, iface):
        attachment = self.topology.attachment(self.switch.id, iface)
        if attachment and attachment[0] == 'switch':
            return attachment[1]
        return None

    def _live_neighbors(self):
        for neighbor in sorted(self.topology.graph.neighbors(self.switch.id)):
            iface = self.topology.interface_toward(self.switch.id, neighbor)
            if self.switch.core.link_up(iface):
                yield neighbor, iface

    @staticmethod
    def _unicast(packet):
        if packet.header is None:
            return None
        header = wire.decode(packet.header)
        return header if isinstance(header, wire.SdnsecHeader) else None

    # --- behaviors --------------------------------------------------------
    def _detour(self, outcome):
        header = self._unicast(outcome.packet)
        intended = self._peer(outcome.out_if)
        if header is None or intended is None:
            return [outcome]
        candidates = [(n, i) for n, i in self._live_neighbors() if n != intended]
        if not candidates:
            return [outcome]
        goal = self.behavior.return_switch
        if goal is not None:
            distance = nx.single_source_shortest_path_length(self.topology.graph, goal)
            candidates.sort(key=lambda c: (distance.get(c[0], len(distance) + 1), c[0]))
        neighbor, iface = candidates[0]
        logger.debug(f"Switch {self.switch.id} detours packet {outcome.packet.uid} to {neighbor}")
        return [Forward(iface, outcome.packet)]

    def _forge(self, outcome):
        header = self._unicast(outcome.packet)
        if header is None:
            return [outcome]
        try:
            path = shortest_switch_path(self.topology, self.switch.id, self.behavior.target)
        except UnreachableError:
            return [outcome]
        if len(path) < 2:
            return [outcome]
        forged = []
        for a, b in zip(path[1:], path[2:]):
            forged.append(wire.ForwardingEntry(self.topology.interface_toward(a, b),
                                               self.rng.randbytes(wire.FE_MAC_LEN)))
        forged.append(wire.ForwardingEntry(0, self.rng.randbytes(wire.FE_MAC_LEN)))
        fes = header.fes[:header.fixed.fe_ptr] + tuple(forged)
        if len(fes) > wire.MAX_FES:
            return [outcome]
        header = replace(header, fes=fes)
        iface = self.topology.interface_toward(self.switch.id, path[1])
        return [Forward(iface, outcome.packet.with_header(header))]

    def _shortcut(self, outcome):
        header = self._unicast(outcome.packet)
        peer = self._peer(outcome.out_if)
        if header is None or peer is None:
            return [outcome]
        ptr = header.fixed.fe_ptr
        for _ in range(self.behavior.skip):
            if ptr >= len(header.fes):
                return [outcome]
            attachment = self.topology.attachment(peer, header.fes[ptr].egress_if)
            if not attachment or attachment[0] != 'switch':
                return [outcome]
            peer = attachment[1]
            ptr += 1
        if peer == self.switch.id or not self.topology.graph.has_edge(self.switch.id, peer):
            logger.debug(f"Switch {self.switch.id} has no shortcut to {peer}")
            return [outcome]
        if self.behavior.advance_pointer:
            header = replace(header, fixed=replace(header.fixed, fe_ptr=ptr))
        iface = self.topology.interface_toward(self.switch.id, peer)
        return [Forward(iface, outcome.packet.with_header(header))]

    def _pvf_replay(self, outcome):
        if outcome.packet.label != self.behavior.source:
            return [outcome]
        if self._captured is None:
            self._captured = outcome
            return [outcome]
        replays = [Forward(self._captured.out_if, replace(self._captured.packet, uid=-self._captured.packet.uid))
                   for _ in range(self.behavior.copies)]
        return [outcome] + replays

    def _seqno_replay(self, outcome):
        copies = [Forward(outcome.out_if, replace(outcome.packet, uid=-outcome.packet.uid))
                  for _ in range(self.behavior.copies)]
        return [outcome] + copies

    def _drop(self, outcome):
        if self.rng.random() < self.behavior.rate:
            return [Discard(outcome.packet)]
        return [outcome]


# ==========================================
# HOST-SIDE STATE EXHAUSTION
# ==========================================
def flood_keys(src, dst, count, rng):
    """``count`` distinct, never-admitted flow keys from ``src`` to ``dst``."""
    span = 0x10000 - 1024
    picks = rng.sample(range(span * 1023), count)
    return [FlowKey.between(src, dst, tp_src=1024 + i % span, tp_dst=1 + i // span, ip_proto=17)
            for i in picks]
