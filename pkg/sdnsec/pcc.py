"""
Path computation component: shortest paths, flow admission, failover
precomputation and multicast tree construction.
"""
from __future__ import annotations

import logging

import networkx as nx

from . import crypto
from .exceptions import UnreachableError
from .records import (FailoverPathRecord, FlowRecord, Hop, InstallState,
                      MulticastTreeRecord)
from .topology import Host

logger = logging.getLogger(__name__)


# ==========================================
# 1. PATHS
# ==========================================
def shortest_switch_path(topology, src, dst, exclude=()):
    """Fewest-hop switch sequence from ``src`` to ``dst``; ties go to the lexicographically smallest."""
    if src == dst:
        return [src]
    view = topology.live_view(exclude)
    try:
        return min(nx.all_shortest_paths(view, src, dst))
    except (nx.NetworkXNoPath, nx.NodeNotFound):
        raise UnreachableError(f"no path from switch {src} to switch {dst}") from None


def _as_host(topology, host):
    return host if isinstance(host, Host) else topology.host(host)


def compute_path(topology, src_host, dst_host, exclude=()):
    src = _as_host(topology, src_host)
    dst = _as_host(topology, dst_host)
    return shortest_switch_path(topology, src.switch, dst.switch, exclude)


def route_hops(topology, switches, last_egress_if):
    """Attach egress interfaces to a switch sequence; the last switch gets ``last_egress_if``."""
    hops = [Hop(a, topology.interface_toward(a, b)) for a, b in zip(switches, switches[1:])]
    hops.append(Hop(switches[-1], last_egress_if))
    return tuple(hops)


# ==========================================
# 2. FLOW ADMISSION
# ==========================================
def admit_flow(flow_key, topology, keystore, now, ttl, ids, *, path=None, do_not_detour=False, name=''):
    """Build the FlowRecord for a new flow.

    ``now`` is whole seconds. The FE list covers every switch after the ingress,
    the egress included; the ingress' own interface travels in its flow rule.
    """
    src = topology.host_by_mac(flow_key.eth_src)
    dst = topology.host_by_mac(flow_key.eth_dst)
    switches = path if path is not None else compute_path(topology, src, dst)
    hops = route_hops(topology, switches, dst.port)

    flow_id = ids.allocate_flow()
    exp_time = int(now) + int(ttl)
    fes = crypto.build_fe_list([(h.switch, h.egress_if) for h in hops[1:]], keystore, flow_id, exp_time)
    record = FlowRecord(flow_key=flow_key, flow_id=flow_id, path=hops, exp_time=exp_time,
                        egress_id=dst.switch, fes=tuple(fes), do_not_detour=do_not_detour, name=name)
    logger.info(f"Admitted flow {name or flow_id} as FlowID {flow_id} over {switches}, expires {exp_time}")
    return record


# ==========================================
# 3. FAILOVER PATHS
# ==========================================
def failover_path(topology, head, egress, keystore, now, ttl, ids, *, avoid_first_hop=False):
    """Failover path from ``head`` to ``egress``, encoded like a flow path under a FailoverPathID.

    The FE list covers every switch, the head included: the head consumes slot 0
    itself. With ``avoid_first_hop`` the path may not use the first link of the
    plain shortest path, so it still works when that link is the one that failed.
    Raises ``UnreachableError`` when no such path exists. ``head == egress``
    yields the identity record: the packet has already reached its egress.
    """
    exp_time = int(now) + int(ttl)
    if head == egress:
        return FailoverPathRecord(0, head, egress, (Hop(head, 0),), exp_time, ())
    switches = shortest_switch_path(topology, head, egress)
    if avoid_first_hop:
        switches = shortest_switch_path(topology, head, egress, exclude=[(head, switches[1])])
    hops = route_hops(topology, switches, 0)
    failover_id = ids.allocate_failover()
    fes = crypto.build_fe_list([(h.switch, h.egress_if) for h in hops], keystore, failover_id, exp_time)
    return FailoverPathRecord(failover_id, head, egress, hops, exp_time, tuple(fes))


def precompute_failover(topology, keystore, now, ttl, ids, *, avoid_first_hop=False):
    """Per-(switch, egress switch) failover paths; pairs without a path are left out."""
    table = {}
    for head in sorted(topology.switches):
        for egress in topology.edge_switches():
            try:
                table[(head, egress)] = failover_path(topology, head, egress, keystore, now, ttl, ids,
                                                      avoid_first_hop=avoid_first_hop)
            except UnreachableError:
                logger.debug(f"No failover path from {head} to egress {egress}")
    logger.info(f"Precomputed {len(table)} failover paths{' (first hop avoided)' if avoid_first_hop else ''}")
    return table


def failover_candidates(topology, keystore, now, ttl, ids):
    """Per-switch failover tables: egress switch -> candidate records in preference order.

    The plain shortest path comes first; the detour that avoids its first link
    takes over when that link is down.
    """
    shortest = precompute_failover(topology, keystore, now, ttl, ids)
    detours = precompute_failover(topology, keystore, now, ttl, ids, avoid_first_hop=True)
    tables = {}
    for (head, egress), record in shortest.items():
        if record.is_identity:
            continue
        candidates = (record,) + ((detours[(head, egress)],) if (head, egress) in detours else ())
        tables.setdefault(head, {})[egress] = candidates
    return tables


# ==========================================
# 4. MULTICAST TREES
# ==========================================
def create_multicast_tree(topology, source, members, keystore, now, ttl, tree_id, *, group='', safeguard=True):
    """Union of the shortest paths from the source's edge switch to every member.

    Lexicographically smallest shortest paths from one root share their prefixes,
    so the union is a tree. Every non-root switch starts out ``pending``.
    """
    source = _as_host(topology, source)
    root = source.switch
    parents = {root: None}
    interfaces = {root: set()}
    for member in (_as_host(topology, m) for m in members):
        path = shortest_switch_path(topology, root, member.switch)
        for parent, child in zip(path, path[1:]):
            parents.setdefault(child, parent)
            interfaces.setdefault(child, set())
            interfaces[parent].add(topology.interface_toward(parent, child))
        interfaces[member.switch].add(member.port)
    for switch_id in parents:
        keystore.get(switch_id)

    record = MulticastTreeRecord(
        tree_id=tree_id, group=group, root=root, exp_time=int(now) + int(ttl),
        interfaces={s: tuple(sorted(ifs)) for s, ifs in interfaces.items()},
        parents=parents,
        install_state={s: InstallState.PENDING for s in sorted(parents) if s != root},
        safeguard=safeguard,
    )
    logger.info(f"Created multicast tree {tree_id} for group {group or '-'} over {sorted(parents)}")
    return record
