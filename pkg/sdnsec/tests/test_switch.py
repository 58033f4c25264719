import random

from django.test import SimpleTestCase

from sdnsec import pvc, wire
from sdnsec.adversary import flood_keys
from sdnsec.records import IngressRule, MonitorFlows, ReportPolicy
from sdnsec.switch import Deliver, Drop, DropReason, Forward, Packet, Switch, TableMiss, is_expired

from sdnsec.topology import FlowKey, Host, SwitchRole, SwitchSpec, Topology

from . import acceptance
from .support import NOW_MS, NOW_S, Network, graph_topology, line_topology, square_topology


def outcome_types(results):
    return [type(outcome) for _, outcome in results]


class HonestForwardingTests(SimpleTestCase):

    def test_packets_reach_the_egress_port(self):
        network = Network(line_topology(5))
        key = network.admit()
        for seq in range(1, 4):
            (switch_id, outcome), = network.send(key)
            self.assertEqual(switch_id, 5)
            self.assertIsInstance(outcome, Deliver)
            self.assertEqual(outcome.port, 1)
            self.assertIsNone(outcome.packet.header)
            header = wire.decode(outcome.report.header)
            self.assertEqual(header.flow_blocks[0].seq_no, seq)
            self.assertEqual(header.fixed.fe_ptr, 4)

    def test_no_false_drops(self):
        network = Network(line_topology(5))
        key = network.admit()
        packets = 10_000 if acceptance() else 1_000
        for _ in range(packets):
            (_, outcome), = network.send(key)
            self.assertTrue(network.controller.validate(outcome.report).valid)

    def test_header_leaving_the_ingress(self):
        network = Network(line_topology(3))
        key = network.admit()
        forward = network.first_hop(key)
        self.assertEqual(forward.out_if, 3)
        header = wire.decode(forward.packet.header)
        self.assertEqual(header.fixed.fe_ptr, 0)
        self.assertEqual(header.egress_id, 3)
        self.assertEqual(len(forward.packet.header), wire.overhead_bytes(3))

    def test_single_switch_flow_is_delivered_locally(self):
        topology = Topology([SwitchSpec(1, SwitchRole.EDGE)], [], [Host('h1', 1, 1, '', ''), Host('h2', 1, 2, '', '')])
        network = Network(topology)
        key = network.admit()
        (switch_id, outcome), = network.send(key)
        self.assertEqual(outcome.port, 2)
        self.assertEqual(len(outcome.report.header), wire.MIN_HEADER_LEN)
        self.assertTrue(network.controller.validate(outcome.report).valid)

    def test_sequence_numbers_wrap(self):
        network = Network(line_topology(2))
        key = network.admit()
        network.switches[1].ingress_table._entries[key].seq_counter = wire.MAX_ID
        (_, outcome), = network.send(key)
        self.assertEqual(wire.decode(outcome.report.header).flow_blocks[0].seq_no, 0)


class TamperingTests(SimpleTestCase):

    def flip(self, raw, bit):
        flipped = bytearray(raw)
        flipped[bit // 8] ^= 0x80 >> (bit % 8)
        return bytes(flipped)

    def test_flipped_entry_bits_are_dropped(self):
        network = Network(line_topology(4))
        key = network.admit()
        raw = network.first_hop(key).packet.header
        fes_start = wire.fe_slot_offset(0, 0)
        for bit in range(fes_start * 8, len(raw) * 8):
            results = network.walk(2, 2, Packet(uid=bit, flow_key=key, header=self.flip(raw, bit)))
            with self.subTest(bit=bit):
                (switch_id, outcome), = results
                self.assertIsInstance(outcome, Drop)
                self.assertEqual(outcome.reason, DropReason.MAC_VERIFICATION_FAILED)
                # Slot i is checked by the (i + 2)-th switch.
                self.assertEqual(switch_id, 2 + (bit // 8 - fes_start) // wire.FE_LEN)

    def test_flipped_flow_id_and_expiry_bits_are_dropped(self):
        network = Network(line_topology(4))
        key = network.admit()
        raw = network.first_hop(key).packet.header
        for bit in range(2 * 8, 9 * 8):
            (switch_id, outcome), = network.walk(2, 2, Packet(uid=bit, flow_key=key, header=self.flip(raw, bit)))
            with self.subTest(bit=bit):
                self.assertEqual(switch_id, 2)
                self.assertIn(outcome.reason, (DropReason.MAC_VERIFICATION_FAILED, DropReason.EXPIRED))

    def test_flipped_sequence_and_pvf_bits_fail_validation(self):
        network = Network(line_topology(4))
        key = network.admit()
        raw = network.first_hop(key).packet.header
        pvf_start = wire.current_flow_block_offset(0) + wire.BLOCK_LEN
        bits = list(range(9 * 8, 12 * 8)) + list(range(pvf_start * 8, (pvf_start + wire.PVF_LEN) * 8))
        for bit in bits:
            (_, outcome), = network.walk(2, 2, Packet(uid=bit, flow_key=key, header=self.flip(raw, bit)))
            with self.subTest(bit=bit):
                self.assertIsInstance(outcome, Deliver)
                self.assertEqual(network.controller.validate(outcome.report).outcome, pvc.Outcome.PVF_MISMATCH)

    def test_expired_headers_are_dropped(self):
        network = Network(line_topology(3))
        key = network.admit(ttl=1)
        (switch_id, outcome), = network.send(key, now_ms=NOW_MS + 999)
        self.assertIsInstance(outcome, Deliver)
        forward = network.first_hop(key)
        (switch_id, outcome), = network.walk(2, 2, forward.packet, now_ms=NOW_MS + 1000)
        self.assertEqual((switch_id, outcome.reason), (2, DropReason.EXPIRED))

    def test_expiry_boundary(self):
        self.assertFalse(is_expired(NOW_S + 1, NOW_MS + 999))
        self.assertTrue(is_expired(NOW_S + 1, NOW_MS + 1000))

    def test_malformed_arrivals(self):
        network = Network(line_topology(3))
        key = network.admit()
        (_, outcome), = network.walk(2, 2, Packet(uid=1, flow_key=key))
        self.assertEqual(outcome.reason, DropReason.MALFORMED)
        (_, outcome), = network.walk(2, 2, Packet(uid=2, flow_key=key, header=b'\x00' * 9))
        self.assertEqual(outcome.reason, DropReason.MALFORMED)

    def test_missing_egress_rule(self):
        network = Network(line_topology(3))
        key = network.admit()
        network.switches[3].egress_table._ports.clear()
        (switch_id, outcome), = network.send(key)
        self.assertEqual((switch_id, outcome.reason), (3, DropReason.NO_EGRESS_RULE))


class FailoverTests(SimpleTestCase):

    def test_core_failover_validates(self):
        network = Network(square_topology())
        key = network.admit(name='f1')
        network.fail_link(2, 4)
        (switch_id, outcome), = network.send(key)
        self.assertEqual(switch_id, 4)
        header = wire.decode(outcome.report.header)
        self.assertEqual(header.fixed.lfc, 1)
        self.assertEqual(header.current_flow.flow_id, network.controller.failover_tables[2][4][1].failover_path_id)
        self.assertEqual(network.controller.failover_tables[2][4][1].switches, [2, 1, 3, 4])
        self.assertTrue(network.controller.validate(outcome.report).valid)

    def test_ingress_failover_validates(self):
        network = Network(square_topology())
        key = network.admit()
        network.fail_link(1, 2)
        (switch_id, outcome), = network.send(key)
        header = wire.decode(outcome.report.header)
        self.assertEqual(header.fixed.lfc, 1)
        self.assertEqual(len(header.fes), 3)
        self.assertTrue(network.controller.validate(outcome.report).valid)

    def test_do_not_detour(self):
        network = Network(square_topology())
        key = network.admit(do_not_detour=True)
        network.fail_link(2, 4)
        (switch_id, outcome), = network.send(key)
        self.assertEqual((switch_id, outcome.reason), (2, DropReason.DO_NOT_DETOUR))

    def test_no_failover_path(self):
        network = Network(line_topology(3))
        key = network.admit()
        network.fail_link(2, 3)
        (switch_id, outcome), = network.send(key)
        self.assertEqual((switch_id, outcome.reason), (2, DropReason.NO_FAILOVER))

    def test_link_failure_counter_is_capped(self):
        network = Network(square_topology())
        key = network.admit()
        forward = network.first_hop(key)
        header = wire.decode(forward.packet.header)
        full = wire.SdnsecHeader(
            fixed=wire.HeaderFixed(lfc=wire.MAX_LFC, exp_time=header.fixed.exp_time),
            flow_blocks=header.flow_blocks * (wire.MAX_LFC + 1), pvf=header.pvf, fes=header.fes)
        self.assertEqual(network.switches[2].failover_rewrite(full), DropReason.NO_FAILOVER)


class MulticastTests(SimpleTestCase):

    def setUp(self):
        topology = graph_topology([(1, 2), (2, 3), (2, 4)], {1, 3, 4}, [('src', 1), ('a', 3), ('b', 4)])
        self.network = Network(topology)
        self.key = FlowKey.multicast(topology.host('src'), 1)

    def test_replicated_to_every_member_and_validated(self):
        self.network.install(self.network.controller.create_multicast_tree('g', 'src', ['a', 'b'], NOW_S))
        results = self.network.send(self.key, src='src', group='g')
        self.assertEqual(sorted(s for s, _ in results), [3, 4])
        for _, outcome in results:
            self.assertIsInstance(outcome, Deliver)
            self.assertTrue(self.network.controller.validate(outcome.report).valid)

    def test_expired_tree_header_is_dropped_at_the_core(self):
        self.network.install(self.network.controller.create_multicast_tree('g', 'src', ['a', 'b'], NOW_S))
        (forward,) = self.network.switches[1].receive(self.network.packet(self.key, group='g'), 1, NOW_MS)
        exp_time = wire.decode(forward.packet.header).exp_time
        results = self.network.walk(2, 2, forward.packet, now_ms=exp_time * 1000 - 1)
        self.assertEqual(outcome_types(results), [Deliver, Deliver])
        (switch_id, outcome), = self.network.walk(2, 2, forward.packet, now_ms=exp_time * 1000)
        self.assertEqual((switch_id, outcome.reason), (2, DropReason.EXPIRED))

    def test_unknown_group(self):
        (switch_id, outcome), = self.network.send(self.key, src='src', group='nope')
        self.assertEqual((switch_id, outcome.reason), (1, DropReason.UNKNOWN_TREE))

    def test_unsafe_update_drops_at_uninstalled_switches(self):
        controller = self.network.controller
        self.network.install(controller.create_multicast_tree('g', 'src', ['a', 'b'], NOW_S))
        messages = controller.create_multicast_tree('g', 'src', ['a', 'b'], NOW_S, safeguard=False)
        # Only the ingress has learned the new tree when traffic resumes.
        self.network.install(messages[:2])
        drops = [o for _, o in self.network.send(self.key, src='src', group='g') if isinstance(o, Drop)]
        self.assertEqual([d.reason for d in drops], [DropReason.UNKNOWN_TREE])

    def test_safe_update_has_no_gap(self):
        controller = self.network.controller
        self.network.install(controller.create_multicast_tree('g', 'src', ['a', 'b'], NOW_S))
        messages = controller.create_multicast_tree('g', 'src', ['a', 'b'], NOW_S)
        for prefix in range(len(messages) + 1):
            results = self.network.send(self.key, src='src', group='g')
            self.assertEqual(outcome_types(results), [Deliver, Deliver])
            if prefix < len(messages):
                self.network.install(messages[prefix:prefix + 1])
        self.assertEqual(self.network.switches[1].groups['g'].tree_id, 2)


class StatelessCoreTests(SimpleTestCase):

    def test_flooding_fresh_flows_leaves_core_state_alone(self):
        network = Network(line_topology(3))
        network.serve_misses = True
        core = network.switches[2].core
        before = core.table_sizes()
        src, dst = network.topology.host('h1'), network.topology.host('h2')
        count = 100_000 if acceptance() else 2_000
        for flood_key in flood_keys(src, dst, count, random.Random(0)):
            (switch_id, outcome), = network.send(flood_key)
            self.assertIsInstance(outcome, Deliver)
        self.assertEqual(core.table_sizes(), before)
        self.assertEqual(core.per_flow_lookups, 0)
        self.assertEqual(len(network.switches[1].ingress_table), count)
        self.assertEqual(network.controller.requests, count)

    def test_flood_keys_are_distinct(self):
        src, dst = line_topology(2).host('h1'), line_topology(2).host('h2')
        keys = flood_keys(src, dst, 100_000, random.Random(5))
        self.assertEqual(len(set(keys)), 100_000)

    def test_monitoring_counts_only_listed_flows(self):
        network = Network(line_topology(3))
        key = network.admit()
        other = network.admit(tp_src=1)
        flow_id = network.controller.active_record(key).flow_id
        for switch in network.switches.values():
            switch.apply(MonitorFlows(frozenset({flow_id})), NOW_MS)
        network.send(key)
        network.send(other)
        self.assertEqual([s.counters() for s in network.switches.values()], [{flow_id: 1}] * 3)
        self.assertEqual(network.switches[2].core.per_flow_lookups, 2)


class MissQueueTests(SimpleTestCase):

    def setUp(self):
        self.topology = line_topology(2)
        keys = Network(self.topology).keystore.get(1)
        self.switch = Switch(1, keys, host_ports=[1], link_ports=[3], miss_queue_limit=2)
        self.key = FlowKey.between(self.topology.host('h1'), self.topology.host('h2'))

    def test_first_miss_requests_and_later_ones_queue(self):
        misses = [self.switch.receive(Packet(uid=i, flow_key=self.key), 1, NOW_MS)[0] for i in range(3)]
        self.assertEqual([m.request for m in misses], [True, False, False])
        self.assertEqual(self.switch.miss_overflows, 1)

    def test_rule_flushes_the_queue_in_order(self):
        for i in range(1, 4):
            self.switch.receive(Packet(uid=i, flow_key=self.key), 1, NOW_MS)
        rule = IngressRule(self.key, 1, NOW_S - 5, 2, (wire.ForwardingEntry(1, bytes(7)),), 3)
        released, acks = self.switch.apply(rule, NOW_MS)
        self.assertEqual(acks, [])
        self.assertEqual([o.packet.uid for o in released], [2, 3])
        self.assertTrue(all(isinstance(o, Forward) for o in released))
        # The same rule no longer matches new packets once expired.
        self.assertIsInstance(self.switch.receive(Packet(uid=9, flow_key=self.key), 1, NOW_MS)[0], TableMiss)

    def test_unknown_message(self):
        with self.assertRaises(TypeError):
            self.switch.apply(object(), NOW_MS)

    def test_report_policy(self):
        self.switch.apply(ReportPolicy(report_all=False, flow_ids=frozenset({7})), NOW_MS)
        self.assertTrue(self.switch._should_report(7))
        self.assertFalse(self.switch._should_report(8))
