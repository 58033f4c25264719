from dataclasses import replace

from django.test import SimpleTestCase

from sdnsec import pvc, wire
from sdnsec.exceptions import AnalysisError
from sdnsec.pvc import Outcome
from sdnsec.records import Report, SeqWindow
from sdnsec.switch import Deliver

from .support import Network, line_topology


def delivered_report(network, key):
    (switch_id, outcome), = network.send(key)
    assert isinstance(outcome, Deliver), outcome
    return outcome.report


class HeaderValidationTests(SimpleTestCase):

    def setUp(self):
        self.network = Network(line_topology(4))
        self.key = self.network.admit(name='f1')
        self.report = delivered_report(self.network, self.key)

    def test_honest_report_is_valid(self):
        self.assertEqual(self.network.controller.validate(self.report), pvc.VALID)
        record = self.network.controller.active_record(self.key)
        self.assertEqual(record.seq_window.counts(), {1: 1})

    def test_flipped_pvf_names_the_path(self):
        header = wire.decode(self.report.header)
        forged = bytes([header.pvf[0] ^ 1]) + header.pvf[1:]
        report = replace(self.report, header=wire.encode(replace(header, pvf=forged)))
        verdict = self.network.controller.validate(report)
        self.assertEqual(verdict.outcome, Outcome.PVF_MISMATCH)
        self.assertEqual(verdict.detail, (1, 2, 3, 4))
        self.assertIn(header.pvf.hex(), verdict.evidence)

    def test_unknown_flow_id(self):
        header = wire.decode(self.report.header)
        block = replace(header.flow_blocks[0], flow_id=500)
        report = replace(self.report, header=wire.encode(replace(header, flow_blocks=(block,))))
        verdict = self.network.controller.validate(report)
        self.assertEqual(verdict.detail, ('unknown path id',))

    def test_malformed_report(self):
        verdict = self.network.controller.validate(Report(4, b'\x00' * 5))
        self.assertEqual(verdict.outcome, Outcome.PVF_MISMATCH)
        self.assertEqual(verdict.detail, ('malformed report',))

    def test_report_from_the_wrong_switch(self):
        verdict = self.network.controller.validate(replace(self.report, switch=3))
        self.assertEqual(verdict.detail, (3,))

    def test_valid_verdict_has_no_detail(self):
        with self.assertRaises(ValueError):
            pvc.ValidationVerdict(Outcome.VALID, (1,))


class ReplayTests(SimpleTestCase):

    def setUp(self):
        network = Network(line_topology(2))
        key = network.admit(name='f1')
        self.record = network.controller.active_record(key)

    def test_threshold_is_exclusive(self):
        for seq in (1, 1, 1, 2):
            self.record.seq_window.add(seq)
        self.assertTrue(pvc.detect_pvf_replay(self.record, threshold=3).valid)
        self.record.seq_window.add(1)
        verdict = pvc.detect_pvf_replay(self.record, threshold=3)
        self.assertEqual(verdict.outcome, Outcome.REPLAY_SUSPECTED)
        self.assertEqual(verdict.detail, (1,))
        self.assertEqual(verdict.evidence, 'SeqNo 1 seen 4 times')

    def test_replayed_reports_are_flagged(self):
        network = Network(line_topology(3))
        key = network.admit(name='f1')
        report = delivered_report(network, key)
        for _ in range(5):
            self.assertTrue(network.controller.validate(report).valid)
        verdict = pvc.detect_pvf_replay(network.controller.active_record(key), threshold=3)
        self.assertEqual(verdict.detail, (1,))

    def test_window_slides(self):
        window = SeqWindow(size=4)
        for seq in (1, 1, 1, 1, 2, 2, 2, 2):
            window.add(seq)
        self.assertEqual(window.counts(), {2: 4})
        self.assertEqual(len(window), 4)
        self.assertTrue(pvc.detect_pvf_replay(self.record, window=window, threshold=4).valid)


class CounterReconciliationTests(SimpleTestCase):

    def test_consistent_counts(self):
        self.assertEqual(pvc.reconcile_counters({1: 100, 2: 100, 3: 100}, [1, 2, 3]), pvc.VALID)

    def test_low_count_before_a_higher_one_is_dishonest(self):
        verdict = pvc.reconcile_counters({1: 100, 2: 60, 3: 100}, [1, 2, 3])
        self.assertEqual(verdict.outcome, Outcome.COUNTER_INCONSISTENT)
        self.assertEqual(verdict.detail, (2,))

    def test_inflated_middle_count_is_dishonest(self):
        verdict = pvc.reconcile_counters({1: 100, 2: 150, 3: 100}, [1, 2, 3])
        self.assertEqual(verdict.outcome, Outcome.COUNTER_INCONSISTENT)
        self.assertEqual(verdict.detail, (2,))
        self.assertEqual(verdict.evidence, 'dishonest report: 2')

    def test_inflated_and_deflated_reports_are_told_apart(self):
        path = [1, 2, 3, 4, 5]
        cases = [
            ({1: 100, 2: 100, 3: 140, 4: 100, 5: 100}, (3,)),
            ({1: 100, 2: 100, 3: 40, 4: 100, 5: 100}, (3,)),
            ({1: 100, 2: 100, 3: 100, 4: 100, 5: 130}, (5,)),
            ({1: 50, 2: 100, 3: 100, 4: 100, 5: 100}, (1,)),
            ({1: 100, 2: 150, 3: 100, 4: 60, 5: 100}, (2, 4)),
        ]
        for counts, liars in cases:
            with self.subTest(counts=counts):
                self.assertEqual(pvc.reconcile_counters(counts, path).detail, liars)

    def test_spike_before_a_drop_is_the_liar(self):
        verdict = pvc.reconcile_counters({1: 100, 2: 100, 3: 180, 4: 70}, [1, 2, 3, 4])
        self.assertEqual(verdict.detail, (3,))
        verdict = pvc.reconcile_counters({1: 100, 2: 100, 3: 70, 4: 70}, [1, 2, 3, 4])
        self.assertEqual(verdict.detail, ((2, 3),))

    def test_step_down_is_a_link_drop(self):
        verdict = pvc.reconcile_counters({1: 100, 2: 100, 3: 60, 4: 60}, [1, 2, 3, 4])
        self.assertEqual(verdict.detail, ((2, 3),))
        self.assertEqual(verdict.evidence, 'packet drop on 2-3')

    def test_partial_but_contiguous_coverage(self):
        verdict = pvc.reconcile_counters({2: 50, 3: 40}, [1, 2, 3, 4])
        self.assertEqual(verdict.detail, ((2, 3),))

    def test_gaps_and_strangers_are_rejected(self):
        with self.assertRaises(AnalysisError):
            pvc.reconcile_counters({1: 10, 3: 10}, [1, 2, 3])
        with self.assertRaises(AnalysisError):
            pvc.reconcile_counters({1: 10, 9: 10}, [1, 2, 3])


class OverheadEstimateTests(SimpleTestCase):

    def test_data_center_example(self):
        estimate = pvc.estimate_validation_overhead(80_000, 10, 0.01, 850, 5)
        self.assertAlmostEqual(estimate.packet_rate_mpps, 1176.47, places=2)
        self.assertAlmostEqual(estimate.report_bandwidth / 1e9, 131.76, places=2)
        self.assertAlmostEqual(estimate.ratio * 100, 1.647, places=3)
        self.assertAlmostEqual(estimate.mac_rate, estimate.packet_rate * 5)
        self.assertEqual(round(estimate.cpus), 69)

    def test_idle_network(self):
        estimate = pvc.estimate_validation_overhead(10, 10, 0, 850, 3)
        self.assertEqual(estimate.packet_rate, 0)
        self.assertEqual(estimate.ratio, 0.0)

    def test_rejects_nonsense(self):
        with self.assertRaises(ValueError):
            pvc.estimate_validation_overhead(10, 10, 0.1, 0, 3)
        with self.assertRaises(ValueError):
            pvc.estimate_validation_overhead(-1, 10, 0.1, 850, 3)
