from django.test import SimpleTestCase

from sdnsec.adversary import AdversaryKind
from sdnsec.exceptions import ScenarioError
from sdnsec.scenario import bundled_scenarios, load_scenario, parse_scenario

HEADER = """\
name: t
topology:
  switches:
    - {id: 1, role: edge}
    - {id: 2, role: edge}
  links:
    - [1, 2, 2, 2]
  hosts:
    - {name: h1, switch: 1, port: 1}
    - {name: h2, switch: 2, port: 1}
"""


class ParseTests(SimpleTestCase):

    def test_defaults(self):
        scenario = parse_scenario(HEADER + "flows:\n  - {src: h1, dst: h2}\n")
        flow, = scenario.flows
        self.assertEqual(flow.name, 'flow1')
        self.assertEqual(flow.packets, 10)
        self.assertEqual(flow.sizes, (200,))
        self.assertEqual(flow.tp_src, 49153)
        self.assertEqual(scenario.epoch, 1_000_000)
        self.assertIsNone(scenario.expect)
        self.assertIsNone(scenario.monitoring.report)
        self.assertEqual(len(scenario.build_topology().links), 1)

    def test_full_document(self):
        scenario = parse_scenario(HEADER + """\
seed: 4
controller: {delay_ms: 1, reconfigure_after_ms: 5, replay_threshold: 2}
flows:
  - {name: f1, src: h1, dst: h2, sizes: [100, 200], do_not_detour: true}
failures:
  - {at_ms: 3, link: [2, 1]}
adversaries:
  - {switch: 2, behavior: pvf_replay, source: f1, at_ms: 4}
monitoring:
  report: [f1]
  flows: [f1]
expect:
  deliveries: 3
  drops: {expired: 1}
  verdicts: {valid: 3}
  replay: [f1]
  counters: {f1: [2, "1-2"]}
""")
        self.assertEqual(scenario.seed, 4)
        self.assertEqual(scenario.control_delay_ms, 1)
        self.assertEqual(scenario.replay_threshold, 2)
        self.assertEqual(scenario.flow('f1').sizes, (100, 200))
        self.assertTrue(scenario.flow('f1').do_not_detour)
        self.assertEqual(scenario.failures[0].link, (2, 1))
        adversary, = scenario.adversaries
        self.assertEqual(adversary.behavior.kind, AdversaryKind.PVF_REPLAY)
        self.assertEqual(adversary.at_ms, 4)
        self.assertEqual(scenario.monitoring.report, ('f1',))
        self.assertEqual(scenario.expect.drops, {'expired': 1})
        self.assertEqual(scenario.expect.counters, {'f1': ('2', '1-2')})

    def test_report_none(self):
        scenario = parse_scenario(HEADER + "monitoring: {report: none}\n")
        self.assertEqual(scenario.monitoring.report, ())

    def test_bundled_scenarios_load(self):
        for path in bundled_scenarios():
            with self.subTest(path=path.name):
                self.assertEqual(load_scenario(path).name, path.stem)

    def test_bare_names_resolve_to_bundled_files(self):
        self.assertEqual(load_scenario('honest').name, 'honest')


class ErrorTests(SimpleTestCase):

    def assertScenarioError(self, text, line=None, fragment=''):
        with self.assertRaises(ScenarioError) as ctx:
            parse_scenario(text)
        if line is not None:
            self.assertEqual(ctx.exception.line, line)
        self.assertIn(fragment, str(ctx.exception))
        return ctx.exception

    def test_unknown_key_points_at_the_key(self):
        error = self.assertScenarioError(HEADER + "  colour: blue\n", line=11, fragment="unknown key 'colour'")
        self.assertEqual(error.column, 3)
        self.assertTrue(str(error).startswith('line 11, column 3: '))

    def test_unknown_top_level_key(self):
        self.assertScenarioError(HEADER + "flow: []\n", line=11, fragment="unknown key 'flow'")

    def test_duplicate_key(self):
        self.assertScenarioError(HEADER + "name: again\n", line=11, fragment="duplicate key 'name'")

    def test_yaml_syntax_error_has_a_position(self):
        error = self.assertScenarioError("name: [unclosed\n")
        self.assertIsNotNone(error.line)

    def test_empty_document(self):
        self.assertScenarioError("", fragment='empty scenario')

    def test_topology_is_required(self):
        self.assertScenarioError("name: x\n", line=1, fragment="needs 'topology'")

    def test_bad_values(self):
        # (appended text, line of the offending node, message fragment); HEADER ends on line 10.
        cases = [
            ("flows:\n  - {src: h1, dst: h9}\n", 12, "unknown host h9"),
            ("flows:\n  - {src: h1, dst: h2, packets: -1}\n", 12, "packets must be at least 0"),
            ("flows:\n  - {src: h1, dst: h2, size: 1, sizes: [2]}\n", 12, "either 'size' or 'sizes'"),
            ("flows:\n  - {name: a, src: h1, dst: h2}\n  - {name: a, src: h1, dst: h2}\n", 13,
             "duplicate flow name a"),
            ("flows:\n  - {src: h1, dst: h2, path: [1, 3]}\n", 12, "path must run from switch 1 to 2"),
            ("failures:\n  - {at_ms: 1, link: [1, 3]}\n", 12, "no link 1-3"),
            ("adversaries:\n  - {switch: 2, behavior: teleport}\n", 12, "unknown behavior"),
            ("adversaries:\n  - {switch: 2, behavior: detour, copies: 2}\n", 12, "'copies' does not apply to detour"),
            ("adversaries:\n  - {switch: 2, behavior: forge}\n", 12, "forge needs 'target'"),
            ("adversaries:\n  - {switch: 9, behavior: detour}\n", 12, "unknown switch 9"),
            ("adversaries:\n  - {switch: 2, behavior: flood_flows}\n", 12, "flood_flows runs on a host"),
            ("adversaries:\n  - {switch: 2, behavior: drop_packets, rate: 2}\n", 12, "fraction"),
            ("adversaries:\n  - {switch: 2, behavior: wormhole, via: [3]}\n", 12, "needs link 2-3"),
            ("monitoring: {report: some}\n", 11, "report is 'all', 'none'"),
            ("monitoring: {flows: [zz]}\n", 11, "monitored flow zz does not exist"),
            ("expect: {drops: {lost: 1}}\n", 11, "unknown drop reason 'lost'"),
            ("expect: {verdicts: {fine: 1}}\n", 11, "unknown verdict outcome 'fine'"),
        ]
        for extra, line, fragment in cases:
            with self.subTest(fragment=fragment):
                self.assertScenarioError(HEADER + extra, line=line, fragment=fragment)

    def test_topology_errors(self):
        text = HEADER.replace("port: 1}\n    - {name: h2, switch: 2, port: 1}", "port: 1}\n    - {name: h2, switch: 1, port: 1}")
        self.assertScenarioError(text, line=3, fragment='interface 1 used twice')
        self.assertScenarioError(HEADER.replace('[1, 2, 2, 2]', '[1, 2, 1, 3]'), fragment='self-loop')

    def test_missing_file(self):
        with self.assertRaises(ScenarioError) as ctx:
            load_scenario('/nonexistent/scenario.yaml')
        self.assertIn('cannot read', str(ctx.exception))
