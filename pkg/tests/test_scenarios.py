import json

from tiersim.core import Tier
from tiersim.policies import PolicyKind, PolicySpec
from tiersim.scenarios import (
    PRESETS,
    Assertion,
    Scenario,
    build_preset,
    run_scenario,
)
from tiersim.simulator import NodeConfig, SimConfig
from tiersim.workloads import WorkloadKind, WorkloadSpec

EXPECTED_PRESETS = {
    "web-2to1",
    "cache1-2to1",
    "cache2-2to1",
    "cache1-1to4",
    "cache2-1to4",
    "pingpong-filter",
    "bursty-decoupling",
    "interleave-sweep",
    "typeaware-cache",
}


def tiny_scenario(seed=1):
    workload = WorkloadSpec(
        WorkloadKind.CACHE_LIKE, total_pages=800, duration=150_000_000, ops_rate=0.4, seed=seed
    )
    nodes = [NodeConfig(Tier.LOCAL, 600), NodeConfig(Tier.CXL, 600)]
    configs = {
        "tpp": SimConfig(nodes=nodes, policy=PolicySpec(PolicyKind.TPP), seed=seed),
        "default": SimConfig(nodes=nodes, policy=PolicySpec(PolicyKind.DEFAULT_LINUX), seed=seed),
    }
    assertions = [
        Assertion(
            "local_traffic_fraction[tpp] - local_traffic_fraction[default]",
            ">=",
            -1.0,
            lambda reps: reps["tpp"].totals["local_traffic_fraction"]
            - reps["default"].totals["local_traffic_fraction"],
        ),
        Assertion("impossible", ">", 10.0, lambda reps: 1.0),
    ]
    return Scenario("tiny", workload, configs, assertions)


class TestRunScenario:
    def test_table_and_assertions_evaluated(self):
        result = run_scenario(tiny_scenario())
        assert set(result.table) == {"tpp", "default"}
        assert set(result.reports) == {"tpp", "default"}
        statuses = [a.passed for a in result.assertion_results]
        assert statuses == [True, False]
        assert not result.passed()

    def test_failed_assertions_are_listed_not_raised(self):
        result = run_scenario(tiny_scenario())
        failed = [a for a in result.assertion_results if not a.passed]
        assert failed and failed[0].metric == "impossible"
        assert failed[0].value == 1.0

    def test_identical_seed_reproduces_comparison(self):
        a = run_scenario(tiny_scenario(seed=5))
        b = run_scenario(tiny_scenario(seed=5))
        assert json.dumps(a.to_dict(), sort_keys=True) == json.dumps(b.to_dict(), sort_keys=True)
        for label in a.reports:
            assert a.reports[label].to_json() == b.reports[label].to_json()

    def test_configs_share_one_workload(self):
        # Both configs consumed the identical trace: same totals of events.
        result = run_scenario(tiny_scenario())
        allocs = {
            label: rep.counters["pgalloc_local"]
            + rep.counters["pgalloc_cxl"]
            - rep.counters["pgswapin"]
            for label, rep in result.reports.items()
        }
        assert allocs["tpp"] == allocs["default"]


class TestPresets:
    def test_preset_names_match_interface(self):
        assert set(PRESETS) == EXPECTED_PRESETS

    def test_presets_build_with_any_seed(self):
        for name in PRESETS:
            scenario = build_preset(name, seed=7)
            assert scenario.workload.seed == 7
            assert scenario.configs
            assert scenario.assertions
            for config in scenario.configs.values():
                config.validate()

    def test_assertions_reference_only_report_metrics(self):
        # Every extractor runs against a minimal fake report mapping.
        class FakeReport:
            def __init__(self):
                from tiersim.core import CounterSet
                from tiersim.simulator import WindowStats

                self.counters = CounterSet()
                self.totals = {
                    "accesses": 0,
                    "local_traffic_fraction": 0.5,
                    "cxl_traffic_fraction": 0.5,
                    "mean_access_latency": 1.0,
                    "bandwidth_utilization": 0.5,
                    "allocation_rate_local": 0.0,
                    "promotion_rate": 0.0,
                    "demotion_rate": 0.0,
                }
                self.throughput_proxy = 1.0
                self.windows = [
                    WindowStats(0, 1, 0.5, 0.5, 1.0, 0.5, 10.0, 1.0, 1.0),
                    WindowStats(1, 1, 0.5, 0.5, 1.0, 0.5, 20.0, 2.0, 0.0),
                ] * 50

        for name in PRESETS:
            scenario = build_preset(name)
            fakes = {label: FakeReport() for label in scenario.configs}
            for assertion in scenario.assertions:
                value = assertion.extract(fakes)
                assert isinstance(value, (int, float))
