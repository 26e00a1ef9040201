"""Acceptance suite: one test per criterion, printing a PASS/FAIL line each.

Scenario presets are expensive, so they run once per session and are shared
across criteria; the determinism criterion reruns each preset and compares
reports byte for byte.
"""

import random

import pytest

from tiersim.chameleon import Characterizer, CharacterizerConfig
from tiersim.core import CounterSet, LruKind, PageType, Tier, TraceError
from tiersim.policies import PolicyEngine, PolicyKind, PolicySpec
from tiersim.simulator import NodeConfig, SimConfig, build_nodes, run, steady_state_utilization
from tiersim.scenarios import (
    INTERLEAVE_BANDWIDTHS,
    INTERLEAVE_RATIOS,
    build_preset,
    run_scenario,
)
from tiersim.workloads import TraceEvent

from conftest import LruOracle, node_order, random_lru_workout, make_node

SEC = 1_000_000_000


class ScenarioCache:
    def __init__(self):
        self._results = {}

    def get(self, name):
        if name not in self._results:
            self._results[name] = run_scenario(build_preset(name))
        return self._results[name]


@pytest.fixture(scope="session")
def scenarios():
    return ScenarioCache()


def report_line(criterion, description, ok):
    print(f"[{criterion}] {description}: {'PASS' if ok else 'FAIL'}")


# -- Criterion 1: interleave exactness --------------------------------------


def test_criterion_1_interleave_exactness():
    config = SimConfig(
        nodes=[NodeConfig(Tier.LOCAL, 4000), NodeConfig(Tier.CXL, 4000)],
        policy=PolicySpec(PolicyKind.DEFAULT_LINUX, interleave=(2, 1)),
    )
    trace = [TraceEvent(i * 100, "A", i, PageType.ANON) for i in range(3000)]
    report = run(trace, config)
    ok = report.counters["pgalloc_local"] == 2000 and report.counters["pgalloc_cxl"] == 1000
    report_line("AC1", "interleave (2,1): 3000 allocations split exactly 2000/1000", ok)
    assert report.counters["pgalloc_local"] == 2000
    assert report.counters["pgalloc_cxl"] == 1000


# -- Criterion 2: bandwidth optimum ------------------------------------------


def test_criterion_2_utilization_matches_oracle(scenarios):
    result = scenarios.get("interleave-sweep")
    worst = 0.0
    for n, k in INTERLEAVE_RATIOS:
        oracle = steady_state_utilization(
            [n / (n + k), k / (n + k)], list(INTERLEAVE_BANDWIDTHS)
        )
        got = result.reports[f"il_{n}_{k}"].totals["bandwidth_utilization"]
        worst = max(worst, abs(got - oracle))
    ok = worst <= 0.05
    report_line("AC2a", f"simulated utilization within 0.05 of analytic value (worst {worst:.4f})", ok)
    assert ok


def test_criterion_2_two_to_one_argmax(scenarios):
    # As specified, with bandwidths (2.5, 1.0), the 2:1 ratio must win the
    # sweep.  The analytic oracle itself places 3:1 ahead at this bandwidth
    # ratio (see steady_state_utilization: 0.952 vs 0.857), so this check
    # cannot pass while the utilization model matches the oracle; it is kept
    # faithful rather than loosened.  See notes in the README.
    result = scenarios.get("interleave-sweep")
    utils = {
        (n, k): result.reports[f"il_{n}_{k}"].totals["bandwidth_utilization"]
        for n, k in INTERLEAVE_RATIOS
    }
    best = max(utils, key=utils.get)
    ok = best == (2, 1)
    report_line("AC2b", f"2:1 is the sweep argmax at bandwidths {INTERLEAVE_BANDWIDTHS} (got {best[0]}:{best[1]})", ok)
    assert best == (2, 1), (
        f"argmax is {best[0]}:{best[1]}; with bandwidths {INTERLEAVE_BANDWIDTHS} the "
        "analytic optimum among the swept ratios is 3:1, so 2:1 cannot win "
        "while the simulation tracks the bottleneck model"
    )


# -- Criterion 3: TPP vs default Linux on the web preset ---------------------


def test_criterion_3_web_ordering(scenarios):
    result = scenarios.get("web-2to1")
    tpp = result.reports["tpp"]
    default = result.reports["default_linux"]
    baseline = result.reports["all_local"]
    gap = tpp.totals["local_traffic_fraction"] - default.totals["local_traffic_fraction"]
    ratio = tpp.throughput_proxy / baseline.throughput_proxy
    ok = gap >= 0.15 and ratio >= 0.97
    report_line("AC3", f"web-2to1: local traffic gap {gap:.3f} >= 0.15, throughput ratio {ratio:.4f} >= 0.97", ok)
    assert gap >= 0.15
    assert ratio >= 0.97


# -- Criterion 4: active-LRU filter ablation ----------------------------------


def test_criterion_4_filter_ablation(scenarios):
    result = scenarios.get("pingpong-filter")
    on = result.reports["filter_on"].counters
    off = result.reports["filter_off"].counters
    promos_on = on["pgpromote_success_anon"] + on["pgpromote_success_file"]
    promos_off = off["pgpromote_success_anon"] + off["pgpromote_success_file"]
    demoted_ratio = on["pgpromote_candidate_demoted"] / max(1, off["pgpromote_candidate_demoted"])
    ok = promos_on <= 0.5 * promos_off and demoted_ratio <= 0.7
    report_line(
        "AC4",
        f"filter cuts promotions {promos_off} -> {promos_on} (<= 0.5x) and "
        f"demoted-candidates to {demoted_ratio:.2f}x (<= 0.7x)",
        ok,
    )
    assert promos_on <= 0.5 * promos_off
    assert demoted_ratio <= 0.7


# -- Criterion 5: decoupling ablation -----------------------------------------


def test_criterion_5_decoupling_ablation(scenarios):
    result = scenarios.get("bursty-decoupling")
    values = {a.metric: a for a in result.assertion_results}
    p95 = values["p95(allocation_rate_local)[decoupled] / p95(allocation_rate_local)[coupled]"]
    promo = values["pressure-window promotion rate [coupled] / [decoupled]"]
    ok = p95.value >= 1.2 and promo.value < 0.2
    report_line(
        "AC5",
        f"decoupling: p95 local allocation rate {p95.value:.2f}x (>= 1.2), "
        f"pressure-window promotion ratio {promo.value:.3f} (< 0.2)",
        ok,
    )
    assert p95.value >= 1.2
    assert promo.value < 0.2


# -- Criterion 6: conservation suite ------------------------------------------

POLICY_VARIANTS = [
    PolicySpec(PolicyKind.DEFAULT_LINUX),
    PolicySpec(PolicyKind.DEFAULT_LINUX, interleave=(2, 1)),
    PolicySpec(PolicyKind.NUMA_BALANCING, scan_period=40_000),
    PolicySpec(PolicyKind.TPP, scan_period=40_000),
    PolicySpec(PolicyKind.TPP, active_lru_filter=False, scan_period=40_000),
    PolicySpec(PolicyKind.TPP, decouple_watermarks=False, scan_period=40_000),
    PolicySpec(PolicyKind.TPP, type_aware_alloc=True, scan_period=40_000),
    PolicySpec(PolicyKind.AUTOTIERING_LIKE, scan_period=40_000),
]


def _random_small_trace(rng):
    pages = rng.randrange(8, 65)
    events = rng.randrange(64, 513)
    live = {}
    ts = 0
    trace = []
    next_page = 0
    for _ in range(events):
        ts += rng.randrange(1, 2000)
        roll = rng.random()
        if (roll < 0.25 and len(live) < pages) or not live:
            page = next_page
            next_page += 1
            ptype = rng.choice((PageType.ANON, PageType.FILE))
            live[page] = ptype
            trace.append(TraceEvent(ts, "A", page, ptype))
        elif roll < 0.9:
            page = rng.choice(sorted(live))
            trace.append(TraceEvent(ts, rng.choice(("L", "S")), page))
        else:
            page = rng.choice(sorted(live))
            del live[page]
            trace.append(TraceEvent(ts, "F", page))
    return trace


class InvariantHarness:
    """Drives one trace through an engine, checking invariants per event."""

    def __init__(self, config: SimConfig):
        config.validate()
        self.nodes = build_nodes(config)
        self.counters = CounterSet()
        self.engine = PolicyEngine(
            config.policy,
            self.nodes,
            self.counters,
            migration_cost=config.migration_cost,
            swap_latency=config.swap_latency,
        )
        self.engine.audit = self._audit
        self.policy = config.policy
        self.violations = []
        self.promotion_floor = self.engine.local.watermarks.high

    def _audit(self, event, node, frame):
        eng = self.engine
        if event == "swapout" and node.tier is Tier.LOCAL and self.policy.decoupled():
            if any(c.free > 0 for c in eng.cxl_nodes):
                self.violations.append("tpp local swap-out while CXL had free pages")
        if event in ("demote", "promote") and self.policy.kind is PolicyKind.DEFAULT_LINUX:
            self.violations.append("default linux migrated a page")
        if event == "demote" and frame.lru is not LruKind.INACTIVE:
            self.violations.append("demotion selected an active page")
        if event == "promote" and self.policy.kind is PolicyKind.NUMA_BALANCING:
            if eng.local.free < self.promotion_floor:
                self.violations.append("numa balancing promoted below the high watermark")

    def check_conservation(self):
        eng = self.engine
        resident = 0
        for node in self.nodes:
            node.check_conservation()
            resident += node.resident()
        if resident != len(eng.frames):
            self.violations.append("resident count does not match frame registry")
        if set(eng.frames) & set(eng.swap):
            self.violations.append("page simultaneously resident and swapped")

    def deep_check(self):
        eng = self.engine
        seen = {}
        for node in self.nodes:
            for lst in node.lru_lists.values():
                for page, frame in lst.items():
                    if page in seen:
                        self.violations.append(f"page {page} resident on two lists")
                    seen[page] = frame
                    if frame.node != node.id:
                        self.violations.append(f"page {page} node field mismatch")
        if set(seen) != set(eng.frames):
            self.violations.append("frame registry out of sync with LRU lists")

    def run(self, trace):
        eng = self.engine
        next_scan = self.policy.scan_period
        flat = lambda node: node.base_latency
        for i, ev in enumerate(trace):
            ts, op, page, ptype = ev
            while next_scan <= ts:
                eng.numa_scan(next_scan)
                eng.period_tick(next_scan)
                eng.maybe_reclaim(next_scan)
                next_scan += self.policy.scan_period
            if op == "A":
                eng.allocate(page, ptype, ts)
            elif op == "F":
                eng.free_page(page)
            else:
                frame = eng.frames.get(page)
                if frame is None:
                    frame = eng.swap_in(page, ts)
                eng.handle_access(frame, ts, flat)
            eng.maybe_reclaim(ts)
            self.check_conservation()
            self.counters.check_chain()
            if i % 64 == 0:
                self.deep_check()
        self.deep_check()
        return self.violations


def test_criterion_6_conservation_suite():
    failures = []
    lru_trials = 0
    for trial in range(1000):
        rng = random.Random(20_000 + trial)
        trace = _random_small_trace(rng)
        policy = POLICY_VARIANTS[trial % len(POLICY_VARIANTS)]
        local_cap = rng.randrange(16, 49)
        cxl_cap = rng.randrange(16, 49)
        config = SimConfig(
            nodes=[NodeConfig(Tier.LOCAL, local_cap), NodeConfig(Tier.CXL, cxl_cap)],
            policy=policy,
            report_window=100_000,
        )
        harness = InvariantHarness(config)
        violations = harness.run(trace)
        if violations:
            failures.append((trial, policy.kind.value, sorted(set(violations))))

        # LRU order equivalence against the brute-force oracle.
        if trial % 4 == 0:
            lru_trials += 1
            node = make_node(capacity=64)
            oracle = LruOracle()
            random_lru_workout(node, oracle, random.Random(50_000 + trial), steps=200)
            for ptype in PageType:
                for lru in LruKind:
                    if node_order(node, ptype, lru) != oracle.order(ptype, lru):
                        failures.append((trial, "lru-oracle", [f"{ptype}/{lru} order diverged"]))

    ok = not failures
    report_line(
        "AC6",
        f"1000 randomized traces across {len(POLICY_VARIANTS)} policy variants "
        f"(+{lru_trials} LRU oracle workouts): all invariants hold",
        ok,
    )
    assert not failures, failures[:5]


# -- Criterion 7: characterizer exactness --------------------------------------


def _twenty_two_of_hundred_trace(intervals=6):
    events = [TraceEvent(i, "A", i, PageType.ANON) for i in range(100)]
    for k in range(intervals):
        base = k * SEC + 1000
        for p in range(22):
            events.append(TraceEvent(base + p, "L", p))
        # Pad with repeat touches of the same pages so decimated sampling has
        # plenty of events but identical ground truth.
        for j in range(600):
            events.append(TraceEvent(base + 5000 + j, "L", j % 22))
    return events


def test_criterion_7_characterizer_exactness():
    trace = _twenty_two_of_hundred_trace()
    exact_cfg = CharacterizerConfig(sample_ratio=1, mini_interval=SEC, interval=SEC)
    ch = Characterizer(exact_cfg)
    rows = ch.process(trace)
    exact = [r.hot_total / r.total_pages for r in rows]
    exact_ok = all(f == pytest.approx(0.22) for f in exact)

    decim_cfg = CharacterizerConfig(sample_ratio=200, mini_interval=SEC, interval=SEC)
    decim_rows = Characterizer(decim_cfg).process(trace)
    decim_ok = all(d.hot_total <= r.hot_total for d, r in zip(decim_rows, rows))

    # Bitmap shift semantics against a 64-step brute-force history oracle.
    rng = random.Random(99)
    ch2 = Characterizer(CharacterizerConfig(sample_ratio=1, mini_interval=SEC, interval=SEC))
    ch2.ingest(TraceEvent(0, "A", 1, PageType.ANON))
    history = []
    shift_ok = True
    for step in range(64):
        active = rng.random() < 0.5
        if active:
            ch2.ingest(TraceEvent(step * SEC + 10, "L", 1))
        ch2.rotate_interval()
        history.append(active)
        expected = 0
        for age, was_active in enumerate(reversed(history), start=1):
            if was_active and age <= 64:
                expected |= 1 << age
        expected &= (1 << 64) - 1
        if ch2.records.get(1, 0) != expected:
            shift_ok = False

    ok = exact_ok and decim_ok and shift_ok
    report_line(
        "AC7",
        f"R=1 hot_fraction exactly 0.22 on all {len(rows)} intervals, "
        "R=200 never exceeds exact, bitmap shift matches 64-step oracle",
        ok,
    )
    assert exact_ok and decim_ok and shift_ok


# -- Criterion 8: NUMA balancing trap -------------------------------------------


def test_criterion_8_numa_balancing_trap(scenarios):
    result = scenarios.get("cache1-1to4")
    nb = result.reports["numa_balancing"].counters
    tpp = result.reports["tpp"].counters
    nb_success = nb["pgpromote_success_anon"] + nb["pgpromote_success_file"]
    tpp_success = tpp["pgpromote_success_anon"] + tpp["pgpromote_success_file"]
    ratio = nb_success / max(1, tpp_success)
    ok = ratio < 0.2 and tpp_success >= 2000
    report_line(
        "AC8",
        f"cache1-1to4: NUMA balancing promotions {nb_success} vs TPP {tpp_success} "
        f"(ratio {ratio:.4f} < 0.2)",
        ok,
    )
    assert tpp_success >= 2000
    assert ratio < 0.2


# -- Criterion 9: determinism ----------------------------------------------------


def test_criterion_9_preset_determinism(scenarios):
    mismatches = []
    for name in sorted(
        (
            "web-2to1",
            "cache1-2to1",
            "cache2-2to1",
            "cache1-1to4",
            "cache2-1to4",
            "pingpong-filter",
            "bursty-decoupling",
            "interleave-sweep",
            "typeaware-cache",
        )
    ):
        first = scenarios.get(name)
        second = run_scenario(build_preset(name))
        for label in first.reports:
            if first.reports[label].to_json() != second.reports[label].to_json():
                mismatches.append(f"{name}/{label}")
        import json as _json

        if _json.dumps(first.to_dict(), sort_keys=True) != _json.dumps(
            second.to_dict(), sort_keys=True
        ):
            mismatches.append(f"{name}/comparison")
    ok = not mismatches
    report_line("AC9", "every preset rerun produces byte-identical JSON reports", ok)
    assert not mismatches, mismatches
