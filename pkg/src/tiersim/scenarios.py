"""Canned experiment presets comparing policies on shared workloads.

Each preset builds one workload plus a set of policy configurations, runs
them on the same trace (regenerated per config from the shared seed), and
evaluates directional assertions over the resulting reports.  Assertions
encode orderings, never absolute production numbers: throughput ratios are
latency-proxy based and deliberately loose.

The autotiering configurations are a simplified behavioural baseline (see
policies); their numbers are indicative, not a faithful reproduction of
any particular tiering daemon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from .core import Tier
from .policies import PolicyKind, PolicySpec
from .simulator import NodeConfig, SimConfig, SimReport, run, steady_state_utilization
from .workloads import WorkloadKind, WorkloadSpec, generate

DEFAULT_SEED = 42


@dataclass
class Assertion:
    metric: str  # human-readable expression
    comparator: str  # one of < <= > >= ==
    threshold: float
    extract: Callable[[dict[str, SimReport]], float]


@dataclass
class AssertionResult:
    metric: str
    comparator: str
    threshold: float
    value: float
    passed: bool

    def describe(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.metric} {self.comparator} {self.threshold}  (actual {self.value:.6g})"


@dataclass
class Scenario:
    name: str
    workload: WorkloadSpec
    configs: dict[str, SimConfig]
    assertions: list[Assertion] = field(default_factory=list)


@dataclass
class ScenarioResult:
    name: str
    seed: int
    table: dict[str, dict]
    reports: dict[str, SimReport]
    assertion_results: list[AssertionResult]

    def passed(self) -> bool:
        return all(a.passed for a in self.assertion_results)

    def to_dict(self) -> dict:
        return {
            "scenario": self.name,
            "seed": self.seed,
            "table": self.table,
            "assertions": [
                {
                    "metric": a.metric,
                    "comparator": a.comparator,
                    "threshold": a.threshold,
                    "value": a.value,
                    "passed": a.passed,
                }
                for a in self.assertion_results
            ],
            "passed": self.passed(),
        }


_CMP = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b,
}


def _summary_row(report: SimReport) -> dict:
    c = report.counters
    row = dict(report.totals)
    row.update(
        throughput_proxy=report.throughput_proxy,
        pgpromote_success=c["pgpromote_success_anon"] + c["pgpromote_success_file"],
        pgpromote_candidate_demoted=c["pgpromote_candidate_demoted"],
        pgdemote=c["pgdemote_anon"] + c["pgdemote_file"],
        pgswapout=c["pgswapout"],
        pgswapin=c["pgswapin"],
        pgalloc_cxl=c["pgalloc_cxl"],
    )
    return row


def run_scenario(scenario: Scenario) -> ScenarioResult:
    """Run every config on the shared workload and evaluate assertions."""
    reports: dict[str, SimReport] = {}
    for label, config in scenario.configs.items():
        reports[label] = run(generate(scenario.workload), config)
    table = {label: _summary_row(rep) for label, rep in reports.items()}
    results = []
    for a in scenario.assertions:
        value = a.extract(reports)
        results.append(
            AssertionResult(a.metric, a.comparator, a.threshold, value, _CMP[a.comparator](value, a.threshold))
        )
    return ScenarioResult(
        name=scenario.name,
        seed=scenario.workload.seed,
        table=table,
        reports=reports,
        assertion_results=results,
    )


# -- Metric extractors ----------------------------------------------------


def _totals(label: str, key: str):
    return lambda reps: reps[label].totals[key]


def _totals_diff(a: str, b: str, key: str):
    return lambda reps: reps[a].totals[key] - reps[b].totals[key]


def _promo_success(rep: SimReport) -> int:
    return rep.counters["pgpromote_success_anon"] + rep.counters["pgpromote_success_file"]


def _promo_ratio(a: str, b: str):
    return lambda reps: _promo_success(reps[a]) / max(1, _promo_success(reps[b]))


def _counter_ratio(a: str, b: str, key: str):
    return lambda reps: reps[a].counters[key] / max(1, reps[b].counters[key])


def _throughput_ratio(a: str, b: str):
    return lambda reps: reps[a].throughput_proxy / reps[b].throughput_proxy


def _p95(values: list[float]) -> float:
    if not values:
        return 0.0
    ordered = sorted(values)
    idx = max(0, math.ceil(0.95 * len(ordered)) - 1)
    return ordered[idx]


def _p95_window_ratio(a: str, b: str, field_name: str, skip: int):
    def extract(reps):
        va = _p95([getattr(w, field_name) for w in reps[a].windows[skip:]])
        vb = _p95([getattr(w, field_name) for w in reps[b].windows[skip:]])
        return va / vb if vb else float("inf")

    return extract


def _pressure_promotion_ratio(a: str, b: str, skip: int):
    """Mean promotion rate over reclaim-active windows, as a ratio a/b."""

    def mean_pressure_rate(rep):
        rates = [w.promotion_rate for w in rep.windows[skip:] if w.demotion_rate > 0]
        return sum(rates) / len(rates) if rates else 0.0

    def extract(reps):
        denom = mean_pressure_rate(reps[b])
        return mean_pressure_rate(reps[a]) / denom if denom else float("inf")

    return extract


def _sweep_gap(label: str, n: int, k: int, bandwidths: tuple[float, float]):
    shares = [n / (n + k), k / (n + k)]
    oracle = steady_state_utilization(shares, list(bandwidths))

    def extract(reps):
        return abs(reps[label].totals["bandwidth_utilization"] - oracle)

    return extract


def _argmax_margin(candidate: str, others: list[str]):
    def extract(reps):
        best_other = max(reps[o].totals["bandwidth_utilization"] for o in others)
        return reps[candidate].totals["bandwidth_utilization"] - best_other

    return extract


# -- Node/config helpers --------------------------------------------------

_AMPLE_BW = 50.0  # accesses/us; keeps queueing effects negligible


def _two_tier(local_cap: int, cxl_cap: int, bandwidth=( _AMPLE_BW, _AMPLE_BW)):
    return [
        NodeConfig(Tier.LOCAL, local_cap, bandwidth=bandwidth[0]),
        NodeConfig(Tier.CXL, cxl_cap, bandwidth=bandwidth[1]),
    ]


def _all_local_nodes(workload: WorkloadSpec):
    # Oversized single-node baseline: 1.2x the peak live page count.
    return [NodeConfig(Tier.LOCAL, int(1.2 * workload.peak_live_estimate()), bandwidth=_AMPLE_BW)]


def _sim(nodes, policy, **kw) -> SimConfig:
    return SimConfig(nodes=nodes, policy=policy, **kw)


# -- Presets ---------------------------------------------------------------


def web_2to1(seed: int = DEFAULT_SEED) -> Scenario:
    """File-heavy warmup then anon growth on the production 2:1 split."""
    workload = WorkloadSpec(
        WorkloadKind.WEB_LIKE,
        total_pages=60_000,
        anon_fraction=0.55,
        zipf_s=1.2,
        duration=4_000_000_000,
        ops_rate=0.4,
        seed=seed,
    )
    swap = 150_000  # paging cost that makes swap-based reclaim lag allocation
    configs = {
        "default_linux": _sim(_two_tier(42_000, 21_000), PolicySpec(PolicyKind.DEFAULT_LINUX), swap_latency=swap, seed=seed),
        "tpp": _sim(_two_tier(42_000, 21_000), PolicySpec(PolicyKind.TPP), swap_latency=swap, seed=seed),
        "all_local": _sim(_all_local_nodes(workload), PolicySpec(PolicyKind.DEFAULT_LINUX), swap_latency=swap, seed=seed),
    }
    assertions = [
        Assertion(
            "local_traffic_fraction[tpp] - local_traffic_fraction[default_linux]",
            ">=",
            0.15,
            _totals_diff("tpp", "default_linux", "local_traffic_fraction"),
        ),
        Assertion(
            "throughput_proxy[tpp] / throughput_proxy[all_local]",
            ">=",
            0.97,
            _throughput_ratio("tpp", "all_local"),
        ),
    ]
    return Scenario("web-2to1", workload, configs, assertions)


def _cache_preset(
    name: str,
    seed: int,
    hot_fraction: float,
    local_cap: int,
    cxl_cap: int,
    churn: float,
    extra_configs: dict | None = None,
    extra_assertions: list | None = None,
    throughput_floor: float | None = 0.80,
    traffic_gap: float = 0.03,
) -> Scenario:
    workload = WorkloadSpec(
        WorkloadKind.CACHE_LIKE,
        total_pages=60_000,
        anon_fraction=0.25,
        hot_fraction=hot_fraction,
        zipf_s=1.1,
        duration=4_000_000_000,
        ops_rate=0.4,
        churn_rate=churn,
        seed=seed,
    )
    nodes = _two_tier(local_cap, cxl_cap)
    configs = {
        "default_linux": _sim(nodes, PolicySpec(PolicyKind.DEFAULT_LINUX), seed=seed),
        "tpp": _sim(nodes, PolicySpec(PolicyKind.TPP), seed=seed),
        "all_local": _sim(_all_local_nodes(workload), PolicySpec(PolicyKind.DEFAULT_LINUX), seed=seed),
    }
    if extra_configs:
        configs.update(extra_configs(nodes, seed) if callable(extra_configs) else extra_configs)
    assertions = [
        Assertion(
            "local_traffic_fraction[tpp] - local_traffic_fraction[default_linux]",
            ">=",
            traffic_gap,
            _totals_diff("tpp", "default_linux", "local_traffic_fraction"),
        ),
    ]
    assertions.append(
        Assertion(
            "throughput_proxy[tpp] / throughput_proxy[default_linux]",
            ">=",
            1.2,
            _throughput_ratio("tpp", "default_linux"),
        )
    )
    if throughput_floor is not None:
        assertions.append(
            Assertion(
                "throughput_proxy[tpp] / throughput_proxy[all_local]",
                ">=",
                throughput_floor,
                _throughput_ratio("tpp", "all_local"),
            )
        )
    if extra_assertions:
        assertions.extend(extra_assertions)
    return Scenario(name, workload, configs, assertions)


def cache1_2to1(seed: int = DEFAULT_SEED) -> Scenario:
    return _cache_preset("cache1-2to1", seed, hot_fraction=0.40, local_cap=42_000, cxl_cap=21_000, churn=2_000)


def cache2_2to1(seed: int = DEFAULT_SEED) -> Scenario:
    return _cache_preset("cache2-2to1", seed, hot_fraction=0.45, local_cap=42_000, cxl_cap=21_000, churn=2_000)


def cache1_1to4(seed: int = DEFAULT_SEED) -> Scenario:
    """Memory-expansion stress: the local node holds ~20% of the working set."""

    def extra(nodes, seed):
        return {"numa_balancing": _sim(nodes, PolicySpec(PolicyKind.NUMA_BALANCING), seed=seed)}

    extra_assertions = [
        Assertion(
            "pgpromote_success[numa_balancing] / pgpromote_success[tpp]",
            "<",
            0.2,
            _promo_ratio("numa_balancing", "tpp"),
        ),
        Assertion(
            "pgpromote_success[tpp]",
            ">=",
            2000,
            lambda reps: float(_promo_success(reps["tpp"])),
        ),
    ]
    return _cache_preset(
        "cache1-1to4",
        seed,
        hot_fraction=0.40,
        local_cap=14_000,
        cxl_cap=56_000,
        churn=1_000,
        extra_configs=extra,
        extra_assertions=extra_assertions,
        throughput_floor=None,  # CXL-heavy traffic makes a latency proxy floor meaningless here
    )


def cache2_1to4(seed: int = DEFAULT_SEED) -> Scenario:
    return _cache_preset(
        "cache2-1to4",
        seed,
        hot_fraction=0.45,
        local_cap=14_000,
        cxl_cap=56_000,
        churn=1_000,
        throughput_floor=None,
    )


def pingpong_filter(seed: int = DEFAULT_SEED) -> Scenario:
    """Active-LRU filter ablation on a one-touch-heavy stream."""
    workload = WorkloadSpec(
        WorkloadKind.PING_PONG,
        total_pages=50_000,
        one_touch_fraction=0.85,
        zipf_s=1.1,
        duration=5_000_000_000,
        ops_rate=0.3,
        seed=seed,
    )
    nodes = _two_tier(30_000, 40_000)
    configs = {
        "filter_on": _sim(nodes, PolicySpec(PolicyKind.TPP, active_lru_filter=True), seed=seed),
        "filter_off": _sim(nodes, PolicySpec(PolicyKind.TPP, active_lru_filter=False), seed=seed),
    }
    assertions = [
        Assertion(
            "pgpromote_success[filter_on] / pgpromote_success[filter_off]",
            "<=",
            0.5,
            _promo_ratio("filter_on", "filter_off"),
        ),
        Assertion(
            "pgpromote_candidate_demoted[filter_on] / pgpromote_candidate_demoted[filter_off]",
            "<=",
            0.7,
            _counter_ratio("filter_on", "filter_off", "pgpromote_candidate_demoted"),
        ),
    ]
    return Scenario("pingpong-filter", workload, configs, assertions)


def bursty_decoupling(seed: int = DEFAULT_SEED) -> Scenario:
    """Allocation/reclaim decoupling ablation under periodic allocation bursts."""
    workload = WorkloadSpec(
        WorkloadKind.BURSTY_ALLOC,
        total_pages=48_000,
        zipf_s=1.1,
        duration=4_000_000_000,
        ops_rate=0.25,
        churn_rate=30_000,
        hot_rotation_ns=250_000_000,  # fast drift keeps promotion demand up
        seed=seed,
    )
    # Narrow low/high band: the reactive refill pump stays small relative to
    # promotion demand, so free pages pin near each variant's own floor.
    nodes = [
        NodeConfig(Tier.LOCAL, 40_000, bandwidth=_AMPLE_BW, low_frac=0.008, high_frac=0.010),
        NodeConfig(Tier.CXL, 34_000, bandwidth=_AMPLE_BW),
    ]
    # Both variants share a realistic daemon wakeup delay, so sub-millisecond
    # bursts can only be absorbed by pre-built headroom.
    pol = dict(active_lru_filter=False, scan_period=250_000_000, reclaim_wake_latency=1_000_000)
    configs = {
        "decoupled": _sim(nodes, PolicySpec(PolicyKind.TPP, decouple_watermarks=True, **pol), seed=seed),
        "coupled": _sim(nodes, PolicySpec(PolicyKind.TPP, decouple_watermarks=False, **pol), seed=seed),
    }
    skip = 60  # windows before the first burst settle the base working set
    assertions = [
        Assertion(
            "p95(allocation_rate_local)[decoupled] / p95(allocation_rate_local)[coupled]",
            ">=",
            1.2,
            _p95_window_ratio("decoupled", "coupled", "allocation_rate_local", skip),
        ),
        Assertion(
            "pressure-window promotion rate [coupled] / [decoupled]",
            "<",
            0.2,
            _pressure_promotion_ratio("coupled", "decoupled", skip),
        ),
    ]
    return Scenario("bursty-decoupling", workload, configs, assertions)


INTERLEAVE_BANDWIDTHS = (2.5, 1.0)  # 40% bandwidth expansion via the CXL node
INTERLEAVE_RATIOS = ((1, 1), (2, 1), (3, 1), (1, 2))


def interleave_sweep(seed: int = DEFAULT_SEED) -> Scenario:
    """N:K interleave sweep under a uniform bandwidth-saturating drive."""
    workload = WorkloadSpec(
        WorkloadKind.UNIFORM_BANDWIDTH,
        total_pages=30_000,
        duration=120_000_000,
        ops_rate=6.0,
        seed=seed,
    )
    configs = {}
    for n, k in INTERLEAVE_RATIOS:
        configs[f"il_{n}_{k}"] = _sim(
            _two_tier(33_000, 33_000, bandwidth=INTERLEAVE_BANDWIDTHS),
            PolicySpec(PolicyKind.DEFAULT_LINUX, interleave=(n, k)),
            seed=seed,
        )
    assertions = [
        Assertion(
            f"|bandwidth_utilization[il_{n}_{k}] - steady_state({n}:{k})|",
            "<=",
            0.05,
            _sweep_gap(f"il_{n}_{k}", n, k, INTERLEAVE_BANDWIDTHS),
        )
        for n, k in INTERLEAVE_RATIOS
    ]
    assertions.append(
        Assertion(
            "bandwidth_utilization[il_2_1] - max(other ratios)",
            ">",
            0.0,
            _argmax_margin("il_2_1", [f"il_{n}_{k}" for n, k in INTERLEAVE_RATIOS if (n, k) != (2, 1)]),
        )
    )
    return Scenario("interleave-sweep", workload, configs, assertions)


def typeaware_cache(seed: int = DEFAULT_SEED) -> Scenario:
    """Page-type-aware allocation on a cache workload with a small local node."""
    workload = WorkloadSpec(
        WorkloadKind.CACHE_LIKE,
        total_pages=50_000,
        anon_fraction=0.25,
        hot_fraction=0.40,
        zipf_s=1.1,
        duration=4_000_000_000,
        ops_rate=0.35,
        churn_rate=1_000,
        seed=seed,
    )
    nodes = _two_tier(12_000, 48_000)
    configs = {
        "typeaware": _sim(nodes, PolicySpec(PolicyKind.TPP, type_aware_alloc=True), seed=seed),
        "plain": _sim(nodes, PolicySpec(PolicyKind.TPP, type_aware_alloc=False), seed=seed),
        "all_local": _sim(_all_local_nodes(workload), PolicySpec(PolicyKind.DEFAULT_LINUX), seed=seed),
    }
    assertions = [
        Assertion(
            "pgdemote[typeaware] / pgdemote[plain]",
            "<=",
            0.7,
            lambda reps: (
                (reps["typeaware"].counters["pgdemote_anon"] + reps["typeaware"].counters["pgdemote_file"])
                / max(1, reps["plain"].counters["pgdemote_anon"] + reps["plain"].counters["pgdemote_file"])
            ),
        ),
        Assertion(
            "pgpromote_candidate_demoted[typeaware] / pgpromote_candidate_demoted[plain]",
            "<=",
            0.7,
            _counter_ratio("typeaware", "plain", "pgpromote_candidate_demoted"),
        ),
        Assertion(
            "throughput_proxy[typeaware] / throughput_proxy[plain]",
            ">=",
            0.97,
            _throughput_ratio("typeaware", "plain"),
        ),
    ]
    return Scenario("typeaware-cache", workload, configs, assertions)


PRESETS: dict[str, Callable[[int], Scenario]] = {
    "web-2to1": web_2to1,
    "cache1-2to1": cache1_2to1,
    "cache2-2to1": cache2_2to1,
    "cache1-1to4": cache1_1to4,
    "cache2-1to4": cache2_1to4,
    "pingpong-filter": pingpong_filter,
    "bursty-decoupling": bursty_decoupling,
    "interleave-sweep": interleave_sweep,
    "typeaware-cache": typeaware_cache,
}


def build_preset(name: str, seed: int = DEFAULT_SEED) -> Scenario:
    if name not in PRESETS:
        raise KeyError(f"unknown scenario preset {name!r}; known: {', '.join(sorted(PRESETS))}")
    return PRESETS[name](seed)
