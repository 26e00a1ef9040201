"""Deterministic trace-driven event loop and report generation.

Feeds one trace through one policy, charging a latency model per access,
waking the sampling and reclaim daemons on their simulated-time cadence,
and aggregating a windowed report.  Trace timestamps drive the clock
(open loop); charged latency never stretches trace time, but the
throughput proxy divides completed accesses by total charged latency to
approximate the closed-loop rate an application would see.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

from .core import (
    CounterSet,
    NodeState,
    SpecError,
    Tier,
    TraceError,
    resolve_watermarks,
)
from .policies import PolicyEngine, PolicySpec

DEFAULT_LOCAL_LATENCY = 100.0  # ns per access
DEFAULT_CXL_LATENCY = 170.0  # ns; ~70 ns over local DRAM
LATENCY_UTILIZATION_CAP = 0.95  # queueing model clamp: at most 20x base


@dataclass
class NodeConfig:
    """Parameters for one memory tier node."""

    tier: Tier
    capacity: int
    base_latency: float | None = None
    bandwidth: float = 1000.0  # max accesses per simulated microsecond
    distance: int | None = None
    min_frac: float = 0.005
    low_frac: float = 0.01
    high_frac: float = 0.015

    def resolved_latency(self) -> float:
        if self.base_latency is not None:
            return self.base_latency
        return DEFAULT_LOCAL_LATENCY if self.tier is Tier.LOCAL else DEFAULT_CXL_LATENCY

    def resolved_distance(self) -> int:
        if self.distance is not None:
            return self.distance
        return 10 if self.tier is Tier.LOCAL else 20


@dataclass
class SimConfig:
    """Everything one simulation run depends on."""

    nodes: list[NodeConfig]
    policy: PolicySpec
    swap_latency: int = 10_000  # ns charged to a faulting access on swap-in
    migration_cost: int = 1_000  # ns per migrated page (background budget)
    report_window: int = 10_000_000  # ns per report window
    seed: int = 0

    def validate(self) -> None:
        locals_ = [n for n in self.nodes if n.tier is Tier.LOCAL]
        cxls = [n for n in self.nodes if n.tier is Tier.CXL]
        if len(locals_) != 1:
            raise SpecError(f"exactly one local node required, got {len(locals_)}")
        for c in cxls:
            if c.resolved_latency() <= locals_[0].resolved_latency():
                raise SpecError("CXL base latency must exceed local base latency")
        if self.report_window < 1 or self.swap_latency < 0 or self.migration_cost < 0:
            raise SpecError("invalid latency/window configuration")
        self.policy.validate()


def build_nodes(config: SimConfig) -> list[NodeState]:
    """Materialize NodeStates with policy-appropriate watermarks."""
    decoupled = config.policy.decoupled()
    nodes = []
    for idx, nc in enumerate(config.nodes):
        demotion_frac = None
        if decoupled and nc.tier is Tier.LOCAL:
            demotion_frac = config.policy.demote_scale_factor
        # allocation_frac left unset: the allocation watermark coincides with
        # the (ordering-adjusted) low watermark.
        wm = resolve_watermarks(
            nc.capacity,
            min_frac=nc.min_frac,
            low_frac=nc.low_frac,
            high_frac=nc.high_frac,
            demotion_frac=demotion_frac,
        )
        nodes.append(
            NodeState(
                idx,
                nc.tier,
                nc.capacity,
                wm,
                base_latency=nc.resolved_latency(),
                bandwidth=nc.bandwidth,
                distance=nc.resolved_distance(),
            )
        )
    return nodes


def access_latency(node: NodeState, window_utilization: float) -> float:
    """Base latency inflated by queueing as the node nears saturation."""
    u = window_utilization
    if u > LATENCY_UTILIZATION_CAP:
        u = LATENCY_UTILIZATION_CAP
    elif u < 0.0:
        u = 0.0
    return node.base_latency / (1.0 - u)


def steady_state_utilization(shares, bandwidths) -> float:
    """Achievable fraction of aggregate bandwidth when traffic follows shares.

    The first node to saturate throttles the whole stream: the sustainable
    rate is min over nodes of bandwidth_i / share_i, reported as a fraction
    of total bandwidth.  Nodes with zero share are excluded.
    """
    shares = list(shares)
    bandwidths = list(bandwidths)
    if len(shares) != len(bandwidths):
        raise SpecError("shares and bandwidths must have equal length")
    if any(b <= 0 for b in bandwidths):
        raise SpecError("bandwidths must be positive")
    if abs(sum(shares) - 1.0) > 1e-9:
        raise SpecError(f"shares must sum to 1, got {sum(shares)}")
    total = sum(bandwidths)
    limits = [b / s for s, b in zip(shares, bandwidths) if s > 0]
    return min(limits) / total


@dataclass
class WindowStats:
    """One report window of simulated time."""

    index: int
    accesses: int
    local_traffic_fraction: float
    cxl_traffic_fraction: float
    mean_access_latency: float
    bandwidth_utilization: float
    allocation_rate_local: float  # pages/s placed on the local node
    promotion_rate: float  # successful promotions/s
    demotion_rate: float  # demotions/s


@dataclass
class SimReport:
    """Counters plus the per-window and aggregate series for one run."""

    counters: dict
    windows: list[WindowStats]
    totals: dict
    throughput_proxy: float

    def to_dict(self) -> dict:
        return {
            "counters": dict(self.counters),
            "windows": [asdict(w) for w in self.windows],
            "totals": dict(self.totals),
            "throughput_proxy": self.throughput_proxy,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def windows_csv(self) -> str:
        cols = [
            "index",
            "accesses",
            "local_traffic_fraction",
            "cxl_traffic_fraction",
            "mean_access_latency",
            "bandwidth_utilization",
            "allocation_rate_local",
            "promotion_rate",
            "demotion_rate",
        ]
        lines = [",".join(cols)]
        for w in self.windows:
            d = asdict(w)
            lines.append(",".join(str(d[c]) for c in cols))
        return "\n".join(lines) + "\n"


def _promotion_total(counters: CounterSet) -> int:
    return counters["pgpromote_success_anon"] + counters["pgpromote_success_file"]


def _demotion_total(counters: CounterSet) -> int:
    return counters["pgdemote_anon"] + counters["pgdemote_file"]


def run(trace, config: SimConfig) -> SimReport:
    """Process every trace event in order and return the report.

    Identical (trace, config, seed) inputs produce a bit-identical report.
    """
    config.validate()
    nodes = build_nodes(config)
    counters = CounterSet()
    engine = PolicyEngine(
        config.policy,
        nodes,
        counters,
        migration_cost=config.migration_cost,
        swap_latency=config.swap_latency,
    )

    window_ns = config.report_window
    window_us = window_ns / 1000.0
    window_s = window_ns / 1e9
    # Per-node accesses a window can absorb before full saturation.
    win_capacity = [n.bandwidth * window_us for n in nodes]
    bw_total = sum(n.bandwidth for n in nodes)
    local_id = engine.local.id

    windows: list[WindowStats] = []
    win_counts = [0] * len(nodes)
    win_lat = 0.0
    win_start_alloc = 0
    win_start_promo = 0
    win_start_demote = 0
    win_end = window_ns

    def latency_fn(node: NodeState) -> float:
        u = win_counts[node.id] / win_capacity[node.id]
        if u > LATENCY_UTILIZATION_CAP:
            u = LATENCY_UTILIZATION_CAP
        return node.base_latency / (1.0 - u)

    def flush_window():
        nonlocal win_counts, win_lat, win_end
        nonlocal win_start_alloc, win_start_promo, win_start_demote
        accesses = sum(win_counts)
        local_acc = win_counts[local_id]
        cxl_acc = accesses - local_acc
        if accesses:
            local_frac = local_acc / accesses
            cxl_frac = cxl_acc / accesses
            mean_lat = win_lat / accesses
            shares = [c / accesses for c in win_counts]
            offered = accesses / window_us
            limits = [
                nodes[i].bandwidth / shares[i] for i in range(len(nodes)) if shares[i] > 0
            ]
            served = min([offered, *limits])
            utilization = min(1.0, served / bw_total) if bw_total > 0 else 0.0
        else:
            local_frac = cxl_frac = mean_lat = utilization = 0.0
        alloc_now = counters["pgalloc_local"]
        promo_now = _promotion_total(counters)
        demote_now = _demotion_total(counters)
        windows.append(
            WindowStats(
                index=len(windows),
                accesses=accesses,
                local_traffic_fraction=local_frac,
                cxl_traffic_fraction=cxl_frac,
                mean_access_latency=mean_lat,
                bandwidth_utilization=utilization,
                allocation_rate_local=(alloc_now - win_start_alloc) / window_s,
                promotion_rate=(promo_now - win_start_promo) / window_s,
                demotion_rate=(demote_now - win_start_demote) / window_s,
            )
        )
        win_counts = [0] * len(nodes)
        win_lat = 0.0
        win_start_alloc = alloc_now
        win_start_promo = promo_now
        win_start_demote = demote_now
        win_end += window_ns

    scan_period = config.policy.scan_period
    next_scan = scan_period
    prev_ts = None
    total_lat = 0.0
    saw_events = False

    for ev in trace:
        ts, op, page, ptype = ev
        if prev_ts is not None and ts < prev_ts:
            raise TraceError(f"timestamp regression: {ts} < {prev_ts}")
        prev_ts = ts
        saw_events = True
        while next_scan <= ts:
            engine.numa_scan(next_scan)
            engine.period_tick(next_scan)
            engine.maybe_reclaim(next_scan)
            next_scan += scan_period
        while ts >= win_end:
            flush_window()
        if op == "A":
            engine.allocate(page, ptype, ts)
        elif op == "F":
            engine.free_page(page)
        else:
            frame = engine.frames.get(page)
            extra = 0.0
            if frame is None:
                if page in engine.swap:
                    frame = engine.swap_in(page, ts)
                    extra = float(config.swap_latency)
                else:
                    raise TraceError(f"access to non-live page {page}")
            nid = frame.node
            lat, _outcome = engine.handle_access(frame, ts, latency_fn)
            lat += extra
            win_counts[nid] += 1
            win_lat += lat
            total_lat += lat
        engine.maybe_reclaim(ts)

    if saw_events:
        flush_window()

    accesses = counters["pgaccess_local"] + counters["pgaccess_cxl"]
    if accesses:
        local_frac = counters["pgaccess_local"] / accesses
        weighted_util = sum(w.bandwidth_utilization * w.accesses for w in windows) / accesses
        mean_lat = total_lat / accesses
    else:
        local_frac = weighted_util = mean_lat = 0.0
    elapsed_s = len(windows) * window_s
    totals = {
        "accesses": accesses,
        "local_traffic_fraction": local_frac,
        "cxl_traffic_fraction": 1.0 - local_frac if accesses else 0.0,
        "mean_access_latency": mean_lat,
        "bandwidth_utilization": weighted_util,
        "allocation_rate_local": counters["pgalloc_local"] / elapsed_s if elapsed_s else 0.0,
        "promotion_rate": _promotion_total(counters) / elapsed_s if elapsed_s else 0.0,
        "demotion_rate": _demotion_total(counters) / elapsed_s if elapsed_s else 0.0,
    }
    throughput = accesses / (total_lat * 1e-9) if total_lat > 0 else 0.0
    return SimReport(
        counters=dict(counters),
        windows=windows,
        totals=totals,
        throughput_proxy=throughput,
    )
