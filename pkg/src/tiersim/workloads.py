"""Synthetic workload generators and the on-disk trace format.

Traces are streams of (timestamp, op, page, type) events: A allocates a
page (with its type), L/S are loads/stores, F frees.  Generators are pure
functions of (spec, seed) and emit timestamp-ordered events; shapes follow
the access patterns of large memory-bound services (steady skewed access,
file-heavy warmup with growing anon sets, cache lookups over tmpfs-style
files, one-touch cold streams, allocation bursts, flat bandwidth drive).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .core import PageType, ParseError, SpecError, TraceError


class TraceEvent(NamedTuple):
    ts: int
    op: str  # 'A' | 'L' | 'S' | 'F'
    page: int
    ptype: PageType | None = None


class WorkloadKind(Enum):
    ZIPF_STEADY = "zipf"
    WEB_LIKE = "web"
    CACHE_LIKE = "cache"
    WAREHOUSE_LIKE = "warehouse"
    PING_PONG = "pingpong"
    BURSTY_ALLOC = "bursty"
    UNIFORM_BANDWIDTH = "uniform"


# Per-kind defaults, applied when the spec leaves the field at None.
_KIND_ANON_FRACTION = {
    WorkloadKind.ZIPF_STEADY: 0.7,
    WorkloadKind.WEB_LIKE: 0.55,
    WorkloadKind.CACHE_LIKE: 0.25,
    WorkloadKind.WAREHOUSE_LIKE: 0.85,
    WorkloadKind.PING_PONG: 1.0,
    WorkloadKind.BURSTY_ALLOC: 1.0,
    WorkloadKind.UNIFORM_BANDWIDTH: 1.0,
}
_KIND_HOT_FRACTION = {
    WorkloadKind.ZIPF_STEADY: 0.2,
    WorkloadKind.WEB_LIKE: 0.25,
    WorkloadKind.CACHE_LIKE: 0.35,
    WorkloadKind.WAREHOUSE_LIKE: 0.33,
    WorkloadKind.PING_PONG: 0.2,
    WorkloadKind.BURSTY_ALLOC: 0.2,
    WorkloadKind.UNIFORM_BANDWIDTH: 1.0,
}

HOT_SET_ROTATION_NS = 120_000_000_000  # hot set partially re-drawn every 2 min
_KIND_ROTATION = {
    WorkloadKind.ZIPF_STEADY: HOT_SET_ROTATION_NS,
    WorkloadKind.WEB_LIKE: HOT_SET_ROTATION_NS,
    WorkloadKind.CACHE_LIKE: HOT_SET_ROTATION_NS,
    WorkloadKind.WAREHOUSE_LIKE: HOT_SET_ROTATION_NS,
    WorkloadKind.PING_PONG: 0,
    WorkloadKind.BURSTY_ALLOC: 500_000_000,  # working set drifts under bursts
    WorkloadKind.UNIFORM_BANDWIDTH: 0,
}
_ROTATION_FRACTION = 0.3


@dataclass
class WorkloadSpec:
    """Parameters for one synthetic trace."""

    kind: WorkloadKind
    total_pages: int
    anon_fraction: float | None = None
    hot_fraction: float | None = None
    zipf_s: float = 1.1
    duration: int = 2_000_000_000  # simulated ns
    ops_rate: float = 0.5  # accesses per simulated microsecond
    churn_rate: float = 0.0  # short-lived alloc(+free) pairs per second
    one_touch_fraction: float = 0.8  # PingPong: share of pages accessed once
    hot_rotation_ns: int | None = None  # 0 disables hot-set drift
    seed: int = 0

    def resolved_anon_fraction(self) -> float:
        if self.anon_fraction is None:
            return _KIND_ANON_FRACTION[self.kind]
        return self.anon_fraction

    def resolved_hot_fraction(self) -> float:
        if self.hot_fraction is None:
            return _KIND_HOT_FRACTION[self.kind]
        return self.hot_fraction

    def resolved_rotation(self) -> int:
        if self.hot_rotation_ns is None:
            return _KIND_ROTATION[self.kind]
        return self.hot_rotation_ns

    def validate(self) -> None:
        if self.total_pages < 1:
            raise SpecError("total_pages must be >= 1")
        af = self.resolved_anon_fraction()
        if not 0.0 <= af <= 1.0:
            raise SpecError(f"anon_fraction must be in [0, 1], got {af}")
        hf = self.resolved_hot_fraction()
        if not 0.0 < hf <= 1.0:
            raise SpecError(f"hot_fraction must be in (0, 1], got {hf}")
        if not 0.0 <= self.one_touch_fraction <= 1.0:
            raise SpecError("one_touch_fraction must be in [0, 1]")
        if self.duration <= 0 or self.ops_rate <= 0:
            raise SpecError("duration and ops_rate must be positive")
        if self.churn_rate < 0:
            raise SpecError("churn_rate must be >= 0")

    def peak_live_estimate(self) -> int:
        """Upper estimate of concurrently live pages (for baseline sizing)."""
        extra = 0
        if self.kind is WorkloadKind.BURSTY_ALLOC:
            extra += 2 * max(1, self.total_pages // 40)
        if self.churn_rate > 0:
            extra += int(self.churn_rate * (_churn_lifetime(self.kind) / 1e9)) + 2
        return self.total_pages + extra


_CHURN_LIFETIME_NS = 300_000_000  # churn pages live ~0.3 s
_BURST_PERIOD_NS = 40_000_000
_BURST_CHURN_LIFETIME_NS = 50_000_000  # request-style churn under bursty load


def _churn_lifetime(kind: WorkloadKind) -> int:
    return _BURST_CHURN_LIFETIME_NS if kind is WorkloadKind.BURSTY_ALLOC else _CHURN_LIFETIME_NS


class _StreamBuilder:
    """Accumulates event arrays and merges them into one ordered stream."""

    def __init__(self):
        self.parts: list[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = []

    def add(self, ts, op, page, ptype=None):
        ts = np.asarray(ts, dtype=np.int64)
        n = len(ts)
        op = np.full(n, op, dtype=np.int8) if np.isscalar(op) else np.asarray(op, dtype=np.int8)
        page = np.asarray(page, dtype=np.int64)
        if ptype is None:
            ptype = np.full(n, -1, dtype=np.int8)
        elif np.isscalar(ptype):
            ptype = np.full(n, ptype, dtype=np.int8)
        else:
            ptype = np.asarray(ptype, dtype=np.int8)
        self.parts.append((ts, op, page, ptype))

    def emit(self) -> Iterator[TraceEvent]:
        if not self.parts:
            return iter(())
        ts = np.concatenate([p[0] for p in self.parts])
        op = np.concatenate([p[1] for p in self.parts])
        page = np.concatenate([p[2] for p in self.parts])
        ptype = np.concatenate([p[3] for p in self.parts])
        order = np.argsort(ts, kind="stable")
        return _yield_events(ts[order], op[order], page[order], ptype[order])


_OP_CODES = {"A": 0, "L": 1, "S": 2, "F": 3}
_OP_NAMES = ("A", "L", "S", "F")
_TYPE_BY_CODE = {-1: None, 0: PageType.ANON, 1: PageType.FILE}


def _yield_events(ts, op, page, ptype) -> Iterator[TraceEvent]:
    names = _OP_NAMES
    types = _TYPE_BY_CODE
    for i in range(len(ts)):
        yield TraceEvent(int(ts[i]), names[op[i]], int(page[i]), types[int(ptype[i])])


def _grid_times(rng, n: int, t0: int, t1: int) -> np.ndarray:
    """n non-decreasing timestamps over [t0, t1) with deterministic jitter."""
    if n <= 0:
        return np.empty(0, dtype=np.int64)
    dt = max(1, (t1 - t0) // n)
    base = t0 + np.arange(n, dtype=np.int64) * dt
    if dt >= 4:
        base = base + rng.integers(0, dt // 2, size=n, dtype=np.int64)
    return base


def _zipf_weights(count: int, s: float) -> np.ndarray:
    w = np.arange(1, count + 1, dtype=np.float64) ** -s
    return w / w.sum()


def generate(spec: WorkloadSpec) -> Iterator[TraceEvent]:
    """Build the trace for a workload spec; deterministic per seed."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    builder = _StreamBuilder()
    kind = spec.kind
    if kind is WorkloadKind.ZIPF_STEADY:
        _gen_zipf_steady(spec, rng, builder)
    elif kind is WorkloadKind.WEB_LIKE:
        _gen_web_like(spec, rng, builder)
    elif kind is WorkloadKind.CACHE_LIKE:
        _gen_cache_like(spec, rng, builder)
    elif kind is WorkloadKind.WAREHOUSE_LIKE:
        _gen_warehouse_like(spec, rng, builder)
    elif kind is WorkloadKind.PING_PONG:
        _gen_ping_pong(spec, rng, builder)
    elif kind is WorkloadKind.BURSTY_ALLOC:
        _gen_bursty_alloc(spec, rng, builder)
    elif kind is WorkloadKind.UNIFORM_BANDWIDTH:
        _gen_uniform(spec, rng, builder)
    else:  # pragma: no cover
        raise SpecError(f"unknown workload kind {kind}")
    return builder.emit()


def _type_codes(rng, total: int, anon_count: int, shuffled: bool = True) -> np.ndarray:
    codes = np.zeros(total, dtype=np.int8)
    codes[anon_count:] = 1  # pages [anon_count:] are FILE
    if shuffled:
        rng.shuffle(codes)
    return codes


def _access_ops(rng, n: int, store_fraction: float = 0.1) -> np.ndarray:
    ops = np.full(n, _OP_CODES["L"], dtype=np.int8)
    if store_fraction > 0 and n:
        ops[rng.random(n) < store_fraction] = _OP_CODES["S"]
    return ops


def _n_accesses(spec: WorkloadSpec, t0: int, t1: int) -> int:
    return max(0, int((t1 - t0) * spec.ops_rate / 1000.0))


def _rotating_zipf_samples(spec, rng, ts: np.ndarray, pool: np.ndarray) -> np.ndarray:
    """Zipf-distributed page samples with periodic partial hot-set re-draws."""
    n = len(ts)
    count = len(pool)
    perm = pool[rng.permutation(count)]  # rank -> page
    weights = _zipf_weights(count, spec.zipf_s)
    hot_n = max(1, round(spec.resolved_hot_fraction() * count))
    rotation = spec.resolved_rotation()
    pages = np.empty(n, dtype=np.int64)
    start = 0
    while start < n:
        if rotation > 0:
            boundary = ((int(ts[start]) // rotation) + 1) * rotation
            end = max(int(np.searchsorted(ts, boundary, side="left")), start + 1)
        else:
            end = n
        ranks = rng.choice(count, size=end - start, p=weights)
        pages[start:end] = perm[ranks]
        if end < n and hot_n < count:
            k = min(max(1, int(_ROTATION_FRACTION * hot_n)), count - hot_n)
            rotate = rng.choice(hot_n, size=k, replace=False)
            targets = hot_n + rng.choice(count - hot_n, size=k, replace=False)
            perm[rotate], perm[targets] = perm[targets].copy(), perm[rotate].copy()
        start = end
    return pages


def _gen_zipf_steady(spec, rng, builder):
    p = spec.total_pages
    anon_count = round(spec.resolved_anon_fraction() * p)
    codes = _type_codes(rng, p, anon_count)
    alloc_end = max(1, spec.duration // 20)
    builder.add(_grid_times(rng, p, 0, alloc_end), _OP_CODES["A"], np.arange(p), codes)
    n = _n_accesses(spec, alloc_end, spec.duration)
    ts = _grid_times(rng, n, alloc_end, spec.duration)
    pages = _rotating_zipf_samples(spec, rng, ts, np.arange(p))
    builder.add(ts, _access_ops(rng, n), pages)


def _prefix_zipf_samples(rng, ts, alloc_ts, alloc_pages, weights, n_chunks=40):
    """Zipf samples restricted to the pages already allocated at each time.

    Page hotness is independent of allocation order: the rank of the page
    at allocation position i is given by its position in `alloc_pages`
    paired with `weights[rank_of_position]`.
    """
    n = len(ts)
    pages = np.empty(n, dtype=np.int64)
    bounds = np.linspace(0, n, n_chunks + 1, dtype=np.int64)
    for c in range(n_chunks):
        lo, hi = int(bounds[c]), int(bounds[c + 1])
        if hi <= lo:
            continue
        allocated = int(np.searchsorted(alloc_ts, ts[lo], side="right"))
        allocated = max(1, allocated)
        w = weights[:allocated] if allocated <= len(weights) else weights
        w = w / w.sum()
        idx = rng.choice(len(w), size=hi - lo, p=w)
        pages[lo:hi] = alloc_pages[idx]
    return pages


def _gen_web_like(spec, rng, builder):
    p = spec.total_pages
    anon_count = round(spec.resolved_anon_fraction() * p)
    file_count = p - anon_count
    file_pages = np.arange(file_count)
    anon_pages = np.arange(file_count, p)

    warmup_end = max(1, int(0.15 * spec.duration))
    # Warmup: fill the file cache; only the hot head gets touched, the cold
    # tail stays on the inactive lists where reclaim will find it.
    file_rank_perm = rng.permutation(file_count)  # rank -> file page index
    file_alloc_ts = _grid_times(rng, file_count, 0, int(warmup_end * 0.9))
    builder.add(file_alloc_ts, _OP_CODES["A"], file_pages, 1)
    hot_files = file_rank_perm[: max(1, file_count // 5)]
    order = np.argsort(hot_files)
    touch_ts = file_alloc_ts[hot_files[order]] + 10_000
    builder.add(touch_ts, _OP_CODES["L"], file_pages[hot_files[order]])

    # Main phase: anon working set grows while accesses skew hot.
    anon_alloc_end = max(warmup_end + 1, int(0.6 * spec.duration))
    anon_order = rng.permutation(anon_count)  # allocation order of anon ranks
    anon_alloc_ts = _grid_times(rng, anon_count, warmup_end, anon_alloc_end)
    builder.add(anon_alloc_ts, _OP_CODES["A"], anon_pages[anon_order], 0)

    n = _n_accesses(spec, warmup_end, spec.duration)
    ts = _grid_times(rng, n, warmup_end + 1, spec.duration)
    is_anon = rng.random(n) < 0.85
    # The first anon access must not precede the first anon allocation.
    anon_ts = np.maximum(ts[is_anon], int(anon_alloc_ts[0]) + 1 if len(anon_alloc_ts) else 0)
    rank_weights = _zipf_weights(anon_count, spec.zipf_s)
    w_by_order = rank_weights[anon_order]
    anon_sel = _prefix_zipf_samples(
        rng, anon_ts, anon_alloc_ts, anon_pages[anon_order], _order_weights(w_by_order)
    )
    builder.add(anon_ts, _access_ops(rng, len(anon_ts)), anon_sel)

    file_ts = ts[~is_anon]
    fw = _zipf_weights(file_count, spec.zipf_s)
    franks = rng.choice(file_count, size=len(file_ts), p=fw)
    builder.add(file_ts, _access_ops(rng, len(file_ts)), file_pages[file_rank_perm[franks]])


def _order_weights(w_by_order: np.ndarray) -> np.ndarray:
    # Weights indexed by allocation position (unnormalized prefix slices are
    # renormalized per chunk by _prefix_zipf_samples).
    return w_by_order


def _gen_cache_like(spec, rng, builder):
    p = spec.total_pages
    anon_count = round(spec.resolved_anon_fraction() * p)
    file_count = p - anon_count
    anon_pages = np.arange(anon_count)
    file_pages = np.arange(anon_count, p)
    alloc_end = max(1, spec.duration // 20)
    ts_a = _grid_times(rng, p, 0, alloc_end)
    builder.add(ts_a, _OP_CODES["A"], np.arange(p), np.concatenate(
        [np.zeros(anon_count, dtype=np.int8), np.ones(file_count, dtype=np.int8)]
    ))

    hf = spec.resolved_hot_fraction()
    anon_hot = max(1, round(hf * anon_count)) if anon_count else 0
    file_hot = max(1, round(0.6 * hf * file_count)) if file_count else 0
    anon_perm = rng.permutation(anon_count) if anon_count else np.empty(0, dtype=np.int64)
    file_perm = rng.permutation(file_count) if file_count else np.empty(0, dtype=np.int64)

    n = _n_accesses(spec, alloc_end, spec.duration)
    ts = _grid_times(rng, n, alloc_end, spec.duration)
    pick_anon = rng.random(n) < (0.5 if file_count and anon_count else float(anon_count > 0))
    pages = np.empty(n, dtype=np.int64)
    for is_anon, perm, base, hot_n, count in (
        (True, anon_perm, anon_pages, anon_hot, anon_count),
        (False, file_perm, file_pages, file_hot, file_count),
    ):
        mask = pick_anon if is_anon else ~pick_anon
        m = int(mask.sum())
        if m == 0 or count == 0:
            continue
        hot_mask = rng.random(m) < 0.85
        sel = np.empty(m, dtype=np.int64)
        hw = _zipf_weights(hot_n, spec.zipf_s)
        sel[hot_mask] = perm[rng.choice(hot_n, size=int(hot_mask.sum()), p=hw)]
        cold = m - int(hot_mask.sum())
        if count > hot_n:
            sel[~hot_mask] = perm[rng.integers(hot_n, count, size=cold)]
        else:
            sel[~hot_mask] = perm[rng.integers(0, count, size=cold)]
        pages[mask] = base[sel]
    builder.add(ts, _access_ops(rng, n), pages)
    _add_churn(spec, rng, builder, next_id=p, ptype=0)


def _gen_warehouse_like(spec, rng, builder):
    p = spec.total_pages
    anon_count = round(spec.resolved_anon_fraction() * p)
    file_count = p - anon_count
    alloc_end = max(1, spec.duration // 20)
    builder.add(_grid_times(rng, p, 0, alloc_end), _OP_CODES["A"], np.arange(p), np.concatenate(
        [np.zeros(anon_count, dtype=np.int8), np.ones(file_count, dtype=np.int8)]
    ))
    n = _n_accesses(spec, alloc_end, spec.duration)
    ts = _grid_times(rng, n, alloc_end, spec.duration)
    if file_count and anon_count:
        is_anon = rng.random(n) < 0.9
    else:
        is_anon = np.full(n, bool(anon_count))
    pages = np.empty(n, dtype=np.int64)
    ops = np.empty(n, dtype=np.int8)
    anon_n = int(is_anon.sum())
    if anon_count and anon_n:
        hot_n = max(1, round(spec.resolved_hot_fraction() * anon_count))
        perm = rng.permutation(anon_count)
        hw = _zipf_weights(hot_n, spec.zipf_s)
        pages[is_anon] = perm[rng.choice(hot_n, size=anon_n, p=hw)]
        ops[is_anon] = _access_ops(rng, anon_n)
    if file_count and n - anon_n:
        # Cold sequential writes of intermediate data.
        m = n - anon_n
        pages[~is_anon] = anon_count + (np.arange(m) % file_count)
        ops[~is_anon] = _OP_CODES["S"]
    builder.add(ts, ops, pages)
    _add_churn(spec, rng, builder, next_id=p, ptype=0)


def _gen_ping_pong(spec, rng, builder):
    p = spec.total_pages
    anon_count = round(spec.resolved_anon_fraction() * p)
    codes = _type_codes(rng, p, anon_count)
    alloc_end = max(1, spec.duration // 25)
    builder.add(_grid_times(rng, p, 0, alloc_end), _OP_CODES["A"], np.arange(p), codes)

    perm = rng.permutation(p)
    one_touch_n = round(spec.one_touch_fraction * p)
    one_touch = perm[:one_touch_n]
    hot = perm[one_touch_n:]

    if one_touch_n:
        lo = alloc_end + max(1, int(0.3 * (spec.duration - alloc_end)))
        ot_ts = np.sort(rng.integers(lo, spec.duration, size=one_touch_n, dtype=np.int64))
        builder.add(ot_ts, _OP_CODES["L"], one_touch)
    if len(hot):
        n = max(0, _n_accesses(spec, alloc_end, spec.duration) - one_touch_n)
        ts = _grid_times(rng, n, alloc_end, spec.duration)
        hw = _zipf_weights(len(hot), spec.zipf_s)
        builder.add(ts, _access_ops(rng, n), hot[rng.choice(len(hot), size=n, p=hw)])


def _gen_bursty_alloc(spec, rng, builder):
    p = spec.total_pages
    alloc_end = max(1, spec.duration // 10)
    builder.add(_grid_times(rng, p, 0, alloc_end), _OP_CODES["A"], np.arange(p), 0)

    # Steady skewed accesses over a drifting hot set keep promotion demand up.
    n = _n_accesses(spec, alloc_end, spec.duration)
    ts = _grid_times(rng, n, alloc_end, spec.duration)
    builder.add(ts, _access_ops(rng, n), _rotating_zipf_samples(spec, rng, ts, np.arange(p)))

    # Allocation bursts: a tight clump of short-lived pages per period.
    # Burst and churn pages are pure allocation pressure: never re-touched,
    # they sit on the inactive lists until reclaim moves them along, and die
    # mid-gap half a period later.
    burst_size = max(1, p // 40)
    next_id = p + int(spec.churn_rate * spec.duration / 1e9) + 16
    t = alloc_end + 4 * _BURST_PERIOD_NS
    while t + _BURST_PERIOD_NS < spec.duration:
        ids = np.arange(next_id, next_id + burst_size)
        a_ts = t + np.arange(burst_size, dtype=np.int64) * max(1, 100_000 // burst_size)
        lifetimes = rng.integers(
            int(0.45 * _BURST_PERIOD_NS), int(0.55 * _BURST_PERIOD_NS), size=burst_size, dtype=np.int64
        )
        f_ts = np.minimum(a_ts + lifetimes, spec.duration - 1)
        builder.add(a_ts, _OP_CODES["A"], ids, 0)
        builder.add(f_ts, _OP_CODES["F"], ids)
        next_id += burst_size
        t += _BURST_PERIOD_NS
    _add_churn(spec, rng, builder, next_id=p, ptype=0, touch=False)


def _gen_uniform(spec, rng, builder):
    p = spec.total_pages
    alloc_end = max(1, spec.duration // 50)
    builder.add(_grid_times(rng, p, 0, alloc_end), _OP_CODES["A"], np.arange(p), 0)
    n = _n_accesses(spec, alloc_end, spec.duration)
    ts = _grid_times(rng, n, alloc_end, spec.duration)
    builder.add(ts, _OP_CODES["L"], rng.integers(0, p, size=n, dtype=np.int64))


def _add_churn(spec, rng, builder, next_id: int, ptype: int, touch: bool = True):
    """Short-lived fresh allocations: alloc, one optional touch, free soon."""
    if spec.churn_rate <= 0:
        return
    lifetime = _churn_lifetime(spec.kind)
    t0 = int(0.1 * spec.duration)
    t1 = int(0.95 * spec.duration) - lifetime
    if t1 <= t0:
        return
    count = int(spec.churn_rate * (t1 - t0) / 1e9)
    if count <= 0:
        return
    ids = np.arange(next_id, next_id + count)
    a_ts = _grid_times(rng, count, t0, t1)
    builder.add(a_ts, _OP_CODES["A"], ids, ptype)
    if touch:
        builder.add(a_ts + 50_000, _OP_CODES["L"], ids)
    builder.add(a_ts + lifetime, _OP_CODES["F"], ids)


# -- Trace file format -------------------------------------------------

_TYPE_TOKEN = {PageType.ANON: "ANON", PageType.FILE: "FILE"}
_TOKEN_TYPE = {"ANON": PageType.ANON, "FILE": PageType.FILE}


def write_trace(events: Iterable[TraceEvent], path) -> int:
    """Write events one per line; returns the number written."""
    n = 0
    with open(path, "w") as fh:
        for ev in events:
            if ev.op == "A":
                fh.write(f"{ev.ts} A {ev.page} {_TYPE_TOKEN[ev.ptype]}\n")
            else:
                fh.write(f"{ev.ts} {ev.op} {ev.page}\n")
            n += 1
    return n


def read_trace(path) -> Iterator[TraceEvent]:
    """Parse a trace file, yielding events in order.

    Raises ParseError (with the line number) on malformed lines and
    TraceError if timestamps regress.
    """
    prev_ts = None
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) < 3:
                raise ParseError(line_no, f"expected at least 3 fields, got {len(fields)}")
            try:
                ts = int(fields[0])
                page = int(fields[2])
            except ValueError as exc:
                raise ParseError(line_no, str(exc)) from None
            op = fields[1]
            if op == "A":
                if len(fields) != 4 or fields[3] not in _TOKEN_TYPE:
                    raise ParseError(line_no, "alloc line must be '<ts> A <page> <ANON|FILE>'")
                ptype = _TOKEN_TYPE[fields[3]]
            elif op in ("L", "S", "F"):
                if len(fields) != 3:
                    raise ParseError(line_no, f"op {op} takes exactly one page field")
                ptype = None
            else:
                raise ParseError(line_no, f"unknown op code {op!r}")
            if prev_ts is not None and ts < prev_ts:
                raise TraceError(f"line {line_no}: timestamp {ts} < previous {prev_ts}")
            prev_ts = ts
            yield TraceEvent(ts, op, page, ptype)


def validate_trace(events: Iterable[TraceEvent]) -> dict:
    """Check ordering and alloc/free liveness; returns summary stats."""
    live: dict[int, PageType] = {}
    prev_ts = None
    peak = 0
    counts = {"A": 0, "L": 0, "S": 0, "F": 0}
    type_counts = {PageType.ANON: 0, PageType.FILE: 0}
    for i, ev in enumerate(events):
        if prev_ts is not None and ev.ts < prev_ts:
            raise TraceError(f"event {i}: timestamp regression {ev.ts} < {prev_ts}")
        prev_ts = ev.ts
        counts[ev.op] += 1
        if ev.op == "A":
            if ev.page in live:
                raise TraceError(f"event {i}: page {ev.page} allocated while live")
            live[ev.page] = ev.ptype
            type_counts[ev.ptype] += 1
            peak = max(peak, len(live))
        elif ev.op == "F":
            if ev.page not in live:
                raise TraceError(f"event {i}: free of non-live page {ev.page}")
            del live[ev.page]
        else:
            if ev.page not in live:
                raise TraceError(f"event {i}: access to non-live page {ev.page}")
    return {"counts": counts, "type_counts": type_counts, "peak_live": peak, "live": len(live)}
