"""Core memory-tier model: pages, nodes, watermarks, LRU lists, counters.

The model mirrors the Linux mm building blocks at page granularity: every
resident page sits on exactly one of four LRU lists (anon/file x
active/inactive) of exactly one node, nodes track free pages against a set
of watermarks, and a fixed vmstat-style counter set records what the
policies do.  One page is one opaque unit; all capacities and quotas are
page counts.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass
from enum import Enum, IntEnum


class SimulationError(Exception):
    """Base class for simulator errors."""


class NoFreePages(SimulationError):
    """Insert attempted on a node with free = 0."""


class OutOfMemory(SimulationError):
    """No node can host a page and reclaim could not make room."""


class TraceError(SimulationError):
    """Malformed or out-of-order trace event."""


class ParseError(SimulationError):
    """Unreadable trace file line."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class SpecError(SimulationError):
    """Inconsistent workload or policy specification."""


class PageType(Enum):
    ANON = "anon"
    FILE = "file"


class LruKind(Enum):
    ACTIVE = "active"
    INACTIVE = "inactive"


class Tier(Enum):
    LOCAL = "local"
    CXL = "cxl"


class WatermarkState(IntEnum):
    """Free-page pressure level; larger value = more severe."""

    OK = 0
    BELOW_DEMOTION = 1
    BELOW_ALLOCATION = 2
    BELOW_LOW = 3
    BELOW_MIN = 4


@dataclass(slots=True)
class PageFrame:
    """One resident (or swapped-out) virtual page and its placement state."""

    page: int
    type: PageType
    node: int | None = None
    lru: LruKind = LruKind.INACTIVE
    demoted_flag: bool = False
    hint_poisoned: bool = False
    last_access: int = 0
    access_count: int = 0


@dataclass(frozen=True, slots=True)
class WatermarkSet:
    """Free-page thresholds, resolved to page counts at node construction.

    min/low/high follow the kernel's ordering (min < low < high <= capacity).
    allocation and demotion are the decoupled pair: new allocations are
    permitted down to `allocation`, background reclaim runs until free
    reaches `demotion`.  Policies that do not decouple leave
    allocation == demotion == low.
    """

    min: int
    low: int
    high: int
    allocation: int
    demotion: int

    def validate(self, capacity: int, decoupled: bool = False) -> None:
        if not (0 < self.min < self.low < self.high <= capacity):
            raise SpecError(
                f"watermarks must satisfy 0 < min < low < high <= capacity, "
                f"got min={self.min} low={self.low} high={self.high} "
                f"capacity={capacity}"
            )
        if decoupled and not self.demotion > self.allocation:
            raise SpecError(
                f"decoupled watermarks require demotion > allocation, "
                f"got demotion={self.demotion} allocation={self.allocation}"
            )


def resolve_watermarks(
    capacity: int,
    min_frac: float = 0.005,
    low_frac: float = 0.01,
    high_frac: float = 0.015,
    allocation_frac: float | None = None,
    demotion_frac: float | None = None,
) -> WatermarkSet:
    """Turn capacity fractions into a strictly ordered WatermarkSet.

    Tiny nodes round every fraction to the same page count, so ordering is
    enforced by bumping each threshold one page above its predecessor.
    When demotion_frac is given (decoupled mode) the demotion watermark is
    additionally kept strictly above the allocation watermark.
    """
    if capacity < 4:
        raise SpecError(f"node capacity must be >= 4 pages, got {capacity}")
    mn = max(1, math.ceil(min_frac * capacity))
    lo = max(mn + 1, math.ceil(low_frac * capacity))
    hi = max(lo + 1, math.ceil(high_frac * capacity))
    if hi > capacity:
        raise SpecError(
            f"capacity {capacity} too small for watermark fractions "
            f"({min_frac}, {low_frac}, {high_frac})"
        )
    alloc = lo if allocation_frac is None else max(1, math.ceil(allocation_frac * capacity))
    if demotion_frac is None:
        dem = alloc
    else:
        dem = max(alloc + 1, math.ceil(demotion_frac * capacity))
    wm = WatermarkSet(min=mn, low=lo, high=hi, allocation=alloc, demotion=dem)
    wm.validate(capacity, decoupled=demotion_frac is not None)
    return wm


# OrderedDicts keep head = most recently activated, tail = reclaim end.
_LIST_KEYS = (
    (PageType.ANON, LruKind.ACTIVE),
    (PageType.ANON, LruKind.INACTIVE),
    (PageType.FILE, LruKind.ACTIVE),
    (PageType.FILE, LruKind.INACTIVE),
)


class NodeState:
    """One memory tier node: capacity, free count, watermarks, LRU lists."""

    __slots__ = (
        "id",
        "tier",
        "capacity",
        "free",
        "watermarks",
        "lru_lists",
        "_anon_active",
        "_anon_inactive",
        "_file_active",
        "_file_inactive",
        "base_latency",
        "bandwidth",
        "distance",
        "pgaccess_key",
        "pgalloc_key",
    )

    def __init__(
        self,
        node_id: int,
        tier: Tier,
        capacity: int,
        watermarks: WatermarkSet,
        base_latency: float = 100.0,
        bandwidth: float = 1000.0,
        distance: int = 10,
    ):
        self.id = node_id
        self.tier = tier
        self.capacity = capacity
        self.free = capacity
        self.watermarks = watermarks
        self.lru_lists: dict[tuple[PageType, LruKind], OrderedDict[int, PageFrame]] = {
            key: OrderedDict() for key in _LIST_KEYS
        }
        # Direct references for the per-access fast path (no tuple hashing).
        self._anon_active = self.lru_lists[(PageType.ANON, LruKind.ACTIVE)]
        self._anon_inactive = self.lru_lists[(PageType.ANON, LruKind.INACTIVE)]
        self._file_active = self.lru_lists[(PageType.FILE, LruKind.ACTIVE)]
        self._file_inactive = self.lru_lists[(PageType.FILE, LruKind.INACTIVE)]
        self.base_latency = base_latency
        self.bandwidth = bandwidth
        self.distance = distance
        # Precomputed counter keys keep the access path free of string work.
        suffix = "local" if tier is Tier.LOCAL else "cxl"
        self.pgaccess_key = f"pgaccess_{suffix}"
        self.pgalloc_key = f"pgalloc_{suffix}"

    # -- LRU operations -------------------------------------------------

    def lru_insert(self, frame: PageFrame, lru: LruKind) -> None:
        """Place a non-resident frame at the head of the chosen list."""
        if self.free == 0:
            raise NoFreePages(f"node {self.id} has no free pages")
        lst = self.lru_lists[(frame.type, lru)]
        frame.node = self.id
        frame.lru = lru
        lst[frame.page] = frame
        lst.move_to_end(frame.page, last=False)
        self.free -= 1

    def remove(self, frame: PageFrame) -> None:
        """Detach a resident frame from its list, releasing one free page."""
        del self.lru_lists[(frame.type, frame.lru)][frame.page]
        frame.node = None
        self.free += 1

    def mark_accessed(self, frame: PageFrame, now: int) -> None:
        """Move the frame to the head of its type's active list.

        Inactive pages are activated immediately (two-touch activation:
        pages enter inactive at allocation, so the first real access
        promotes them); already-active pages rotate to the head.
        """
        if frame.type is PageType.ANON:
            active = self._anon_active
            inactive = self._anon_inactive
        else:
            active = self._file_active
            inactive = self._file_inactive
        if frame.lru is LruKind.INACTIVE:
            del inactive[frame.page]
            frame.lru = LruKind.ACTIVE
            active[frame.page] = frame
        active.move_to_end(frame.page, last=False)
        frame.last_access = now

    def deactivate_one(self, ptype: PageType) -> bool:
        """Age the coldest active page of a type onto its inactive list.

        Approximates the kernel's active/inactive balancing so reclaim
        never starves just because every page was touched once.
        """
        active = self.lru_lists[(ptype, LruKind.ACTIVE)]
        if not active:
            return False
        page, frame = active.popitem(last=True)
        inactive = self.lru_lists[(ptype, LruKind.INACTIVE)]
        frame.lru = LruKind.INACTIVE
        inactive[page] = frame
        inactive.move_to_end(page, last=False)
        return True

    def select_reclaim_candidates(
        self, n: int, include_anon: bool, file_first: bool = True
    ) -> list[PageFrame]:
        """Pick up to n inactive frames from list tails, without removing them.

        File-inactive tails come first, then anon-inactive (reclaim prefers
        dropping file cache).  With file_first=False the two lists are
        drained in alternation instead.  Active pages are never returned.
        """
        out: list[PageFrame] = []
        file_tail = reversed(self.lru_lists[(PageType.FILE, LruKind.INACTIVE)].values())
        anon_tail = reversed(self.lru_lists[(PageType.ANON, LruKind.INACTIVE)].values())
        if not include_anon:
            anon_tail = iter(())
        if file_first:
            for frame in file_tail:
                if len(out) >= n:
                    return out
                out.append(frame)
            for frame in anon_tail:
                if len(out) >= n:
                    return out
                out.append(frame)
        else:
            sources = [file_tail, anon_tail]
            while sources and len(out) < n:
                for src in list(sources):
                    if len(out) >= n:
                        break
                    nxt = next(src, None)
                    if nxt is None:
                        sources.remove(src)
                    else:
                        out.append(nxt)
        return out

    # -- Watermark tracking ---------------------------------------------

    def watermark_state(self) -> WatermarkState:
        """Most severe watermark the current free count has crossed."""
        free = self.free
        wm = self.watermarks
        if free < wm.min:
            return WatermarkState.BELOW_MIN
        if free < wm.low:
            return WatermarkState.BELOW_LOW
        if free < wm.allocation:
            return WatermarkState.BELOW_ALLOCATION
        if free < wm.demotion:
            return WatermarkState.BELOW_DEMOTION
        return WatermarkState.OK

    # -- Introspection ---------------------------------------------------

    def list_len(self, ptype: PageType, lru: LruKind) -> int:
        return len(self.lru_lists[(ptype, lru)])

    def resident(self) -> int:
        return sum(len(lst) for lst in self.lru_lists.values())

    def inactive_total(self) -> int:
        return self.list_len(PageType.FILE, LruKind.INACTIVE) + self.list_len(
            PageType.ANON, LruKind.INACTIVE
        )

    def check_conservation(self) -> None:
        if self.free != self.capacity - self.resident():
            raise SimulationError(
                f"node {self.id}: free={self.free} but capacity-resident="
                f"{self.capacity - self.resident()}"
            )


COUNTER_KEYS = (
    "pgdemote_anon",
    "pgdemote_file",
    "pgpromote_sampled_anon",
    "pgpromote_sampled_file",
    "pgpromote_candidate_anon",
    "pgpromote_candidate_file",
    "pgpromote_success_anon",
    "pgpromote_success_file",
    "pgpromote_candidate_demoted",
    "pgpromote_fail_low_memory",
    "pgpromote_fail_page_busy",
    "numa_hint_faults",
    "pgswapout",
    "pgswapin",
    "pgalloc_local",
    "pgalloc_cxl",
    "pgaccess_local",
    "pgaccess_cxl",
)

PGDEMOTE_KEY = {PageType.ANON: "pgdemote_anon", PageType.FILE: "pgdemote_file"}
PGPROMOTE_SAMPLED_KEY = {
    PageType.ANON: "pgpromote_sampled_anon",
    PageType.FILE: "pgpromote_sampled_file",
}
PGPROMOTE_CANDIDATE_KEY = {
    PageType.ANON: "pgpromote_candidate_anon",
    PageType.FILE: "pgpromote_candidate_file",
}
PGPROMOTE_SUCCESS_KEY = {
    PageType.ANON: "pgpromote_success_anon",
    PageType.FILE: "pgpromote_success_file",
}


class CounterSet(dict):
    """Fixed-key vmstat-style counter map.

    All keys exist from construction; incrementing an unknown counter fails
    on its read (`counters[k] += 1` raises KeyError).  No validating
    __setitem__: increments are the hottest write in the simulator.
    """

    def __init__(self):
        super().__init__((k, 0) for k in COUNTER_KEYS)

    def check_chain(self) -> None:
        """Promotion funnel sanity: success <= candidate <= sampled per type."""
        for t in PageType:
            s = self[PGPROMOTE_SUCCESS_KEY[t]]
            c = self[PGPROMOTE_CANDIDATE_KEY[t]]
            m = self[PGPROMOTE_SAMPLED_KEY[t]]
            if not (s <= c <= m):
                raise SimulationError(
                    f"promotion chain violated for {t.value}: "
                    f"success={s} candidate={c} sampled={m}"
                )
