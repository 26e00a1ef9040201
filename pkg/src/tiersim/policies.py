"""Page placement policies: allocation, reclamation, demotion, promotion.

Four policy families operate over the same node/LRU state:

* default_linux  -- local-first allocation, swap-based reclaim, no migration.
* numa_balancing -- default reclaim plus hint-fault promotion that is only
  attempted when the local node sits above its high watermark.
* tpp            -- migration-based demotion to the CXL node, optionally
  decoupled allocation/demotion watermarks, CXL-only hint-fault sampling,
  and an active-LRU promotion filter.
* autotiering_like -- periodic access-count based demotion plus promotion
  limited by a small reserved buffer that refills only through demotion.
  A deliberately simplified stand-in for timer-based tiering daemons.

Background reclaim is rate-limited through a per-node daemon clock: each
reclaimed page occupies the daemon for its migration or swap cost, so
swap-based reclaim is an order of magnitude slower than demotion, which is
what starves allocation under pressure for the non-migrating policies.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .core import (
    CounterSet,
    LruKind,
    NodeState,
    OutOfMemory,
    PGDEMOTE_KEY,
    PGPROMOTE_CANDIDATE_KEY,
    PGPROMOTE_SAMPLED_KEY,
    PGPROMOTE_SUCCESS_KEY,
    PageFrame,
    PageType,
    SpecError,
    Tier,
    TraceError,
    WatermarkState,
)

RECLAIM_BATCH = 32  # pages per background reclaim pass
AUTOTIER_SWEEP_BATCH = 256  # cold pages considered per periodic sweep


class PolicyKind(Enum):
    DEFAULT_LINUX = "default_linux"
    NUMA_BALANCING = "numa_balancing"
    TPP = "tpp"
    AUTOTIERING_LIKE = "autotiering_like"


class PromotionOutcome(Enum):
    PROMOTED = "promoted"
    DEFERRED_MARKED_ACCESSED = "deferred_marked_accessed"
    FAILED_LOW_MEMORY = "failed_low_memory"
    FAILED_PAGE_BUSY = "failed_page_busy"
    NOT_CANDIDATE = "not_candidate"


@dataclass
class PolicySpec:
    """Policy selector plus every tunable the engines consult."""

    kind: PolicyKind
    interleave: tuple[int, int] | None = None  # (n local, k cxl) per round
    type_aware_alloc: bool = False
    active_lru_filter: bool = True  # tpp only
    decouple_watermarks: bool = True  # tpp only
    scan_quota: int = 65536  # pages poisoned per scan pass (256 MB of 4 KB pages)
    scan_period: int = 1_000_000_000  # simulated ns between scan passes
    demote_scale_factor: float = 0.02
    reserved_promo_buffer: float = 0.01  # autotiering_like only
    demote_file_first: bool = True
    demote_to_active: bool = False
    cold_access_threshold: int = 1  # autotiering_like: demote below this count
    reclaim_wake_latency: int = 0  # ns between trigger crossing and first batch

    def validate(self) -> None:
        if self.interleave is not None:
            n, k = self.interleave
            if n < 1 or k < 0:
                raise SpecError(f"interleave requires n >= 1, k >= 0, got {self.interleave}")
        if self.scan_quota < 1:
            raise SpecError("scan_quota must be >= 1")
        if self.scan_period < 1:
            raise SpecError("scan_period must be >= 1")
        if not 0.0 < self.demote_scale_factor < 1.0:
            raise SpecError("demote_scale_factor must be in (0, 1)")
        if not 0.0 < self.reserved_promo_buffer <= 0.5:
            raise SpecError("reserved_promo_buffer must be in (0, 0.5]")

    def decoupled(self) -> bool:
        return self.kind is PolicyKind.TPP and self.decouple_watermarks


class PolicyEngine:
    """Applies one policy to a set of nodes, tracking frames and counters."""

    def __init__(
        self,
        policy: PolicySpec,
        nodes: list[NodeState],
        counters: CounterSet | None = None,
        migration_cost: int = 1_000,
        swap_latency: int = 10_000,
    ):
        policy.validate()
        locals_ = [n for n in nodes if n.tier is Tier.LOCAL]
        if len(locals_) != 1:
            raise SpecError(f"exactly one local node required, got {len(locals_)}")
        self.policy = policy
        self.node_list = list(nodes)
        self.nodes = {n.id: n for n in nodes}
        self.local = locals_[0]
        self.cxl_nodes = sorted(
            (n for n in nodes if n.tier is Tier.CXL), key=lambda n: (n.distance, n.id)
        )
        self.counters = counters if counters is not None else CounterSet()
        self.migration_cost = migration_cost
        self.swap_latency = swap_latency
        self.frames: dict[int, PageFrame] = {}
        self.swap: dict[int, PageType] = {}
        self._il_pos = 0
        self._scan_cursor = {n.id: 0 for n in nodes}
        self._reclaim_active = {n.id: False for n in nodes}
        self._busy_until = {n.id: 0 for n in nodes}
        self._plans = {n.id: self._reclaim_plan(n) for n in nodes}
        if policy.kind is PolicyKind.AUTOTIERING_LIKE:
            self.promo_buffer_cap = max(1, round(policy.reserved_promo_buffer * self.local.capacity))
        else:
            self.promo_buffer_cap = 0
        self.promo_buffer = self.promo_buffer_cap
        self.audit = None  # optional callable(event, node, frame) for invariant checks

    # -- Allocation -------------------------------------------------------

    def _local_alloc_permitted(self) -> bool:
        if self.policy.decoupled():
            return self.local.free >= self.local.watermarks.allocation
        return self.local.watermark_state() is WatermarkState.OK

    def place_page(self, ptype: PageType, now: int = 0) -> NodeState:
        """Choose the node that hosts a new page."""
        pol = self.policy
        if pol.interleave is not None:
            n, k = pol.interleave
            pos = self._il_pos
            self._il_pos = (pos + 1) % (n + k)
            if pos < n or not self.cxl_nodes:
                target = self.local
            else:
                target = self.cxl_nodes[(pos - n) % len(self.cxl_nodes)]
            if target.free > 0:
                return target
            for cand in self.node_list:
                if cand is not target and cand.free > 0:
                    return cand
            return self._place_after_direct_reclaim(now)
        if pol.type_aware_alloc and ptype is PageType.FILE:
            for cand in self.cxl_nodes:
                if cand.free > cand.watermarks.min:
                    return cand
        if self._local_alloc_permitted():
            order = [self.local, *self.cxl_nodes]
        else:
            order = [*self.cxl_nodes, self.local]
        for cand in order:
            if cand.free > 0:
                return cand
        return self._place_after_direct_reclaim(now)

    def _place_after_direct_reclaim(self, now: int) -> NodeState:
        # Every node is full: run one synchronous reclaim pass, then retry.
        for node in self.node_list:
            _, _, mode = self._plans[node.id]
            if mode == "demote":
                self._demote_batch(node, RECLAIM_BATCH, now)
            else:
                self._swap_batch(node, RECLAIM_BATCH)
        for cand in [self.local, *self.cxl_nodes]:
            if cand.free > 0:
                return cand
        raise OutOfMemory("no node can host the page and reclaim found no candidates")

    def allocate(self, page: int, ptype: PageType, now: int) -> PageFrame:
        if page in self.frames or page in self.swap:
            raise TraceError(f"page {page} allocated while still live")
        node = self.place_page(ptype, now)
        frame = PageFrame(page, ptype, last_access=now)
        node.lru_insert(frame, LruKind.INACTIVE)
        self.frames[page] = frame
        self.counters[node.pgalloc_key] += 1
        return frame

    def free_page(self, page: int) -> None:
        frame = self.frames.pop(page, None)
        if frame is not None:
            self.nodes[frame.node].remove(frame)
            return
        if self.swap.pop(page, None) is not None:
            return
        raise TraceError(f"free of non-live page {page}")

    # -- Access and promotion ---------------------------------------------

    def handle_access(self, frame: PageFrame, now: int, latency_fn):
        """Charge one access; on a poisoned page, run the promotion path.

        Returns (latency_ns, PromotionOutcome | None).
        """
        node = self.nodes[frame.node]
        latency = latency_fn(node)
        self.counters[node.pgaccess_key] += 1
        was_inactive = frame.lru is LruKind.INACTIVE
        node.mark_accessed(frame, now)
        frame.access_count += 1
        outcome = None
        if frame.hint_poisoned:
            frame.hint_poisoned = False
            self.counters["numa_hint_faults"] += 1
            outcome = self._promotion_path(frame, node, was_inactive)
            if outcome is PromotionOutcome.PROMOTED:
                latency += self.migration_cost
        return latency, outcome

    def _count_candidate(self, frame: PageFrame) -> None:
        self.counters[PGPROMOTE_CANDIDATE_KEY[frame.type]] += 1
        if frame.demoted_flag:
            self.counters["pgpromote_candidate_demoted"] += 1

    def _pressure_gate_open(self) -> bool:
        # Migration-target check inherited from hint-fault balancing:
        # promotions move batches, so the high watermark must clear with a
        # batch of headroom on top, or the request is dropped.
        wm = self.local.watermarks
        return self.local.free >= wm.high + RECLAIM_BATCH

    def _fail_low_memory(self) -> PromotionOutcome:
        self.counters["pgpromote_fail_low_memory"] += 1
        return PromotionOutcome.FAILED_LOW_MEMORY

    def _promotion_path(self, frame, node, was_inactive) -> PromotionOutcome:
        kind = self.policy.kind
        if node.tier is not Tier.CXL or kind is PolicyKind.DEFAULT_LINUX:
            return PromotionOutcome.NOT_CANDIDATE
        if kind is PolicyKind.NUMA_BALANCING:
            # Stock behaviour: every faulted page is a candidate, but
            # migration is refused while the target is under pressure.
            self._count_candidate(frame)
            if self._pressure_gate_open():
                return self.promote(frame)
            return self._fail_low_memory()
        if kind is PolicyKind.TPP:
            if self.policy.active_lru_filter and was_inactive:
                # First fault only activates the page; promotion waits for
                # proof of a second access.
                return PromotionOutcome.DEFERRED_MARKED_ACCESSED
            self._count_candidate(frame)
            if self.policy.decouple_watermarks:
                # Allocation watermark is ignored; only a truly full node
                # fails the migration.
                return self.promote(frame)
            # Without decoupling the inherited pressure check still gates
            # promotion, which is what makes promotions starve under load.
            if self._pressure_gate_open():
                return self.promote(frame)
            return self._fail_low_memory()
        # autotiering_like
        self._count_candidate(frame)
        if self.promo_buffer > 0:
            out = self.promote(frame)
            if out is PromotionOutcome.PROMOTED:
                self.promo_buffer -= 1
            return out
        return self._fail_low_memory()

    def promote(self, frame: PageFrame) -> PromotionOutcome:
        """Migrate a CXL-resident frame to the local node's active list."""
        local = self.local
        if local.free == 0:
            return self._fail_low_memory()
        if self.audit:
            self.audit("promote", local, frame)
        self.nodes[frame.node].remove(frame)
        frame.demoted_flag = False
        local.lru_insert(frame, LruKind.ACTIVE)
        self.counters[PGPROMOTE_SUCCESS_KEY[frame.type]] += 1
        return PromotionOutcome.PROMOTED

    # -- Hint-fault sampling ------------------------------------------------

    def numa_scan(self, now: int) -> int:
        """Poison up to scan_quota resident pages on the eligible nodes."""
        kind = self.policy.kind
        if kind is PolicyKind.DEFAULT_LINUX:
            return 0
        if kind is PolicyKind.NUMA_BALANCING:
            eligible = self.node_list
        else:
            eligible = self.cxl_nodes  # sampling local pages is wasted work
        walkers = []
        for node in eligible:
            frames = [
                f
                for lst in node.lru_lists.values()
                for f in lst.values()
                if not f.hint_poisoned
            ]
            if frames:
                walkers.append([node, frames, self._scan_cursor[node.id] % len(frames), 0])
        poisoned = 0
        quota = self.policy.scan_quota
        while poisoned < quota and walkers:
            for entry in list(walkers):
                if poisoned >= quota:
                    break
                node, frames, start, taken = entry
                if taken >= len(frames):
                    walkers.remove(entry)
                    continue
                frame = frames[(start + taken) % len(frames)]
                entry[3] = taken + 1
                frame.hint_poisoned = True
                if node.tier is Tier.CXL:
                    self.counters[PGPROMOTE_SAMPLED_KEY[frame.type]] += 1
                poisoned += 1
        for node, _frames, _start, taken in walkers:
            self._scan_cursor[node.id] += taken
        return poisoned

    # -- Background reclaim -------------------------------------------------

    def _reclaim_plan(self, node: NodeState):
        """(trigger page count, stop target in pages, mode) for one node.

        The daemon activates when free drops strictly below the trigger and
        keeps reclaiming until free reaches the target.
        """
        wm = node.watermarks
        kind = self.policy.kind
        if node.tier is Tier.CXL:
            # CXL nodes always reclaim the default way: page out to swap.
            return wm.low, wm.high, "swap"
        if kind is PolicyKind.TPP:
            if self.policy.decouple_watermarks:
                return wm.demotion, wm.demotion, "demote"
            return wm.low, wm.high, "demote"
        if kind is PolicyKind.AUTOTIERING_LIKE:
            return wm.low, wm.high, "demote"
        return wm.low, wm.high, "swap"

    def maybe_reclaim(self, now: int) -> None:
        """Advance each node's reclaim daemon up to the current time."""
        for node in self.node_list:
            nid = node.id
            trigger, target, mode = self._plans[nid]
            if not self._reclaim_active[nid]:
                if node.free >= trigger:
                    continue
                self._reclaim_active[nid] = True
                wake = now + self.policy.reclaim_wake_latency
                if self._busy_until[nid] < wake:
                    self._busy_until[nid] = wake
            while node.free < target and self._busy_until[nid] <= now:
                need = min(RECLAIM_BATCH, target - node.free)
                if mode == "demote":
                    cost = self._demote_batch(node, need, now)
                else:
                    cost = self._swap_batch(node, need)
                if cost == 0:
                    break  # nothing reclaimable right now
                self._busy_until[nid] += cost
            if node.free >= target:
                self._reclaim_active[nid] = False

    def _ensure_inactive(self, node: NodeState, need: int) -> None:
        # Keep the inactive lists stocked, the way the kernel deactivates
        # cold active pages when the inactive lists run low.
        deficit = need - node.inactive_total()
        while deficit > 0:
            anon = node.list_len(PageType.ANON, LruKind.ACTIVE)
            file = node.list_len(PageType.FILE, LruKind.ACTIVE)
            if anon == 0 and file == 0:
                return
            ptype = PageType.FILE if file >= anon else PageType.ANON
            if not node.deactivate_one(ptype):
                return
            deficit -= 1

    def _swap_batch(self, node: NodeState, n: int) -> int:
        self._ensure_inactive(node, n)
        candidates = node.select_reclaim_candidates(n, include_anon=True)
        cost = 0
        for frame in candidates:
            self._swap_out(node, frame)
            cost += self.swap_latency
        return cost

    def _demote_batch(self, node: NodeState, n: int, now: int) -> int:
        self._ensure_inactive(node, n)
        candidates = node.select_reclaim_candidates(
            n, include_anon=True, file_first=self.policy.demote_file_first
        )
        cost = 0
        for frame in candidates:
            cost += self._demote_frame(node, frame)
        return cost

    def _demote_frame(self, node: NodeState, frame: PageFrame) -> int:
        target = None
        for cand in self.cxl_nodes:
            if cand is not node and cand.free > 0:
                target = cand
                break
        if target is None:
            # Migration failed (CXL full): fall back to paging out this page.
            self._swap_out(node, frame)
            return self.swap_latency
        if self.audit:
            self.audit("demote", node, frame)
        node.remove(frame)
        frame.demoted_flag = True
        target.lru_insert(
            frame, LruKind.ACTIVE if self.policy.demote_to_active else LruKind.INACTIVE
        )
        self.counters[PGDEMOTE_KEY[frame.type]] += 1
        if self.policy.kind is PolicyKind.AUTOTIERING_LIKE:
            self.promo_buffer = min(self.promo_buffer_cap, self.promo_buffer + 1)
        return self.migration_cost

    def _swap_out(self, node: NodeState, frame: PageFrame) -> None:
        if self.audit:
            self.audit("swapout", node, frame)
        node.remove(frame)
        del self.frames[frame.page]
        self.swap[frame.page] = frame.type
        self.counters["pgswapout"] += 1

    def swap_in(self, page: int, now: int) -> PageFrame:
        """Bring a swapped-out page back in through the placement policy."""
        ptype = self.swap.pop(page)
        node = self.place_page(ptype, now)
        frame = PageFrame(page, ptype, last_access=now)
        node.lru_insert(frame, LruKind.INACTIVE)
        self.frames[page] = frame
        self.counters["pgswapin"] += 1
        self.counters[node.pgalloc_key] += 1
        return frame

    # -- Periodic work (autotiering sweep) -----------------------------------

    def period_tick(self, now: int) -> int:
        """Per-scan-period housekeeping; returns pages demoted by the sweep."""
        if self.policy.kind is not PolicyKind.AUTOTIERING_LIKE:
            return 0
        local = self.local
        if self._busy_until[local.id] > now:
            return 0  # daemon still busy with pressure-driven reclaim
        threshold = self.policy.cold_access_threshold
        moved = 0
        candidates = local.select_reclaim_candidates(AUTOTIER_SWEEP_BATCH, include_anon=True)
        busy = now
        for frame in candidates:
            if frame.access_count < threshold:
                busy += self._demote_frame(local, frame)
                moved += 1
        self._busy_until[local.id] = busy
        for lst in local.lru_lists.values():
            for frame in lst.values():
                frame.access_count = 0
        return moved
