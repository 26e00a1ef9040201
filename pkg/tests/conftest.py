"""Shared fixtures and brute-force oracles."""

from __future__ import annotations

import random

from tiersim.core import (
    LruKind,
    NodeState,
    PageFrame,
    PageType,
    Tier,
    WatermarkSet,
    resolve_watermarks,
)


def make_node(
    capacity: int = 100,
    tier: Tier = Tier.LOCAL,
    node_id: int = 0,
    watermarks: WatermarkSet | None = None,
    **kwargs,
) -> NodeState:
    wm = watermarks if watermarks is not None else resolve_watermarks(capacity)
    return NodeState(node_id, tier, capacity, wm, **kwargs)


class LruOracle:
    """Plain-list reference model of one node's four LRU lists.

    Head of each list is index 0 (most recently activated); tails are the
    reclaim end.  Deliberately naive: every operation is O(n).
    """

    def __init__(self):
        self.lists = {
            (ptype, lru): [] for ptype in PageType for lru in LruKind
        }

    def insert(self, page: int, ptype: PageType, lru: LruKind):
        self.lists[(ptype, lru)].insert(0, page)

    def access(self, page: int, ptype: PageType):
        for lru in LruKind:
            lst = self.lists[(ptype, lru)]
            if page in lst:
                lst.remove(page)
                self.lists[(ptype, LruKind.ACTIVE)].insert(0, page)
                return
        raise AssertionError(f"oracle: page {page} not resident")

    def remove(self, page: int, ptype: PageType):
        for lru in LruKind:
            lst = self.lists[(ptype, lru)]
            if page in lst:
                lst.remove(page)
                return
        raise AssertionError(f"oracle: page {page} not resident")

    def order(self, ptype: PageType, lru: LruKind) -> list[int]:
        return list(self.lists[(ptype, lru)])


def node_order(node: NodeState, ptype: PageType, lru: LruKind) -> list[int]:
    return list(node.lru_lists[(ptype, lru)].keys())


def random_lru_workout(node: NodeState, oracle: LruOracle, rng: random.Random, steps: int):
    """Drive matching insert/access/remove sequences through both models."""
    frames: dict[int, PageFrame] = {}
    next_page = 0
    for _ in range(steps):
        op = rng.random()
        if (op < 0.4 and node.free > 0) or not frames:
            if node.free == 0:
                continue
            ptype = rng.choice([PageType.ANON, PageType.FILE])
            frame = PageFrame(next_page, ptype)
            node.lru_insert(frame, LruKind.INACTIVE)
            oracle.insert(next_page, ptype, LruKind.INACTIVE)
            frames[next_page] = frame
            next_page += 1
        elif op < 0.85:
            page = rng.choice(sorted(frames))
            frame = frames[page]
            node.mark_accessed(frame, now=0)
            oracle.access(page, frame.type)
        else:
            page = rng.choice(sorted(frames))
            frame = frames.pop(page)
            node.remove(frame)
            oracle.remove(page, frame.type)
    return frames
