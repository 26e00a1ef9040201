"""Access-stream characterizer: interval bitmaps and temperature statistics.

Consumes a (possibly decimated) trace and maintains, per live page, a
64-bit activeness history where bit 0 is the interval in progress.  A
two-table collector/worker handoff happens at each interval boundary: the
table that gathered the finishing interval is folded into the bitmaps and
statistics are emitted, while new samples land in the other table.
Sampling is 1-in-R decimation gated by a duty window inside each
mini-interval, standing in for PMU-style duty-cycled event sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import PageType, SpecError
from .workloads import TraceEvent

BITMAP_MASK = (1 << 64) - 1


@dataclass
class CharacterizerConfig:
    sample_ratio: int = 200  # record one of every R eligible accesses
    mini_interval: int = 5_000_000_000  # ns
    interval: int = 60_000_000_000  # ns; must be a multiple of mini_interval
    duty_fraction: float = 1.0  # sampling enabled for this share of each mini-interval

    def validate(self) -> None:
        if self.sample_ratio < 1:
            raise SpecError("sample_ratio must be >= 1")
        if self.mini_interval < 1 or self.interval < 1:
            raise SpecError("intervals must be positive")
        if self.interval % self.mini_interval != 0:
            raise SpecError("interval must be an integer multiple of mini_interval")
        if not 0.0 < self.duty_fraction <= 1.0:
            raise SpecError("duty_fraction must be in (0, 1]")


@dataclass
class IntervalStats:
    """Statistics for one finished interval."""

    index: int
    total_pages: int
    hot_total: int
    hot_anon: int
    hot_file: int
    alloc_anon: int
    alloc_file: int

    CSV_HEADER = "interval_index,total_pages,hot_total,hot_anon,hot_file,alloc_anon,alloc_file"

    def csv_row(self) -> str:
        return (
            f"{self.index},{self.total_pages},{self.hot_total},{self.hot_anon},"
            f"{self.hot_file},{self.alloc_anon},{self.alloc_file}"
        )


class Characterizer:
    """Tracks per-page activeness bitmaps over the access stream."""

    def __init__(self, config: CharacterizerConfig | None = None):
        self.config = config if config is not None else CharacterizerConfig()
        self.config.validate()
        self.live: dict[int, PageType] = {}
        self.records: dict[int, int] = {}  # page -> activeness bitmap
        self._tables: tuple[set, set] = (set(), set())
        self._active_table = 0
        self._eligible = 0
        self._duty_ns = int(self.config.duty_fraction * self.config.mini_interval)
        self.interval_index = 0
        self._pending = False

    # -- Ingest -----------------------------------------------------------

    def ingest(self, ev: TraceEvent) -> None:
        """Fold one trace event into the current interval's table."""
        self._pending = True
        op = ev.op
        if op == "A":
            self.live[ev.page] = ev.ptype
            return
        if op == "F":
            self.live.pop(ev.page, None)
            self.records.pop(ev.page, None)
            self._tables[0].discard(ev.page)
            self._tables[1].discard(ev.page)
            return
        # Load/store: deterministic 1-in-R decimation inside the duty window.
        if ev.ts % self.config.mini_interval >= self._duty_ns:
            return
        self._eligible += 1
        if self._eligible % self.config.sample_ratio == 0:
            self._tables[self._active_table].add(ev.page)

    # -- Interval rotation --------------------------------------------------

    def rotate_interval(self) -> IntervalStats:
        """Close the current interval: fold samples, emit stats, shift bitmaps."""
        table = self._tables[self._active_table]
        records = self.records
        for page in table:
            records[page] = records.get(page, 0) | 1
        stats = self._interval_stats()
        # Left-shift opens bit 0 for the next interval; pages idle for the
        # whole 64-interval history fall out of the table.
        shifted = {}
        for page, bits in records.items():
            bits = (bits << 1) & BITMAP_MASK
            if bits:
                shifted[page] = bits
        self.records = shifted
        table.clear()
        self._active_table ^= 1
        self.interval_index += 1
        self._pending = False
        return stats

    def _interval_stats(self) -> IntervalStats:
        hot_anon = hot_file = 0
        alloc_anon = alloc_file = 0
        records = self.records
        for page, ptype in self.live.items():
            if ptype is PageType.ANON:
                alloc_anon += 1
                if records.get(page, 0) & 1:
                    hot_anon += 1
            else:
                alloc_file += 1
                if records.get(page, 0) & 1:
                    hot_file += 1
        return IntervalStats(
            index=self.interval_index,
            total_pages=len(self.live),
            hot_total=hot_anon + hot_file,
            hot_anon=hot_anon,
            hot_file=hot_file,
            alloc_anon=alloc_anon,
            alloc_file=alloc_file,
        )

    # -- Queries ------------------------------------------------------------

    def _view_bitmap(self, page: int) -> int:
        bits = self.records.get(page, 0)
        if page in self._tables[self._active_table]:
            bits |= 1
        return bits

    def hot_fraction(self, window: int = 1) -> dict:
        """Fraction of live pages active within the trailing `window` intervals."""
        if not 1 <= window <= 64:
            raise SpecError("window must be in [1, 64]")
        mask = (1 << window) - 1
        total = {PageType.ANON: 0, PageType.FILE: 0}
        hot = {PageType.ANON: 0, PageType.FILE: 0}
        for page, ptype in self.live.items():
            total[ptype] += 1
            if self._view_bitmap(page) & mask:
                hot[ptype] += 1
        live = len(self.live)
        return {
            "total": (hot[PageType.ANON] + hot[PageType.FILE]) / live if live else 0.0,
            "anon": hot[PageType.ANON] / total[PageType.ANON] if total[PageType.ANON] else 0.0,
            "file": hot[PageType.FILE] / total[PageType.FILE] if total[PageType.FILE] else 0.0,
        }

    def reaccess_distribution(self) -> dict[int, float]:
        """For currently-active pages, distance (in intervals) to their previous activity."""
        gaps: dict[int, int] = {}
        active = 0
        for page in self.live:
            bits = self._view_bitmap(page)
            if not bits & 1:
                continue
            active += 1
            history = bits >> 1
            if history:
                gap = (history & -history).bit_length()
                gaps[gap] = gaps.get(gap, 0) + 1
        if not active:
            return {}
        return {g: c / active for g, c in sorted(gaps.items())}

    # -- Batch driver ---------------------------------------------------------

    def process(self, trace) -> list[IntervalStats]:
        """Feed a whole trace, rotating at interval boundaries."""
        interval = self.config.interval
        boundary = interval
        out = []
        for ev in trace:
            while ev.ts >= boundary:
                out.append(self.rotate_interval())
                boundary += interval
            self.ingest(ev)
        if self._pending:
            out.append(self.rotate_interval())
        return out


def stats_csv(rows: list[IntervalStats]) -> str:
    lines = [IntervalStats.CSV_HEADER]
    lines.extend(r.csv_row() for r in rows)
    return "\n".join(lines) + "\n"
