"""HTTP-cache simulation over canonical request strings.

The cache key is the canonical request target and nothing else; the server
guarantees byte-identical bodies for identical targets, so an idealized
always-cacheable model is sound.  `LruCache` supports both an unlimited
mode (capacity None) and a bounded mode with least-recently-used
replacement; `replay` reruns a recorded trace against several capacities;
`CachingEndpoint` is the in-process proxy used by end-to-end experiments.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

Capacity = Optional[int]  # None means unlimited


@dataclass
class CacheStats:
    hits: int = 0
    misses: int = 0

    @property
    def total(self) -> int:
        return self.hits + self.misses

    @property
    def hit_rate(self) -> float:
        return self.hits / self.total if self.total else 0.0


class LruCache:
    def __init__(self, capacity: Capacity = None):
        if capacity is not None and capacity < 1:
            raise ValueError("capacity must be positive (or None for unlimited)")
        self.capacity = capacity
        self.stats = CacheStats()
        self._entries: "OrderedDict[str, object]" = OrderedDict()

    def __len__(self) -> int:
        return len(self._entries)

    def lookup(self, key: str) -> tuple[bool, object]:
        """Record a hit or miss; a hit refreshes recency."""
        if key in self._entries:
            self._entries.move_to_end(key)
            self.stats.hits += 1
            return True, self._entries[key]
        self.stats.misses += 1
        return False, None

    def insert(self, key: str, value: object = None) -> None:
        self._entries[key] = value
        self._entries.move_to_end(key)
        if self.capacity is not None and len(self._entries) > self.capacity:
            self._entries.popitem(last=False)

    def observe(self, key: str) -> bool:
        """lookup-then-insert; returns True on a hit."""
        hit, _ = self.lookup(key)
        if not hit:
            self.insert(key)
        return hit


def replay(trace: Sequence[str], capacities: Iterable[Capacity]) -> dict[Capacity, CacheStats]:
    """One independent simulation of the same trace per capacity."""
    out: dict[Capacity, CacheStats] = {}
    for capacity in capacities:
        cache = LruCache(capacity)
        for key in trace:
            cache.observe(key)
        out[capacity] = cache.stats
    return out


class CachingEndpoint:
    """Pass-through caching proxy: byte-identical replies on hit, forward on miss.

    Hit/miss accounting is linearizable (the cache is touched under a lock);
    only 200 responses are stored, upstream failures pass through untouched.
    """

    def __init__(self, upstream, capacity: Capacity = None):
        self.upstream = upstream
        self._cache = LruCache(capacity)
        self._lock = threading.Lock()

    @property
    def stats(self) -> CacheStats:
        return self._cache.stats

    def get(self, target: str) -> tuple[int, str]:
        with self._lock:
            hit, value = self._cache.lookup(target)
        if hit:
            return value  # type: ignore[return-value]
        response = self.upstream.get(target)
        if response[0] == 200:
            with self._lock:
                self._cache.insert(target, response)
        return response


def write_trace(trace: Sequence[str], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key in trace:
            fh.write(key + "\n")


def read_trace(path: str) -> list[str]:
    with open(path, "r", encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh if line.strip()]


def capacity_label(capacity: Capacity) -> str:
    return "unlimited" if capacity is None else str(capacity)


def parse_capacity(label: str) -> Capacity:
    return None if label == "unlimited" else int(label)


def write_stats_csv(rows: dict[Capacity, CacheStats], path: str) -> None:
    """CSV with the fixed header `capacity,hits,misses,hitRate`."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("capacity,hits,misses,hitRate\n")
        for capacity, stats in rows.items():
            fh.write(
                f"{capacity_label(capacity)},{stats.hits},{stats.misses},{stats.hit_rate:.6f}\n"
            )
