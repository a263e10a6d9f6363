"""Process-wide counters used to observe the read pipeline.

Three singletons live here:

* ``io_stats``      -- bytes read from storage, split into column data vs
                       metadata (footers, format sniffs, schema samples).
* ``memory_gauge``  -- current/peak bytes of decoded batch payloads held by
                       the scan pipeline at once.
* ``alloc_stats``   -- number of buffer materializations performed by the
                       pipeline (one per column per batch, one per message).

All counters are thread-safe and cheap enough to leave on unconditionally.
Tests and the benchmark harness read them via ``snapshot()`` deltas.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass


@dataclass(frozen=True)
class IoSnapshot:
    data_bytes: int
    meta_bytes: int


class IoStats:
    """Running totals of bytes read from storage."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._data = 0
        self._meta = 0

    def add_data(self, n: int) -> None:
        with self._lock:
            self._data += n

    def add_meta(self, n: int) -> None:
        with self._lock:
            self._meta += n

    def snapshot(self) -> IoSnapshot:
        with self._lock:
            return IoSnapshot(self._data, self._meta)

    def reset(self) -> None:
        with self._lock:
            self._data = 0
            self._meta = 0

    @property
    def data_bytes(self) -> int:
        return self.snapshot().data_bytes

    @property
    def meta_bytes(self) -> int:
        return self.snapshot().meta_bytes


@dataclass(frozen=True)
class MemorySnapshot:
    current_bytes: int
    peak_bytes: int


class MemoryGauge:
    """High-water mark of decoded batch bytes held concurrently."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._current = 0
        self._peak = 0

    def acquire(self, n: int) -> None:
        with self._lock:
            self._current += n
            if self._current > self._peak:
                self._peak = self._current

    def release(self, n: int) -> None:
        with self._lock:
            self._current -= n

    def snapshot(self) -> MemorySnapshot:
        with self._lock:
            return MemorySnapshot(self._current, self._peak)

    def reset_peak(self) -> None:
        # Peak restarts from the current level, not from zero.
        with self._lock:
            self._peak = self._current

    def reset(self) -> None:
        with self._lock:
            self._current = 0
            self._peak = 0

    @property
    def current_bytes(self) -> int:
        return self.snapshot().current_bytes

    @property
    def peak_bytes(self) -> int:
        return self.snapshot().peak_bytes


class AllocStats:
    """Counts pipeline buffer materializations, not every numpy temp."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._count = 0

    def bump(self, n: int = 1) -> None:
        with self._lock:
            self._count += n

    def snapshot(self) -> int:
        with self._lock:
            return self._count

    def reset(self) -> None:
        with self._lock:
            self._count = 0

    @property
    def count(self) -> int:
        return self.snapshot()


io_stats = IoStats()
memory_gauge = MemoryGauge()
alloc_stats = AllocStats()


def reset_all() -> None:
    """Zero every counter. Intended for tests and harness run boundaries."""
    io_stats.reset()
    memory_gauge.reset()
    alloc_stats.reset()
