"""A simulated in-process foreign-function boundary.

Producer and consumer sides of the pipeline never share Python objects
directly. The producer registers an object and passes an opaque UUID
handle across; the consumer resolves the handle, uses the referent, and
releases it. Batches cross as serialized messages, and that serialization
is the single copy the design permits per batch: the registry counts it,
and tests pin copies == batches.

Misuse fails loudly and deterministically: unknown handles, handles of the
wrong kind, use after release (dangling) and double release each raise a
distinct error. Released UUIDs are remembered in a bounded tombstone set
so that recent dangling uses are told apart from garbage input.

``transfer_batch`` can burn a configurable busy-wait latency to model a
real boundary's per-call cost; the default is free.
"""

from __future__ import annotations

import enum
import threading
import time
import uuid as _uuid
from collections import deque
from dataclasses import dataclass
from typing import Any

from .core import RecordBatch
from .ipc import BatchMessage, serialize_batch


class BridgeError(Exception):
    pass


class UnknownHandleError(BridgeError):
    pass


class DanglingHandleError(BridgeError):
    pass


class DoubleReleaseError(BridgeError):
    pass


class KindMismatchError(BridgeError):
    pass


class HandleKind(enum.Enum):
    DATASET = "dataset"
    SCANNER = "scanner"
    SCAN_TASK = "scan_task"
    BATCH = "batch"


@dataclass(frozen=True)
class Handle:
    """Opaque reference passed across the boundary."""

    uuid: _uuid.UUID
    kind: HandleKind

    def __repr__(self) -> str:
        return f"Handle({self.kind.value}, {self.uuid})"


@dataclass(frozen=True)
class BridgeStats:
    registered: int
    released: int
    batch_copies: int
    live: int


_TOMBSTONE_CAP = 1 << 16


class HandleRegistry:
    """Live handle table with release tombstones and copy accounting."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._live: dict[_uuid.UUID, tuple[HandleKind, Any]] = {}
        self._tombstones: set[_uuid.UUID] = set()
        self._tombstone_order: deque[_uuid.UUID] = deque()
        self._registered = 0
        self._released = 0
        self._batch_copies = 0

    def register(self, obj: Any, kind: HandleKind) -> Handle:
        handle = Handle(_uuid.uuid4(), kind)
        with self._lock:
            self._live[handle.uuid] = (kind, obj)
            self._registered += 1
        return handle

    def resolve(self, handle: Handle, kind: HandleKind | None = None) -> Any:
        with self._lock:
            entry = self._live.get(handle.uuid)
            if entry is None:
                if handle.uuid in self._tombstones:
                    raise DanglingHandleError(f"handle used after release: {handle!r}")
                raise UnknownHandleError(f"unknown handle: {handle!r}")
        stored_kind, obj = entry
        if stored_kind is not handle.kind or (kind is not None and stored_kind is not kind):
            wanted = kind.value if kind is not None else handle.kind.value
            raise KindMismatchError(f"handle is a {stored_kind.value}, not a {wanted}")
        return obj

    def release(self, handle: Handle) -> None:
        with self._lock:
            entry = self._live.pop(handle.uuid, None)
            if entry is not None:
                self._released += 1
                self._remember_tombstone(handle.uuid)
                return
            if handle.uuid in self._tombstones:
                raise DoubleReleaseError(f"handle released twice: {handle!r}")
            raise UnknownHandleError(f"unknown handle: {handle!r}")

    def _remember_tombstone(self, uid: _uuid.UUID) -> None:
        # Bounded: ancient releases degrade to UnknownHandleError, which is
        # still a deterministic failure.
        self._tombstones.add(uid)
        self._tombstone_order.append(uid)
        if len(self._tombstone_order) > _TOMBSTONE_CAP:
            self._tombstones.discard(self._tombstone_order.popleft())

    def transfer_batch(
        self,
        batch: RecordBatch,
        latency_us: float = 0.0,
        validate: bool = True,
    ) -> tuple[Handle, BatchMessage]:
        """Serialize ``batch`` (the one permitted copy) and register the
        message under a BATCH handle."""
        message = serialize_batch(batch, validate=validate)
        with self._lock:
            self._batch_copies += 1
        if latency_us > 0.0:
            _busy_wait_ns(int(latency_us * 1000.0))
        handle = self.register(message, HandleKind.BATCH)
        return handle, message

    def stats(self) -> BridgeStats:
        with self._lock:
            return BridgeStats(
                registered=self._registered,
                released=self._released,
                batch_copies=self._batch_copies,
                live=len(self._live),
            )

    def live_count(self) -> int:
        with self._lock:
            return len(self._live)

    def reset(self) -> None:
        with self._lock:
            self._live.clear()
            self._tombstones.clear()
            self._tombstone_order.clear()
            self._registered = 0
            self._released = 0
            self._batch_copies = 0


def _busy_wait_ns(ns: int) -> None:
    # sleep() overshoots by scheduler quanta; a spin keeps microsecond
    # latencies honest at benchmark scale.
    end = time.perf_counter_ns() + ns
    while time.perf_counter_ns() < end:
        pass


registry = HandleRegistry()
"""Default boundary shared by the scanner and reader layers."""


def register(obj: Any, kind: HandleKind) -> Handle:
    return registry.register(obj, kind)


def resolve(handle: Handle, kind: HandleKind | None = None) -> Any:
    return registry.resolve(handle, kind)


def release(handle: Handle) -> None:
    registry.release(handle)


def transfer_batch(batch: RecordBatch, latency_us: float = 0.0) -> tuple[Handle, BatchMessage]:
    return registry.transfer_batch(batch, latency_us)


def bridge_stats() -> BridgeStats:
    return registry.stats()
