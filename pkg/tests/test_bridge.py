"""Boundary handle registry: lifecycle, failure modes, accounting."""

import time
import uuid

import pytest

from arrowgate import (
    DanglingHandleError,
    DataType,
    DoubleReleaseError,
    Field,
    Handle,
    HandleKind,
    HandleRegistry,
    KindMismatchError,
    Schema,
    UnknownHandleError,
    batch_from_pydict,
    deserialize_batch,
)
from arrowgate import bridge as bridge_mod


def _batch(rows=4):
    schema = Schema([Field("a", DataType.INT64)])
    return batch_from_pydict(schema, {"a": list(range(rows))})


def test_register_resolve_release(bridge):
    obj = object()
    h = bridge.register(obj, HandleKind.DATASET)
    assert bridge.resolve(h) is obj
    assert bridge.resolve(h, HandleKind.DATASET) is obj
    assert bridge.live_count() == 1
    bridge.release(h)
    assert bridge.live_count() == 0
    stats = bridge.stats()
    assert stats.registered == stats.released == 1


def test_handles_are_opaque_and_distinct(bridge):
    a = bridge.register(1, HandleKind.BATCH)
    b = bridge.register(1, HandleKind.BATCH)
    assert a.uuid != b.uuid
    assert isinstance(a.uuid, uuid.UUID)
    with pytest.raises(Exception):
        a.uuid = b.uuid  # frozen


def test_use_after_release_is_dangling(bridge):
    h = bridge.register("x", HandleKind.SCANNER)
    bridge.release(h)
    with pytest.raises(DanglingHandleError, match="after release"):
        bridge.resolve(h)


def test_double_release(bridge):
    h = bridge.register("x", HandleKind.SCANNER)
    bridge.release(h)
    with pytest.raises(DoubleReleaseError, match="twice"):
        bridge.release(h)


def test_unknown_handle(bridge):
    stranger = Handle(uuid.uuid4(), HandleKind.BATCH)
    with pytest.raises(UnknownHandleError, match="unknown"):
        bridge.resolve(stranger)
    with pytest.raises(UnknownHandleError, match="unknown"):
        bridge.release(stranger)


def test_kind_mismatch(bridge):
    h = bridge.register("x", HandleKind.DATASET)
    with pytest.raises(KindMismatchError, match="dataset"):
        bridge.resolve(h, HandleKind.SCANNER)
    # lying about the kind inside the handle itself is also caught
    forged = Handle(h.uuid, HandleKind.BATCH)
    with pytest.raises(KindMismatchError):
        bridge.resolve(forged)
    bridge.release(h)


def test_tombstones_are_bounded(bridge, monkeypatch):
    monkeypatch.setattr(bridge_mod, "_TOMBSTONE_CAP", 4)
    handles = [bridge.register(i, HandleKind.BATCH) for i in range(8)]
    for h in handles:
        bridge.release(h)
    # the oldest tombstones were evicted: still an error, weaker diagnosis
    with pytest.raises(UnknownHandleError):
        bridge.resolve(handles[0])
    with pytest.raises(DanglingHandleError):
        bridge.resolve(handles[-1])


def test_transfer_batch_copies_and_registers(bridge):
    batch = _batch()
    h, msg = bridge.transfer_batch(batch)
    assert bridge.resolve(h, HandleKind.BATCH) is msg
    assert bridge.stats().batch_copies == 1
    got = deserialize_batch(msg)
    assert got.value_equal(batch)
    bridge.release(h)
    assert bridge.stats().live == 0


def test_transfer_batch_validates_by_default(bridge):
    from arrowgate import ValidationError
    from arrowgate.core import ColumnVector, RecordBatch
    import numpy as np

    schema = Schema([Field("a", DataType.INT64)])
    col = ColumnVector(DataType.INT64, 3, np.zeros(8, np.uint8))  # 3 rows, 1 value
    bad = RecordBatch(schema, [col], num_rows=3)
    with pytest.raises(ValidationError):
        bridge.transfer_batch(bad)
    # the trusted path skips value checks; the copy still happens
    h, _ = bridge.transfer_batch(_batch(), validate=False)
    bridge.release(h)


def test_transfer_latency_floor(bridge):
    batch = _batch(rows=2)
    t0 = time.perf_counter_ns()
    h, _ = bridge.transfer_batch(batch, latency_us=200.0)
    elapsed = time.perf_counter_ns() - t0
    assert elapsed >= 200_000
    bridge.release(h)


def test_stats_track_live_net(bridge):
    hs = [bridge.register(i, HandleKind.SCAN_TASK) for i in range(5)]
    for h in hs[:2]:
        bridge.release(h)
    s = bridge.stats()
    assert s.registered == 5 and s.released == 2 and s.live == 3
    for h in hs[2:]:
        bridge.release(h)
    assert bridge.stats().live == 0


def test_reset_clears_everything(bridge):
    h = bridge.register("x", HandleKind.DATASET)
    bridge.release(h)
    bridge.register("y", HandleKind.DATASET)
    bridge.reset()
    s = bridge.stats()
    assert (s.registered, s.released, s.batch_copies, s.live) == (0, 0, 0, 0)
    # old tombstones are forgotten too
    with pytest.raises(UnknownHandleError):
        bridge.resolve(h)


def test_module_level_default_registry():
    from arrowgate import bridge_stats, register, release, resolve

    h = register("obj", HandleKind.DATASET)
    try:
        assert resolve(h) == "obj"
        assert bridge_stats().live == 1
    finally:
        release(h)
    assert bridge_stats().live == 0


def test_registries_are_independent(bridge):
    other = HandleRegistry()
    h = bridge.register("x", HandleKind.BATCH)
    with pytest.raises(UnknownHandleError):
        other.resolve(h)
    bridge.release(h)
