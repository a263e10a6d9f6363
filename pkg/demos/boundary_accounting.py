"""Cross the simulated language boundary and account for every copy.

Batches cross between the "native" side and the "managed" side as
serialized messages addressed by opaque UUID handles. The registry
enforces lifetimes (use-after-release and double-release are errors)
and counts copies, so a scan can prove it moved each batch exactly
once.
"""

from arrowgate import (
    DanglingHandleError,
    DataType,
    Field,
    HandleKind,
    HandleRegistry,
    Schema,
    batch_from_pydict,
    deserialize_batch,
)

registry = HandleRegistry()

schema = Schema([Field("reading", DataType.FLOAT64, False)])
batch = batch_from_pydict(schema, {"reading": [1.5, -2.25, 0.75]})

# transfer_batch serializes the batch (the single copy), registers the
# message under a fresh handle, and hands both back.
handle, message = registry.transfer_batch(batch)
print(f"handle {handle.uuid} -> {len(message)}-byte message, kind {handle.kind.name}")

stats = registry.stats()
print(f"after transfer: registered={stats.registered} live={stats.live} "
      f"batch_copies={stats.batch_copies}")

# The other side resolves the handle, decodes, and releases.
raw = registry.resolve(handle, HandleKind.BATCH)
decoded = deserialize_batch(raw, schema)
print(f"decoded {decoded.num_rows} rows, equal to the original: {decoded.value_equal(batch)}")
registry.release(handle)

# Lifetimes are strict: the handle is now a tombstone.
try:
    registry.resolve(handle, HandleKind.BATCH)
except DanglingHandleError as exc:
    print(f"resolving again fails: {exc}")

stats = registry.stats()
print(f"final ledger: registered={stats.registered} released={stats.released} "
      f"live={stats.live} batch_copies={stats.batch_copies}")
