"""Lazy batched scanning with projection pushdown.

A scanner turns a dataset into scan tasks, one per fragment. Nothing is
read when the scanner or its tasks are created; column data moves only
when a task is asked for its next batch. Batches hold exactly
``batch_rows`` rows except the last of each fragment.

Every batch crosses the simulated boundary exactly once: the producer
side serializes it (the single counted copy), the consumer side resolves
the message handle and rebuilds zero-copy views over it. The memory gauge
tracks the pipeline's live payload so tests can pin the peak to a few
batches regardless of dataset size.

Projection maps requested names onto each file's own schema; files missing
a column yield nulls for it. ACF skips non-projected column chunks
entirely, CSV must still read every byte but converts only what the
projection keeps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

from . import acf, csvio
from .bridge import Handle, HandleKind, HandleRegistry, registry as default_registry
from .core import Field, RecordBatch, Schema
from .dataset import Dataset, Fragment
from .formats import FormatKind
from .instruments import memory_gauge
from .ipc import deserialize_batch


class ScanError(Exception):
    pass


@dataclass(frozen=True)
class ScanOptions:
    batch_rows: int = 8192
    projection: tuple[str, ...] | None = None
    boundary_latency_us: float = 0.0

    def __post_init__(self) -> None:
        if self.batch_rows < 1:
            raise ValueError("batch_rows must be >= 1")
        if self.projection is not None and not isinstance(self.projection, tuple):
            object.__setattr__(self, "projection", tuple(self.projection))


def _projected_schema(dataset_schema: Schema, projection: Sequence[str] | None) -> Schema:
    if projection is None:
        return dataset_schema
    by_name = {f.name: f for f in dataset_schema}
    fields = []
    seen = set()
    for name in projection:
        if name in seen:
            raise ScanError(f"duplicate column in projection: {name!r}")
        seen.add(name)
        field = by_name.get(name)
        if field is None:
            raise ScanError(f"projection names unknown column {name!r}")
        fields.append(field)
    return Schema(fields)


class Scanner:
    """Bound (dataset, options) pair; hands out its tasks exactly once."""

    def __init__(
        self,
        dataset: Dataset,
        options: ScanOptions = ScanOptions(),
        fragments: Sequence[Fragment] | None = None,
    ) -> None:
        self.dataset = dataset
        self.options = options
        self.fragments = tuple(dataset.fragments if fragments is None else fragments)
        self.out_schema = _projected_schema(dataset.schema, options.projection)
        self._tasks_taken = False

    def take_tasks(self) -> list["ScanTask"]:
        if self._tasks_taken:
            raise ScanError("tasks already taken: a scanner's tasks are claimed once")
        self._tasks_taken = True
        return [ScanTask(self, fragment) for fragment in self.fragments]


class ScanTask:
    """One fragment's stream of batches; consumable once, lazy until the
    first pull."""

    def __init__(self, scanner: Scanner, fragment: Fragment) -> None:
        self.fragment = fragment
        self._scanner = scanner
        self._iter: Iterator[RecordBatch] | None = None
        self._done = False

    def _mapping(self) -> list[tuple[Field, int | None]]:
        # Mapped columns keep the file's own field: chunk layout (validity
        # presence) follows what the file wrote, not the merged schema. The
        # bridge re-labels batches with the scanner's out schema.
        file_schema = self._scanner.dataset.file_schema(self.fragment)
        positions = {f.name: i for i, f in enumerate(file_schema)}
        mapping: list[tuple[Field, int | None]] = []
        for f in self._scanner.out_schema:
            idx = positions.get(f.name)
            mapping.append((f if idx is None else file_schema[idx], idx))
        return mapping

    def _storage_batches(self) -> Iterator[RecordBatch]:
        opts = self._scanner.options
        frag = self.fragment
        if frag.format is FormatKind.ACF:
            meta = self._scanner.dataset.footer(frag.path).row_groups[frag.row_group]
            return acf.scan_group(frag.path, meta, self._mapping(), opts.batch_rows)
        return csvio.scan_csv(
            frag.path,
            self._scanner.dataset.csv_schema(frag.path),
            self._mapping(),
            self._scanner.dataset.dialect,
            opts.batch_rows,
        )

    def _pipeline(self, bridge: HandleRegistry) -> Iterator[RecordBatch]:
        opts = self._scanner.options
        out_schema = self._scanner.out_schema
        for storage_batch in self._storage_batches():
            payload = storage_batch.nbytes
            memory_gauge.acquire(payload)
            # The storage side just built this batch from validated decode
            # paths, so the transfer skips re-validation.
            handle, message = bridge.transfer_batch(
                storage_batch, opts.boundary_latency_us, validate=False
            )
            msg_len = len(message)
            memory_gauge.acquire(msg_len)
            # The storage-side buffers are recycled once the message exists.
            memory_gauge.release(payload)
            del storage_batch
            raw = bridge.resolve(handle, HandleKind.BATCH)
            out = deserialize_batch(raw, out_schema, validate=False)
            bridge.release(handle)
            try:
                yield out
            finally:
                memory_gauge.release(msg_len)

    def next_batch(self, bridge: HandleRegistry) -> RecordBatch | None:
        if self._done:
            return None
        if self._iter is None:
            self._iter = self._pipeline(bridge)
        batch = next(self._iter, None)
        if batch is None:
            self._done = True
            self._iter = None
        return batch

    def close(self) -> None:
        if self._iter is not None:
            self._iter.close()
            self._iter = None
        self._done = True


def _as_dataset(dataset: Dataset | Handle, registry: HandleRegistry) -> Dataset:
    if isinstance(dataset, Handle):
        return registry.resolve(dataset, HandleKind.DATASET)
    return dataset


def scanner_new(
    dataset: Dataset | Handle,
    options: ScanOptions = ScanOptions(),
    registry: HandleRegistry = default_registry,
    fragments: Sequence[Fragment] | None = None,
) -> Handle:
    """Create a scanner and hand back its handle; reads nothing."""
    scanner = Scanner(_as_dataset(dataset, registry), options, fragments)
    return registry.register(scanner, HandleKind.SCANNER)


def scan_tasks(scanner_handle: Handle, registry: HandleRegistry = default_registry) -> list[Handle]:
    """Claim the scanner's tasks (once) as one handle per fragment."""
    scanner: Scanner = registry.resolve(scanner_handle, HandleKind.SCANNER)
    return [registry.register(t, HandleKind.SCAN_TASK) for t in scanner.take_tasks()]


def task_next_batch(task_handle: Handle, registry: HandleRegistry = default_registry) -> RecordBatch | None:
    """Pull the task's next batch, or None when the fragment is drained."""
    task: ScanTask = registry.resolve(task_handle, HandleKind.SCAN_TASK)
    return task.next_batch(registry)


def scan_count(scanner_handle: Handle, registry: HandleRegistry = default_registry) -> int:
    """Drain the whole scanner, releasing every handle it created."""
    task_handles: list[Handle | None] = list(scan_tasks(scanner_handle, registry))
    total = 0
    try:
        for i, th in enumerate(task_handles):
            while (batch := task_next_batch(th, registry)) is not None:
                total += batch.num_rows
            registry.release(th)
            task_handles[i] = None
    finally:
        for th in task_handles:
            if th is not None:
                registry.resolve(th, HandleKind.SCAN_TASK).close()
                registry.release(th)
        registry.release(scanner_handle)
    return total
