"""Partitioned query execution over a dataset.

``load`` resolves a read configuration into a PartitionedReader: the
dataset's fragments dealt into partitions, each scanned independently on a
worker pool. The three sinks (count, filter_count, project_count) consume
the reader; a reader answers exactly one query.

Partitioning never splits a fragment, so any partitioner that covers all
fragments gives the same totals; tests pin that invariance. The pool width
comes from the config, the ARROWGATE_POOL environment variable, or the
CPU count, in that order.
"""

from __future__ import annotations

import enum
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

from .bridge import HandleKind, HandleRegistry, registry as default_registry
from .csvio import CsvDialect
from .dataset import Dataset, Fragment, dataset_open
from .formats import FormatKind
from .rows import RowView, row_stream
from .scanner import ScanOptions, scan_count, scanner_new


class QueryError(Exception):
    pass


class Partitioner(enum.Enum):
    ROUND_ROBIN = "round_robin"
    CONTIGUOUS = "contiguous"


PartitionFn = Callable[[int, Fragment, int], int]


@dataclass(frozen=True)
class ReadConfig:
    """Everything a query needs; build via ``read_config()``."""

    source_uri: str
    num_partitions: int | None = None
    partitioner: Partitioner | PartitionFn = Partitioner.ROUND_ROBIN
    batch_rows: int = 8192
    projection: tuple[str, ...] | None = None
    format: FormatKind | None = None
    dialect: CsvDialect = field(default_factory=CsvDialect)
    boundary_latency_us: float = 0.0
    pool: int | None = None


class ReadConfigBuilder:
    def __init__(self) -> None:
        self._kw: dict = {}

    def source_uri(self, uri: str | os.PathLike) -> "ReadConfigBuilder":
        self._kw["source_uri"] = os.fspath(uri)
        return self

    def num_partitions(self, n: int) -> "ReadConfigBuilder":
        self._kw["num_partitions"] = n
        return self

    def partitioner(self, p: Partitioner | PartitionFn) -> "ReadConfigBuilder":
        self._kw["partitioner"] = p
        return self

    def batch_rows(self, n: int) -> "ReadConfigBuilder":
        self._kw["batch_rows"] = n
        return self

    def projection(self, columns: Sequence[str] | None) -> "ReadConfigBuilder":
        self._kw["projection"] = None if columns is None else tuple(columns)
        return self

    def format(self, fmt: FormatKind | str | None) -> "ReadConfigBuilder":
        self._kw["format"] = FormatKind(fmt) if isinstance(fmt, str) else fmt
        return self

    def dialect(self, dialect: CsvDialect) -> "ReadConfigBuilder":
        self._kw["dialect"] = dialect
        return self

    def boundary_latency_us(self, us: float) -> "ReadConfigBuilder":
        self._kw["boundary_latency_us"] = us
        return self

    def pool(self, workers: int | None) -> "ReadConfigBuilder":
        self._kw["pool"] = workers
        return self

    def build(self) -> ReadConfig:
        if "source_uri" not in self._kw:
            raise QueryError("read config needs a source_uri")
        cfg = ReadConfig(**self._kw)
        if cfg.num_partitions is not None and cfg.num_partitions < 1:
            raise QueryError("num_partitions must be >= 1")
        if cfg.batch_rows < 1:
            raise QueryError("batch_rows must be >= 1")
        if cfg.pool is not None and cfg.pool < 1:
            raise QueryError("pool must be >= 1")
        return cfg


def read_config() -> ReadConfigBuilder:
    return ReadConfigBuilder()


def resolve_pool(requested: int | None) -> int:
    if requested is not None:
        return requested
    env = os.environ.get("ARROWGATE_POOL")
    if env:
        try:
            workers = int(env)
        except ValueError:
            raise QueryError(f"ARROWGATE_POOL is not an integer: {env!r}") from None
        if workers < 1:
            raise QueryError(f"ARROWGATE_POOL must be >= 1, got {workers}")
        return workers
    return os.cpu_count() or 1


def _assign_partitions(
    fragments: Sequence[Fragment],
    num_partitions: int,
    partitioner: Partitioner | PartitionFn,
) -> list[list[Fragment]]:
    parts: list[list[Fragment]] = [[] for _ in range(num_partitions)]
    n = len(fragments)
    if partitioner is Partitioner.ROUND_ROBIN:
        for i, frag in enumerate(fragments):
            parts[i % num_partitions].append(frag)
    elif partitioner is Partitioner.CONTIGUOUS:
        base, extra = divmod(n, num_partitions)
        start = 0
        for p in range(num_partitions):
            size = base + (1 if p < extra else 0)
            parts[p].extend(fragments[start : start + size])
            start += size
    elif callable(partitioner):
        for i, frag in enumerate(fragments):
            p = partitioner(i, frag, num_partitions)
            if not isinstance(p, int) or not 0 <= p < num_partitions:
                raise QueryError(
                    f"partitioner sent fragment {i} to {p!r}; valid range is 0..{num_partitions - 1}"
                )
            parts[p].append(frag)
    else:
        raise QueryError(f"unknown partitioner: {partitioner!r}")
    return parts


class PartitionedReader:
    """One-shot query target: fragments dealt into partitions."""

    def __init__(self, config: ReadConfig, dataset: Dataset, registry: HandleRegistry) -> None:
        self.config = config
        self.dataset = dataset
        self._registry = registry
        self._dataset_handle = registry.register(dataset, HandleKind.DATASET)
        n_frag = len(dataset.fragments)
        self.num_partitions = (
            config.num_partitions if config.num_partitions is not None else max(n_frag, 1)
        )
        self.partitions = _assign_partitions(dataset.fragments, self.num_partitions, config.partitioner)
        self.pool = resolve_pool(config.pool)
        self._consumed = False

    def _consume(self) -> None:
        if self._consumed:
            raise QueryError("reader already consumed; build a new one per query")
        self._consumed = True

    def _finish(self) -> None:
        self._registry.release(self._dataset_handle)

    def _scan_options(self, projection: tuple[str, ...] | None) -> ScanOptions:
        return ScanOptions(
            batch_rows=self.config.batch_rows,
            projection=projection,
            boundary_latency_us=self.config.boundary_latency_us,
        )

    def _map_partitions(self, fn: Callable[[list[Fragment]], int]) -> int:
        busy = [p for p in self.partitions if p]
        if len(busy) <= 1:
            return sum(fn(p) for p in busy)
        with ThreadPoolExecutor(max_workers=self.pool) as pool:
            return sum(pool.map(fn, busy))


def load(config: ReadConfig, registry: HandleRegistry = default_registry) -> PartitionedReader:
    """Open the source and deal its fragments into partitions."""
    only = None if config.format is None else config.format
    dataset = dataset_open(config.source_uri, config.dialect)
    if only is not None:
        kept = [f for f in dataset.fragments if f.format is only]
        if not kept:
            raise QueryError(f"no {only.value} data under {config.source_uri!r}")
        dataset = _restrict(dataset, kept)
    if config.projection is not None:
        known = {f.name for f in dataset.schema}
        for name in config.projection:
            if name not in known:
                raise QueryError(f"projection names unknown column {name!r}")
    return PartitionedReader(config, dataset, registry)


def _restrict(dataset: Dataset, fragments: list[Fragment]) -> Dataset:
    from .dataset import merge_schemas

    dataset.fragments = tuple(
        replace(f, index=i) for i, f in enumerate(fragments)
    )
    dataset.schema = merge_schemas([dataset.file_schema(f) for f in dataset.fragments])
    return dataset


def count(reader: PartitionedReader, registry: HandleRegistry = default_registry) -> int:
    """Total rows. An explicitly empty projection answers ACF fragments
    from row-group metadata without touching data."""
    reader._consume()
    projection = reader.config.projection
    try:
        if projection == ():
            meta_rows = 0
            leftover: list[list[Fragment]] = []
            for part in reader.partitions:
                unknown = [f for f in part if f.rows is None]
                meta_rows += sum(f.rows for f in part if f.rows is not None)
                if unknown:
                    leftover.append(unknown)
            scanned_rows = _count_fragments(reader, leftover, projection, registry) if leftover else 0
            return meta_rows + scanned_rows
        return _count_fragments(reader, reader.partitions, projection, registry)
    finally:
        reader._finish()


def _count_fragments(
    reader: PartitionedReader,
    partitions: Sequence[list[Fragment]],
    projection: tuple[str, ...] | None,
    registry: HandleRegistry,
) -> int:
    options = reader._scan_options(projection)

    def one(frags: list[Fragment]) -> int:
        handle = scanner_new(reader.dataset, options, registry, frags)
        return scan_count(handle, registry)

    busy = [p for p in partitions if p]
    if len(busy) <= 1:
        return sum(one(p) for p in busy)
    with ThreadPoolExecutor(max_workers=reader.pool) as pool:
        return sum(pool.map(one, busy))


def filter_count(
    reader: PartitionedReader,
    predicate: Callable[[RowView], bool],
    registry: HandleRegistry = default_registry,
) -> int:
    """Rows for which ``predicate(view)`` is true, streamed without
    materializing rows; predicate errors carry the row ordinal."""
    reader._consume()
    options = reader._scan_options(reader.config.projection)

    def one(frags: list[Fragment]) -> int:
        handle = scanner_new(reader.dataset, options, registry, frags)
        kept = 0
        stream = row_stream(handle, registry)
        # close at the abort point so handle and gauge releases don't
        # wait for the abandoned generator to be collected
        try:
            for ordinal, view in enumerate(stream):
                try:
                    ok = predicate(view)
                except Exception as exc:
                    raise QueryError(f"predicate failed at row {ordinal}: {exc}") from exc
                if ok:
                    kept += 1
        finally:
            stream.close()
        return kept

    try:
        return reader._map_partitions(one)
    finally:
        reader._finish()


def project_count(
    reader: PartitionedReader,
    columns: Sequence[str],
    registry: HandleRegistry = default_registry,
) -> int:
    """Count rows scanning only ``columns`` (overrides the config's
    projection for this query)."""
    reader._consume()
    projection = tuple(columns)
    known = {f.name for f in reader.dataset.schema}
    for name in projection:
        if name not in known:
            raise QueryError(f"projection names unknown column {name!r}")
    try:
        return _count_fragments(reader, reader.partitions, projection, registry)
    finally:
        reader._finish()
