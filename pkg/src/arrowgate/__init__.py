"""arrowgate: batched columnar ingestion across a simulated FFI boundary.

The pieces, bottom to top: a columnar in-memory format (schema, vectors,
record batches), a batch wire message, a compressed columnar file format
(ACF) plus a strict CSV dialect, dataset discovery over files and
fragments, a handle-based boundary bridge with single-copy accounting, a
lazy batched scanner with projection pushdown, row views over batches, a
partitioned query sink, and a benchmark harness (also exposed as the
``arrowgate`` command).
"""

from .acf import AcfFooter, AcfFormatError, read_acf_footer, read_row_group, write_acf
from .bench import (
    BenchError,
    BenchReport,
    RunSpec,
    baseline_eager_scan_count,
    baseline_naive_csv_count,
    report_emit,
    run,
)
from .bridge import (
    BridgeError,
    BridgeStats,
    DanglingHandleError,
    DoubleReleaseError,
    Handle,
    HandleKind,
    HandleRegistry,
    KindMismatchError,
    UnknownHandleError,
    bridge_stats,
    register,
    release,
    resolve,
    transfer_batch,
)
from .codecs import Codec, CodecError, compress, decompress
from .core import (
    ColumnVector,
    DataType,
    Field,
    RecordBatch,
    Schema,
    batch_from_pydict,
    concat_batches,
    rebatch,
    select_columns,
    slice_batch,
    validate_batch,
)
from .csvio import (
    CsvDialect,
    CsvParseError,
    csv_infer_schema,
    csv_parse_batches,
    write_csv,
)
from .datagen import (
    DatagenError,
    GenSpec,
    Manifest,
    ManifestMismatch,
    generate,
    inflate,
    load_manifest,
    verify_manifest,
)
from .dataset import (
    Dataset,
    DatasetError,
    Fragment,
    dataset_fragments,
    dataset_open,
    dataset_schema,
    merge_schemas,
)
from .formats import FormatKind, detect_format
from .instruments import alloc_stats, io_stats, memory_gauge, reset_all
from .ipc import BatchMessage, DecodeError, ValidationError, deserialize_batch, serialize_batch
from .reader import (
    Partitioner,
    PartitionedReader,
    QueryError,
    ReadConfig,
    count,
    filter_count,
    load,
    project_count,
    read_config,
    resolve_pool,
)
from .rows import RowCursor, RowView, StaleRowError, for_each_row, row_stream, rows
from .scanner import (
    ScanError,
    ScanOptions,
    Scanner,
    ScanTask,
    scan_count,
    scan_tasks,
    scanner_new,
    task_next_batch,
)

__version__ = "0.1.0"

__all__ = [
    "AcfFooter", "AcfFormatError", "read_acf_footer", "read_row_group", "write_acf",
    "BenchError", "BenchReport", "RunSpec", "baseline_eager_scan_count",
    "baseline_naive_csv_count", "report_emit", "run",
    "BridgeError", "BridgeStats", "DanglingHandleError", "DoubleReleaseError",
    "Handle", "HandleKind", "HandleRegistry", "KindMismatchError",
    "UnknownHandleError", "bridge_stats", "register", "release", "resolve", "transfer_batch",
    "Codec", "CodecError", "compress", "decompress",
    "ColumnVector", "DataType", "Field", "RecordBatch", "Schema",
    "batch_from_pydict", "concat_batches", "rebatch", "select_columns",
    "slice_batch", "validate_batch",
    "CsvDialect", "CsvParseError", "csv_infer_schema", "csv_parse_batches", "write_csv",
    "DatagenError", "GenSpec", "Manifest", "ManifestMismatch", "generate",
    "inflate", "load_manifest", "verify_manifest",
    "Dataset", "DatasetError", "Fragment", "dataset_fragments", "dataset_open", "dataset_schema",
    "merge_schemas",
    "FormatKind", "detect_format",
    "alloc_stats", "io_stats", "memory_gauge", "reset_all",
    "BatchMessage", "DecodeError", "ValidationError", "deserialize_batch", "serialize_batch",
    "Partitioner", "PartitionedReader", "QueryError", "ReadConfig", "count",
    "filter_count", "load", "project_count", "read_config", "resolve_pool",
    "RowCursor", "RowView", "StaleRowError", "for_each_row", "row_stream", "rows",
    "ScanError", "ScanOptions", "Scanner", "ScanTask", "scan_count",
    "scan_tasks", "scanner_new", "task_next_batch",
]
