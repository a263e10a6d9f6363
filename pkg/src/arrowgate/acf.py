"""ACF: a minimal row-group columnar file format.

Layout (all integers little-endian)::

    "ACF1"
    row groups back-to-back; within a group, one chunk per column in
        schema order. A chunk is compress(codec, payload) where payload is
        [validity bitmap, iff the field is nullable]
        [(rows+1) x u32 offsets, iff utf8]
        [column data bytes]
    footer: UTF-8 JSON {schema, row_groups, total_rows}
    trailer: u32 footer_len, "ACF1"

The footer carries byte ranges per chunk, so readers seek straight to the
columns a projection needs and skip everything else. ``scan_group`` decodes
a group incrementally: whole compressed chunks are read at once (bounded by
one group), but decoded bytes are pulled one batch at a time.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .codecs import Codec, SegmentReader, compress, decompress
from .core import (
    ColumnVector,
    DataType,
    Field,
    RecordBatch,
    Schema,
    all_valid_bitmap,
    bitmap_size,
    null_column,
    rebatch,
    slice_validity,
    validate_batch,
)
from .instruments import alloc_stats, io_stats

MAGIC = b"ACF1"


class AcfFormatError(Exception):
    pass


@dataclass(frozen=True)
class ChunkMeta:
    codec: Codec
    file_offset: int
    compressed_len: int
    uncompressed_len: int


@dataclass(frozen=True)
class RowGroupMeta:
    row_count: int
    cols: tuple[ChunkMeta, ...]


@dataclass(frozen=True)
class AcfFooter:
    schema: Schema
    row_groups: tuple[RowGroupMeta, ...]
    total_rows: int


def _expected_prelude(field: Field, rows: int) -> int:
    n = bitmap_size(rows) if field.nullable else 0
    if field.dtype is DataType.UTF8:
        n += 4 * (rows + 1)
    return n


def _chunk_payload(field: Field, col: ColumnVector) -> bytes:
    parts: list[bytes] = []
    if field.nullable:
        bitmap = col.validity if col.validity is not None else all_valid_bitmap(col.length)
        parts.append(bitmap.tobytes())
    elif col.validity is not None and col.null_count:
        raise ValueError(f"null value in non-nullable field {field.name!r}")
    if field.dtype is DataType.UTF8:
        if col.data.nbytes >= 1 << 32:
            raise ValueError(f"utf8 column {field.name!r} exceeds the 4 GiB chunk cap")
        parts.append(np.ascontiguousarray(col.offsets, dtype="<u4").tobytes())
    parts.append(np.ascontiguousarray(col.data).tobytes())
    return b"".join(parts)


def write_acf(
    path: str | os.PathLike,
    schema: Schema,
    batches: Iterable[RecordBatch],
    codec: Codec = Codec.NONE,
    rows_per_group: int = 65536,
) -> AcfFooter:
    """Write a batch stream to ``path``; returns the footer as written."""
    if rows_per_group < 1:
        raise ValueError("rows_per_group must be >= 1")

    def checked(stream: Iterable[RecordBatch]) -> Iterator[RecordBatch]:
        for b in stream:
            if b.schema != schema:
                raise ValueError("schema mismatch mid-stream: batch does not match file schema")
            violations = validate_batch(b)
            if violations:
                raise ValueError("invalid batch: " + "; ".join(violations))
            yield b

    groups: list[RowGroupMeta] = []
    total = 0
    with open(path, "wb") as f:
        f.write(MAGIC)
        pos = 4
        for group in rebatch(checked(batches), rows_per_group):
            chunks: list[ChunkMeta] = []
            for field, col in zip(schema, group.columns):
                payload = _chunk_payload(field, col)
                blob = compress(codec, payload)
                f.write(blob)
                chunks.append(ChunkMeta(codec, pos, len(blob), len(payload)))
                pos += len(blob)
            groups.append(RowGroupMeta(group.num_rows, tuple(chunks)))
            total += group.num_rows
        footer = AcfFooter(schema, tuple(groups), total)
        blob = json.dumps(_footer_to_json(footer), separators=(",", ":")).encode("utf-8")
        f.write(blob)
        f.write(len(blob).to_bytes(4, "little"))
        f.write(MAGIC)
    return footer


def _footer_to_json(footer: AcfFooter) -> dict:
    return {
        "schema": footer.schema.to_json(),
        "row_groups": [
            {
                "rows": g.row_count,
                "cols": [
                    {
                        "codec": c.codec.value,
                        "off": c.file_offset,
                        "clen": c.compressed_len,
                        "ulen": c.uncompressed_len,
                    }
                    for c in g.cols
                ],
            }
            for g in footer.row_groups
        ],
        "total_rows": footer.total_rows,
    }


def _footer_from_json(obj: dict) -> AcfFooter:
    try:
        schema = Schema.from_json(obj["schema"])
        groups = tuple(
            RowGroupMeta(
                int(g["rows"]),
                tuple(
                    ChunkMeta(Codec(c["codec"]), int(c["off"]), int(c["clen"]), int(c["ulen"]))
                    for c in g["cols"]
                ),
            )
            for g in obj["row_groups"]
        )
        total = int(obj["total_rows"])
    except (KeyError, TypeError, ValueError) as e:
        raise AcfFormatError(f"malformed footer: {e}") from e
    footer = AcfFooter(schema, groups, total)
    _check_footer(footer)
    return footer


def _check_footer(footer: AcfFooter) -> None:
    if footer.total_rows != sum(g.row_count for g in footer.row_groups):
        raise AcfFormatError("footer total_rows disagrees with row group sum")
    last = 0
    for g in footer.row_groups:
        if len(g.cols) != len(footer.schema):
            raise AcfFormatError("row group column count disagrees with schema")
        for field, c in zip(footer.schema, g.cols):
            if c.file_offset < last:
                raise AcfFormatError("chunk offsets not increasing")
            last = c.file_offset + c.compressed_len
            want = _expected_prelude(field, g.row_count)
            if field.dtype.is_fixed_width:
                want += g.row_count * field.dtype.byte_width
                if c.uncompressed_len != want:
                    raise AcfFormatError(
                        f"chunk length {c.uncompressed_len} inconsistent with {g.row_count} rows of {field.dtype.value}"
                    )
            elif c.uncompressed_len < want:
                raise AcfFormatError("utf8 chunk shorter than its offsets section")


def read_acf_footer(path: str | os.PathLike) -> AcfFooter:
    """Parse the footer. Reads only the header magic and trailer bytes."""
    size = os.path.getsize(path)
    if size < 16:
        raise AcfFormatError("file too small for a footer")
    with open(path, "rb") as f:
        head = f.read(4)
        if head != MAGIC:
            raise AcfFormatError(f"bad leading magic {head!r}")
        f.seek(size - 8)
        trailer = f.read(8)
        if trailer[4:] != MAGIC:
            raise AcfFormatError(f"bad trailer magic {trailer[4:]!r}")
        flen = int.from_bytes(trailer[:4], "little")
        # leading magic (4) + footer + length word (4) + trailer magic (4)
        if flen > size - 12:
            raise AcfFormatError(f"footer length {flen} out of bounds for {size}-byte file")
        f.seek(size - 8 - flen)
        blob = f.read(flen)
    io_stats.add_meta(len(blob) + 12)
    try:
        obj = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise AcfFormatError(f"truncated footer: {e}") from e
    return _footer_from_json(obj)


def _split_payload(field: Field, rows: int, payload: np.ndarray) -> ColumnVector:
    pos = 0
    validity = None
    if field.nullable:
        vb = bitmap_size(rows)
        validity = payload[pos : pos + vb]
        pos += vb
    offsets = None
    if field.dtype is DataType.UTF8:
        ob = 4 * (rows + 1)
        offsets = payload[pos : pos + ob].view("<u4")
        pos += ob
    data = payload[pos:]
    return ColumnVector(field.dtype, rows, data, validity, offsets)


def read_row_group(
    path: str | os.PathLike,
    meta: RowGroupMeta,
    schema: Schema,
    projection: Sequence[int] | None = None,
) -> RecordBatch:
    """Materialize one row group, reading only the projected chunks."""
    indices = list(range(len(schema))) if projection is None else list(projection)
    seen: set[int] = set()
    for i in indices:
        if not 0 <= i < len(schema):
            raise IndexError(f"projection index {i} out of range")
        if i in seen:
            raise ValueError(f"duplicate projection index: {i}")
        seen.add(i)
    cols: list[ColumnVector] = []
    fd = os.open(os.fspath(path), os.O_RDONLY)
    try:
        for i in indices:
            field = schema[i]
            cm = meta.cols[i]
            raw = os.pread(fd, cm.compressed_len, cm.file_offset)
            if len(raw) != cm.compressed_len:
                raise AcfFormatError(f"short read for column {field.name!r}")
            io_stats.add_data(len(raw))
            payload = np.frombuffer(decompress(cm.codec, raw, cm.uncompressed_len), np.uint8)
            col = _split_payload(field, meta.row_count, payload)
            alloc_stats.bump()
            cols.append(col)
    finally:
        os.close(fd)
    batch = RecordBatch(schema.select(indices), cols, meta.row_count)
    violations = validate_batch(batch)
    if violations:
        raise AcfFormatError("length mismatch after decompress: " + "; ".join(violations))
    return batch


class _ChunkCursor:
    """Sequential per-batch decoder for one column chunk.

    The compressed chunk is read whole (one group of read-ahead); decoded
    bytes leave the codec one batch at a time, so live decoded memory stays
    proportional to the batch, not the group.
    """

    def __init__(self, fd: int, field: Field, cm: ChunkMeta, rows: int) -> None:
        self._fd = fd
        self._field = field
        self._cm = cm
        self._rows = rows
        self._reader: SegmentReader | None = None
        self._validity: np.ndarray | None = None
        self._offsets: np.ndarray | None = None
        self._row = 0

    def _ensure_open(self) -> None:
        if self._reader is not None:
            return
        cm = self._cm
        raw = os.pread(self._fd, cm.compressed_len, cm.file_offset)
        if len(raw) != cm.compressed_len:
            raise AcfFormatError(f"short read for column {self._field.name!r}")
        io_stats.add_data(len(raw))
        self._reader = SegmentReader(cm.codec, raw, cm.uncompressed_len)
        if self._field.nullable:
            self._validity = self._reader.pull(bitmap_size(self._rows)).copy()
        if self._field.dtype is DataType.UTF8:
            self._offsets = np.ascontiguousarray(self._reader.pull(4 * (self._rows + 1))).view("<u4")

    def next_vector(self, n: int) -> ColumnVector:
        self._ensure_open()
        start = self._row
        self._row += n
        validity = None
        if self._validity is not None:
            validity = slice_validity(self._validity, start, start + n)
        if self._field.dtype.is_fixed_width:
            data = self._reader.pull(n * self._field.dtype.byte_width)
            alloc_stats.bump()
            return ColumnVector(self._field.dtype, n, data, validity)
        base = int(self._offsets[start])
        span = int(self._offsets[start + n]) - base
        data = self._reader.pull(span)
        offsets = (self._offsets[start : start + n + 1].astype(np.int64) - base).astype(np.uint32)
        alloc_stats.bump()
        return ColumnVector(self._field.dtype, n, data, validity, offsets)

    def finish(self) -> None:
        if self._reader is not None:
            self._reader.finish()


def scan_group(
    path: str | os.PathLike,
    meta: RowGroupMeta,
    out_fields: Sequence[tuple[Field, int | None]],
    batch_rows: int,
) -> Iterator[RecordBatch]:
    """Yield batches of one row group, reading only the mapped columns.

    ``out_fields`` pairs each output field with its column index inside
    this file, or ``None`` for fields the file lacks (null-filled). Every
    batch has exactly ``batch_rows`` rows except the last. A zero-column
    mapping yields empty batches from metadata alone, without opening the
    file.
    """
    out_schema = Schema(f for f, _ in out_fields)
    rows = meta.row_count
    needs_file = any(idx is not None for _, idx in out_fields)
    fd = -1
    cursors: list[tuple[Field, _ChunkCursor | None]] = []
    try:
        if needs_file:
            fd = os.open(os.fspath(path), os.O_RDONLY)
        for field, idx in out_fields:
            cursor = None if idx is None else _ChunkCursor(fd, field, meta.cols[idx], rows)
            cursors.append((field, cursor))
        for start in range(0, rows, batch_rows):
            n = min(batch_rows, rows - start)
            cols = []
            for field, cursor in cursors:
                if cursor is None:
                    alloc_stats.bump()
                    cols.append(null_column(field, n))
                else:
                    cols.append(cursor.next_vector(n))
            yield RecordBatch(out_schema, cols, n)
        for _, cursor in cursors:
            if cursor is not None:
                cursor.finish()
    finally:
        if fd >= 0:
            os.close(fd)
