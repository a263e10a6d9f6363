"""The batch-message wire format.

A :class:`~arrowgate.core.RecordBatch` crosses the simulated foreign
boundary as one flat message (all integers little-endian)::

    magic "ABM1" | u32 column_count | u64 row_count
    then per column:
        u8 dtype tag (1=int64, 2=float64, 3=utf8)
        u8 has_validity (0 or 1)
        [ceil(row_count/8) validity bytes, LSB-first]   when has_validity
        [(row_count+1) x u32 offsets]                   when utf8
        u64 data_len | data_len bytes of column data

Serialization copies each column buffer exactly once into the message;
deserialization builds numpy views over the message without copying, so a
transfer costs one copy total.
"""

from __future__ import annotations

import struct

import numpy as np

from .core import (
    ColumnVector,
    DataType,
    Field,
    RecordBatch,
    Schema,
    bitmap_size,
    validate_batch,
)
from .instruments import alloc_stats

MAGIC = b"ABM1"

_DTYPE_TAGS = {DataType.INT64: 1, DataType.FLOAT64: 2, DataType.UTF8: 3}
_TAG_DTYPES = {v: k for k, v in _DTYPE_TAGS.items()}


class ValidationError(Exception):
    """Raised when an invalid batch reaches an operation requiring a valid one."""


class DecodeError(Exception):
    """Raised for truncated or corrupt messages; names the offending offset."""


class BatchMessage:
    """An encoded batch. ``data`` is a read-only buffer, ``len()`` its size."""

    __slots__ = ("data",)

    def __init__(self, data) -> None:
        if isinstance(data, bytearray):
            data = memoryview(data).toreadonly()
        self.data = data

    def __len__(self) -> int:
        return len(self.data)

    def tobytes(self) -> bytes:
        return bytes(self.data)


def serialized_size(batch: RecordBatch) -> int:
    size = 16
    for col in batch.columns:
        size += 2
        if col.validity is not None:
            size += bitmap_size(col.length)
        if col.dtype is DataType.UTF8:
            size += 4 * (col.length + 1)
        size += 8 + col.data.nbytes
    return size


def serialize_batch(batch: RecordBatch, validate: bool = True) -> BatchMessage:
    """Encode a batch; exactly one pass over each column buffer.

    ``validate=False`` skips the pre-flight batch validation for producers
    that just built the batch from a validated source; the encoder itself
    still only writes well-formed messages.
    """
    if validate:
        violations = validate_batch(batch)
        if violations:
            raise ValidationError("cannot serialize invalid batch: " + "; ".join(violations))
    buf = bytearray(serialized_size(batch))
    struct.pack_into("<4sIQ", buf, 0, MAGIC, batch.num_columns, batch.num_rows)
    pos = 16
    for col in batch.columns:
        buf[pos] = _DTYPE_TAGS[col.dtype]
        buf[pos + 1] = 1 if col.validity is not None else 0
        pos += 2
        if col.validity is not None:
            n = col.validity.nbytes
            buf[pos : pos + n] = memoryview(col.validity)
            pos += n
        if col.dtype is DataType.UTF8:
            n = col.offsets.nbytes
            buf[pos : pos + n] = memoryview(np.ascontiguousarray(col.offsets, dtype="<u4"))
            pos += n
        struct.pack_into("<Q", buf, pos, col.data.nbytes)
        pos += 8
        n = col.data.nbytes
        buf[pos : pos + n] = memoryview(np.ascontiguousarray(col.data))
        pos += n
    alloc_stats.bump()
    return BatchMessage(buf)


def deserialize_batch(
    msg: BatchMessage | bytes,
    schema: Schema | None = None,
    validate: bool = True,
) -> RecordBatch:
    """Decode a message into a batch whose buffers view the message.

    When ``schema`` is omitted the fields get positional names ``f0..fN``;
    callers that know the real schema (the scanner does) pass it in.
    Structural decoding always checks magic, tags, lengths and truncation;
    ``validate=False`` only skips the final whole-batch re-validation, for
    messages produced by this process's own serializer.
    """
    raw = msg.data if isinstance(msg, BatchMessage) else msg
    mv = memoryview(raw)
    if not mv.readonly:
        mv = mv.toreadonly()
    total = len(mv)
    pos = 0

    def need(n: int, what: str) -> int:
        nonlocal pos
        if pos + n > total:
            raise DecodeError(f"truncated {what} at offset {pos}")
        start = pos
        pos += n
        return start

    at = need(16, "header")
    magic, ncols, nrows = struct.unpack_from("<4sIQ", mv, at)
    if magic != MAGIC:
        raise DecodeError(f"bad magic {magic!r} at offset 0")

    vbytes = bitmap_size(nrows)
    columns: list[ColumnVector] = []
    tags: list[tuple[DataType, bool]] = []
    for i in range(ncols):
        at = need(2, f"column {i} header")
        tag = mv[at]
        has_validity = mv[at + 1]
        if tag not in _TAG_DTYPES:
            raise DecodeError(f"unknown dtype tag {tag} at offset {at}")
        if has_validity not in (0, 1):
            raise DecodeError(f"bad validity flag {has_validity} at offset {at + 1}")
        dtype = _TAG_DTYPES[tag]
        validity = None
        if has_validity:
            at = need(vbytes, f"column {i} validity")
            validity = np.frombuffer(mv, np.uint8, vbytes, at)
        offsets = None
        if dtype is DataType.UTF8:
            at = need(4 * (nrows + 1), f"column {i} offsets")
            offsets = np.frombuffer(mv, "<u4", nrows + 1, at)
        at = need(8, f"column {i} data length")
        (data_len,) = struct.unpack_from("<Q", mv, at)
        at = need(data_len, f"column {i} data")
        data = np.frombuffer(mv, np.uint8, data_len, at)
        columns.append(ColumnVector(dtype, nrows, data, validity, offsets))
        tags.append((dtype, bool(has_validity)))
    if pos != total:
        raise DecodeError(f"trailing bytes at offset {pos}")

    if schema is None:
        schema = Schema(Field(f"f{i}", dt, nullable) for i, (dt, nullable) in enumerate(tags))
    elif len(schema) != ncols or any(schema[i].dtype is not tags[i][0] for i in range(ncols)):
        raise DecodeError("schema does not match encoded column dtypes")
    batch = RecordBatch(schema, columns, nrows)
    if validate:
        violations = validate_batch(batch)
        if violations:
            raise DecodeError("message decodes to invalid batch: " + "; ".join(violations))
    return batch
