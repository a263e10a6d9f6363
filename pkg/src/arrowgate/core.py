"""In-memory columnar building blocks.

A table slice travels through this library as a :class:`RecordBatch`: a
schema plus one :class:`ColumnVector` per field, all sharing the same row
count. Vectors hold flat little-endian buffers so they can be serialized,
sliced and shipped across the process boundary without per-row work:

* fixed-width columns store raw values in ``data`` (8 bytes per row),
* ``utf8`` columns store concatenated bytes in ``data`` plus ``length + 1``
  unsigned 32-bit ``offsets``,
* nullable columns carry an optional validity bitmap, least-significant bit
  first (bit ``i & 7`` of byte ``i >> 3``), 1 = valid.

Everything here is storage-format agnostic; file formats and the wire
format build on these types.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np


class DataType(enum.Enum):
    """Logical column types."""

    INT64 = "int64"
    FLOAT64 = "float64"
    UTF8 = "utf8"

    @property
    def is_fixed_width(self) -> bool:
        return self is not DataType.UTF8

    @property
    def byte_width(self) -> int:
        """Bytes per value. Raises for variable-width types."""
        if self is DataType.INT64 or self is DataType.FLOAT64:
            return 8
        raise ValueError(f"{self.value} has no fixed byte width")

    @property
    def numpy_dtype(self) -> np.dtype:
        if self is DataType.INT64:
            return np.dtype("<i8")
        if self is DataType.FLOAT64:
            return np.dtype("<f8")
        raise ValueError(f"{self.value} has no numpy scalar dtype")


@dataclass(frozen=True)
class Field:
    name: str
    dtype: DataType
    nullable: bool = False

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("field name must be non-empty")

    def to_json(self) -> dict:
        return {"name": self.name, "dtype": self.dtype.value, "nullable": self.nullable}

    @staticmethod
    def from_json(obj: dict) -> "Field":
        return Field(obj["name"], DataType(obj["dtype"]), bool(obj["nullable"]))


@dataclass(frozen=True)
class Schema:
    fields: tuple[Field, ...]

    def __init__(self, fields: Iterable[Field]) -> None:
        object.__setattr__(self, "fields", tuple(fields))
        seen: set[str] = set()
        for f in self.fields:
            if f.name in seen:
                raise ValueError(f"duplicate field name: {f.name!r}")
            seen.add(f.name)

    def __len__(self) -> int:
        return len(self.fields)

    def __iter__(self) -> Iterator[Field]:
        return iter(self.fields)

    def __getitem__(self, i: int) -> Field:
        return self.fields[i]

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.fields]

    def index_of(self, name: str) -> int:
        for i, f in enumerate(self.fields):
            if f.name == name:
                return i
        raise KeyError(f"no field named {name!r}")

    def get(self, name: str) -> Field:
        return self.fields[self.index_of(name)]

    def select(self, indices: Sequence[int]) -> "Schema":
        return Schema(self.fields[i] for i in indices)

    def to_json(self) -> list[dict]:
        return [f.to_json() for f in self.fields]

    @staticmethod
    def from_json(obj: list[dict]) -> "Schema":
        return Schema(Field.from_json(f) for f in obj)


# --- validity bitmap helpers (LSB-first, 1 = valid) ---


def bitmap_size(length: int) -> int:
    return (length + 7) // 8


def pack_validity(flags: np.ndarray | Sequence[bool]) -> np.ndarray:
    """Pack per-row booleans (1 = valid) into an LSB-first bitmap."""
    arr = np.asarray(flags, dtype=np.uint8)
    return np.packbits(arr, bitorder="little")


def unpack_validity(bitmap: np.ndarray, length: int) -> np.ndarray:
    """Expand a bitmap back to one uint8 flag per row."""
    return np.unpackbits(bitmap, count=length, bitorder="little")


def slice_validity(bitmap: np.ndarray, start: int, stop: int) -> np.ndarray:
    """Bitmap for rows [start, stop); repacks because slices rarely align."""
    if start % 8 == 0:
        # Byte-aligned fast path: a view plus a possible ragged tail byte.
        return np.packbits(
            np.unpackbits(bitmap[start // 8 :], count=stop - start, bitorder="little"),
            bitorder="little",
        )
    flags = np.unpackbits(bitmap, count=stop, bitorder="little")[start:stop]
    return np.packbits(flags, bitorder="little")


def all_valid_bitmap(length: int) -> np.ndarray:
    bm = np.full(bitmap_size(length), 0xFF, dtype=np.uint8)
    if length % 8:
        bm[-1] = (1 << (length % 8)) - 1
    return bm


class ColumnVector:
    """One column of a batch: raw buffers plus enough shape to slice them.

    ``data`` is always a uint8 array. For fixed-width types it reinterprets
    to the typed array via :meth:`values`; for utf8 it is the concatenated
    string bytes addressed by ``offsets``.
    """

    __slots__ = ("dtype", "length", "data", "validity", "offsets")

    def __init__(
        self,
        dtype: DataType,
        length: int,
        data: np.ndarray,
        validity: np.ndarray | None = None,
        offsets: np.ndarray | None = None,
    ) -> None:
        self.dtype = dtype
        self.length = length
        self.data = data
        self.validity = validity
        self.offsets = offsets

    @staticmethod
    def from_values(
        dtype: DataType,
        values: Sequence,
        validity: Sequence[bool] | None = None,
    ) -> "ColumnVector":
        """Build a vector from Python values; ``None`` entries become nulls."""
        vals = list(values)
        nulls = [v is None for v in vals]
        if validity is None and any(nulls):
            validity = [not n for n in nulls]
        if dtype.is_fixed_width:
            filled = [0 if v is None else v for v in vals]
            typed = np.asarray(filled, dtype=dtype.numpy_dtype)
            data = typed.view(np.uint8)
            bitmap = pack_validity(validity) if validity is not None else None
            return ColumnVector(dtype, len(vals), data, bitmap)
        encoded = [b"" if v is None else str(v).encode("utf-8") for v in vals]
        offsets = np.zeros(len(vals) + 1, dtype=np.uint32)
        np.cumsum([len(e) for e in encoded], out=offsets[1:])
        data = np.frombuffer(b"".join(encoded), dtype=np.uint8)
        bitmap = pack_validity(validity) if validity is not None else None
        return ColumnVector(dtype, len(vals), data, bitmap, offsets)

    def values(self) -> np.ndarray:
        """Typed view of ``data`` for fixed-width columns."""
        return self.data.view(self.dtype.numpy_dtype)

    def is_valid(self, i: int) -> bool:
        if self.validity is None:
            return True
        return bool(self.validity[i >> 3] & (1 << (i & 7)))

    @property
    def null_count(self) -> int:
        if self.validity is None:
            return 0
        return self.length - int(unpack_validity(self.validity, self.length).sum())

    def bytes_at(self, i: int) -> memoryview:
        if self.dtype is not DataType.UTF8:
            raise TypeError("bytes_at is only valid for utf8 columns")
        return memoryview(self.data.data)[self.offsets[i] : self.offsets[i + 1]]

    def str_at(self, i: int) -> str:
        return str(self.bytes_at(i), "utf-8")

    @property
    def nbytes(self) -> int:
        n = self.data.nbytes
        if self.validity is not None:
            n += self.validity.nbytes
        if self.offsets is not None:
            n += self.offsets.nbytes
        return n

    def value_equal(self, other: "ColumnVector") -> bool:
        """Row-wise equality; null positions must match, NaN equals NaN."""
        if self.dtype is not other.dtype or self.length != other.length:
            return False
        n = self.length
        va = unpack_validity(self.validity, n) if self.validity is not None else np.ones(n, np.uint8)
        vb = unpack_validity(other.validity, n) if other.validity is not None else np.ones(n, np.uint8)
        if not np.array_equal(va, vb):
            return False
        if self.dtype.is_fixed_width:
            # Bitwise compare makes NaN == NaN and avoids -0.0 surprises.
            xa = self.data.view("<u8")
            xb = other.data.view("<u8")
            return bool(np.all((xa == xb) | (va == 0)))
        if np.array_equal(self.offsets, other.offsets) and np.array_equal(self.data, other.data):
            return True
        for i in range(n):
            if va[i] and bytes(self.bytes_at(i)) != bytes(other.bytes_at(i)):
                return False
        return True

    def __repr__(self) -> str:
        return f"ColumnVector({self.dtype.value}, length={self.length}, nulls={self.null_count})"


class RecordBatch:
    """A horizontal slice of a table: schema + equal-length columns."""

    __slots__ = ("schema", "columns", "num_rows")

    def __init__(self, schema: Schema, columns: Sequence[ColumnVector], num_rows: int | None = None) -> None:
        self.schema = schema
        self.columns = tuple(columns)
        if num_rows is None:
            if not self.columns:
                raise ValueError("num_rows is required for zero-column batches")
            num_rows = self.columns[0].length
        self.num_rows = num_rows

    def column(self, i: int) -> ColumnVector:
        return self.columns[i]

    @property
    def num_columns(self) -> int:
        return len(self.columns)

    @property
    def nbytes(self) -> int:
        return sum(c.nbytes for c in self.columns)

    def value_equal(self, other: "RecordBatch") -> bool:
        """Same shape, dtypes, null positions and values.

        Field names and nullable flags are metadata, not values; two batches
        can be value-equal across formats that spell their schemas
        differently.
        """
        if self.num_rows != other.num_rows or self.num_columns != other.num_columns:
            return False
        return all(a.value_equal(b) for a, b in zip(self.columns, other.columns))

    def __repr__(self) -> str:
        return f"RecordBatch({self.num_rows} rows x {self.num_columns} cols)"


def batch_from_pydict(schema: Schema, data: dict[str, Sequence]) -> RecordBatch:
    """Convenience builder used heavily by tests and demos."""
    cols = [ColumnVector.from_values(f.dtype, data[f.name]) for f in schema]
    return RecordBatch(schema, cols)


def validate_batch(batch: RecordBatch) -> list[str]:
    """Check structural invariants; returns one message per violation.

    An empty list means the batch is well-formed. Messages are stable
    prefixes so callers can classify failures.
    """
    out: list[str] = []
    schema = batch.schema
    if len(schema) != batch.num_columns:
        out.append(
            f"column count mismatch: schema has {len(schema)} fields, batch has {batch.num_columns} columns"
        )
    for i, col in enumerate(batch.columns):
        name = schema[i].name if i < len(schema) else f"#{i}"
        if i < len(schema) and col.dtype is not schema[i].dtype:
            out.append(
                f"dtype mismatch: column {i} ({name}) is {col.dtype.value}, schema says {schema[i].dtype.value}"
            )
            continue
        if col.length != batch.num_rows:
            out.append(
                f"unequal column lengths: column {i} ({name}) has {col.length} rows, batch has {batch.num_rows}"
            )
            continue
        if col.dtype.is_fixed_width:
            want = col.length * col.dtype.byte_width
            if col.data.nbytes != want:
                out.append(
                    f"data length mismatch: column {i} ({name}) has {col.data.nbytes} bytes, expected {want}"
                )
        else:
            offs = col.offsets
            if offs is None or len(offs) != col.length + 1:
                got = "none" if offs is None else str(len(offs))
                out.append(
                    f"offsets length mismatch: column {i} ({name}) has {got} offsets, expected {col.length + 1}"
                )
            elif offs[0] != 0:
                out.append(f"offsets must start at 0: column {i} ({name}) starts at {offs[0]}")
            elif np.any(np.diff(offs.astype(np.int64)) < 0):
                out.append(f"offsets not monotone: column {i} ({name})")
            elif int(offs[-1]) != col.data.nbytes:
                out.append(
                    f"offsets end mismatch: column {i} ({name}) ends at {int(offs[-1])}, data has {col.data.nbytes} bytes"
                )
        if col.validity is not None and col.validity.nbytes != bitmap_size(col.length):
            out.append(
                f"validity length mismatch: column {i} ({name}) has {col.validity.nbytes} bytes, expected {bitmap_size(col.length)}"
            )
    return out


def select_columns(batch: RecordBatch, indices: Sequence[int]) -> RecordBatch:
    """Project a batch by column index; buffers are shared, never copied."""
    seen: set[int] = set()
    for i in indices:
        if not 0 <= i < batch.num_columns:
            raise IndexError(f"column index {i} out of range for {batch.num_columns} columns")
        if i in seen:
            raise ValueError(f"duplicate column index: {i}")
        seen.add(i)
    schema = batch.schema.select(indices)
    cols = [batch.columns[i] for i in indices]
    return RecordBatch(schema, cols, batch.num_rows)


def null_column(field: Field, length: int) -> ColumnVector:
    """An all-null vector, used to fill fields a file does not carry."""
    bitmap = np.zeros(bitmap_size(length), dtype=np.uint8)
    if field.dtype.is_fixed_width:
        data = np.zeros(length * field.dtype.byte_width, dtype=np.uint8)
        return ColumnVector(field.dtype, length, data, bitmap)
    return ColumnVector(
        field.dtype,
        length,
        np.empty(0, dtype=np.uint8),
        bitmap,
        np.zeros(length + 1, dtype=np.uint32),
    )


def slice_batch(batch: RecordBatch, start: int, stop: int) -> RecordBatch:
    """Rows [start, stop) as a new batch; data buffers are views."""
    if not 0 <= start <= stop <= batch.num_rows:
        raise ValueError(f"bad slice [{start}, {stop}) for {batch.num_rows} rows")
    n = stop - start
    cols = []
    for col in batch.columns:
        validity = slice_validity(col.validity, start, stop) if col.validity is not None else None
        if col.dtype.is_fixed_width:
            w = col.dtype.byte_width
            cols.append(ColumnVector(col.dtype, n, col.data[start * w : stop * w], validity))
        else:
            base = int(col.offsets[start])
            offsets = (col.offsets[start : stop + 1].astype(np.int64) - base).astype(np.uint32)
            data = col.data[base : int(col.offsets[stop])]
            cols.append(ColumnVector(col.dtype, n, data, validity, offsets))
    return RecordBatch(batch.schema, cols, n)


def concat_batches(batches: Sequence[RecordBatch]) -> RecordBatch:
    """Stack batches with identical schemas into one."""
    if not batches:
        raise ValueError("cannot concatenate zero batches")
    schema = batches[0].schema
    for b in batches[1:]:
        if b.schema != schema:
            raise ValueError("schema mismatch between batches")
    total = sum(b.num_rows for b in batches)
    if not schema.fields:
        return RecordBatch(schema, [], total)
    cols = []
    for i, field in enumerate(schema):
        parts = [b.columns[i] for b in batches]
        any_validity = any(p.validity is not None for p in parts)
        validity = None
        if any_validity:
            flags = np.concatenate(
                [
                    unpack_validity(p.validity, p.length)
                    if p.validity is not None
                    else np.ones(p.length, np.uint8)
                    for p in parts
                ]
            )
            validity = pack_validity(flags)
        if field.dtype.is_fixed_width:
            data = np.concatenate([p.data for p in parts]) if total else np.empty(0, np.uint8)
            cols.append(ColumnVector(field.dtype, total, data, validity))
        else:
            data = np.concatenate([p.data for p in parts]) if total else np.empty(0, np.uint8)
            offsets = np.zeros(total + 1, dtype=np.uint32)
            pos = 0
            base = 0
            for p in parts:
                offsets[pos + 1 : pos + 1 + p.length] = p.offsets[1:].astype(np.uint32) + base
                pos += p.length
                base += int(p.offsets[-1])
            cols.append(ColumnVector(field.dtype, total, data, validity, offsets))
    return RecordBatch(schema, cols, total)


def rebatch(batches: Iterable[RecordBatch], rows: int) -> Iterator[RecordBatch]:
    """Re-chunk a batch stream into exactly ``rows``-row batches.

    Every emitted batch has ``rows`` rows except possibly the last. Input
    order is preserved and buffers are sliced, not rebuilt, whenever an
    input batch already spans a whole output batch.
    """
    if rows <= 0:
        raise ValueError("rows must be positive")
    pending: list[RecordBatch] = []
    held = 0
    for batch in batches:
        pending.append(batch)
        held += batch.num_rows
        while held >= rows:
            merged = pending[0] if len(pending) == 1 else concat_batches(pending)
            yield slice_batch(merged, 0, rows)
            rest = slice_batch(merged, rows, merged.num_rows)
            pending = [rest] if rest.num_rows else []
            held -= rows
    if held:
        merged = pending[0] if len(pending) == 1 else concat_batches(pending)
        yield merged
