"""Batch-oriented CSV reading and writing.

The dialect is deliberately small: single-byte delimiter, ``\\n`` rows, no
quoting or escaping, so a field can never contain the delimiter or a
newline. Empty fields read as null for nullable columns and as ``""`` for
non-nullable utf8 ones.

Parsing is buffer-at-a-time: a chunk of complete rows is split into field
spans by one jit pass, then each projected column converts its spans in
bulk (jit kernels for int64/float64, one gather for utf8). No per-row line
strings are ever built, and allocations per emitted batch are bounded by
the column count.

Float fields use an exact fast path (values with <= 15 significant digits
and decimal scale within +-22 round correctly in one multiply); anything
else falls back to Python's strtod per field, so parsed values are always
bit-exact.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np
from numba import njit

from .core import (
    ColumnVector,
    DataType,
    Field,
    RecordBatch,
    Schema,
    null_column,
    pack_validity,
    rebatch,
    validate_batch,
)
from .instruments import alloc_stats, io_stats


class CsvParseError(Exception):
    """Parse failure; message carries 1-based line and column when known."""


@dataclass(frozen=True)
class CsvDialect:
    delimiter: str = ","
    has_header: bool = False
    newline: str = "\n"

    def __post_init__(self) -> None:
        if len(self.delimiter.encode("utf-8")) != 1:
            raise ValueError("delimiter must be a single byte")
        if self.delimiter in ("\n", "\r"):
            raise ValueError("delimiter may not be a line break")
        if self.newline != "\n":
            raise ValueError("only \\n rows are supported")

    @property
    def delimiter_byte(self) -> int:
        return self.delimiter.encode("utf-8")[0]


_CHUNK_BYTES = 1 << 20


@njit(cache=True)
def _split_fields(buf, delim, ncols, starts, ends):  # pragma: no cover - jit
    """Fill field spans for complete rows; buf must end with a newline.

    Returns (rows, bad_row, bad_fields): bad_row is -1 when every row has
    exactly ncols fields, else the 0-based row index with bad_fields.
    """
    n = buf.shape[0]
    row = 0
    f = 0
    fs = 0
    base = 0
    for i in range(n):
        c = buf[i]
        if c == delim:
            if f < ncols:
                starts[base + f] = fs
                ends[base + f] = i
            f += 1
            fs = i + 1
        elif c == 10:
            if f < ncols:
                starts[base + f] = fs
                ends[base + f] = i
            f += 1
            if f != ncols:
                return row, row, f
            row += 1
            base += ncols
            f = 0
            fs = i + 1
    return row, -1, 0


@njit(cache=True)
def _parse_int64(buf, starts, ends, nullable, out, valid):  # pragma: no cover - jit
    """Decimal int64 per span; returns the first bad span index or -1."""
    for i in range(starts.shape[0]):
        s = starts[i]
        e = ends[i]
        if s == e:
            if nullable:
                valid[i] = 0
                out[i] = 0
                continue
            return i
        neg = False
        c = buf[s]
        if c == 45:
            neg = True
            s += 1
        elif c == 43:
            s += 1
        if s == e:
            return i
        limit = np.uint64(9223372036854775808) if neg else np.uint64(9223372036854775807)
        v = np.uint64(0)
        while s < e:
            c = buf[s]
            if c < 48 or c > 57:
                return i
            d = np.uint64(c - 48)
            if v > (limit - d) // np.uint64(10):
                return i
            v = v * np.uint64(10) + d
            s += 1
        out[i] = -np.int64(v) if neg else np.int64(v)
    return -1


_POW10 = np.array([10.0**k for k in range(23)])


@njit(cache=True)
def _parse_float64(buf, starts, ends, nullable, out, valid, fallback):  # pragma: no cover - jit
    """Fast-path float64 per span; marks spans needing exact host parsing."""
    for i in range(starts.shape[0]):
        s = starts[i]
        e = ends[i]
        if s == e:
            if nullable:
                valid[i] = 0
                out[i] = 0.0
                continue
            fallback[i] = 1
            continue
        neg = False
        c = buf[s]
        if c == 45:
            neg = True
            s += 1
        elif c == 43:
            s += 1
        mant = np.uint64(0)
        digits = 0
        frac = 0
        point = False
        exp = 0
        ok = s < e
        while s < e:
            c = buf[s]
            if 48 <= c <= 57:
                if digits >= 19:
                    ok = False
                    break
                mant = mant * np.uint64(10) + np.uint64(c - 48)
                if mant > np.uint64(0):
                    digits += 1
                if point:
                    frac += 1
                s += 1
            elif c == 46 and not point:
                point = True
                s += 1
            elif c == 101 or c == 69:
                s += 1
                esign = 1
                if s < e and (buf[s] == 45 or buf[s] == 43):
                    if buf[s] == 45:
                        esign = -1
                    s += 1
                if s == e:
                    ok = False
                    break
                ev = 0
                while s < e:
                    c = buf[s]
                    if c < 48 or c > 57 or ev > 9999:
                        ok = False
                        break
                    ev = ev * 10 + (c - 48)
                    s += 1
                exp = esign * ev
                break
            else:
                ok = False
                break
        if not ok or s < e:
            fallback[i] = 1
            continue
        scale = exp - frac
        if mant >= np.uint64(9007199254740992) or scale > 22 or scale < -22:
            fallback[i] = 1
            continue
        if mant == np.uint64(0):
            v = 0.0
        elif scale >= 0:
            v = np.float64(mant) * _POW10[scale]
        else:
            v = np.float64(mant) / _POW10[-scale]
        out[i] = -v if neg else v
    return 0


@njit(cache=True)
def _gather_bytes(buf, starts, ends, offsets, out):  # pragma: no cover - jit
    for i in range(starts.shape[0]):
        o = offsets[i]
        s = starts[i]
        for k in range(ends[i] - s):
            out[o + k] = buf[s + k]


class _ChunkRows:
    """One buffer of complete rows with its field spans."""

    __slots__ = ("buf", "starts", "ends", "rows", "ncols")

    def __init__(self, buf: np.ndarray, starts: np.ndarray, ends: np.ndarray, rows: int, ncols: int):
        self.buf = buf
        self.starts = starts
        self.ends = ends
        self.rows = rows
        self.ncols = ncols


def _iter_row_chunks(
    path: str | os.PathLike,
    ncols: int,
    dialect: CsvDialect,
    count_meta: bool = False,
) -> Iterator[tuple[_ChunkRows, int]]:
    """Yield (_ChunkRows, first_line_number) over the file."""
    delim = dialect.delimiter_byte
    line_no = 1
    add_bytes = io_stats.add_meta if count_meta else io_stats.add_data
    with open(path, "rb") as f:
        carry = b""
        if dialect.has_header:
            # Pull chunks until the header line is complete.
            while b"\n" not in carry:
                chunk = f.read(_CHUNK_BYTES)
                if not chunk:
                    if carry:
                        carry += b"\n"
                        break
                    return
                add_bytes(len(chunk))
                carry += chunk
            nl = carry.index(b"\n")
            carry = carry[nl + 1 :]
            line_no = 2
        while True:
            chunk = f.read(_CHUNK_BYTES)
            if chunk:
                add_bytes(len(chunk))
                data = carry + chunk
                cut = data.rfind(b"\n")
                if cut < 0:
                    carry = data
                    continue
                complete, carry = data[: cut + 1], data[cut + 1 :]
            else:
                if not carry:
                    return
                # header stripping can leave complete rows in the carry
                if not carry.endswith(b"\n"):
                    carry += b"\n"
                complete, carry = carry, b""
            buf = np.frombuffer(complete, np.uint8)
            nrows = int(np.count_nonzero(buf == 10))
            starts = np.empty(nrows * ncols, np.int64)
            ends = np.empty(nrows * ncols, np.int64)
            rows, bad, got = _split_fields(buf, delim, ncols, starts, ends)
            if bad >= 0:
                raise CsvParseError(
                    f"ragged row at line {line_no + bad}: expected {ncols} fields, got {got}"
                )
            yield _ChunkRows(buf, starts, ends, rows, ncols), line_no
            line_no += rows
            if not chunk:
                return


def _field_text(chunk: _ChunkRows, idx: int) -> str:
    s, e = int(chunk.starts[idx]), int(chunk.ends[idx])
    return bytes(chunk.buf[s:e]).decode("utf-8", errors="replace")


def _convert_column(chunk: _ChunkRows, col: int, field: Field, line_no: int) -> ColumnVector:
    rows = chunk.rows
    starts = chunk.starts[col :: chunk.ncols]
    ends = chunk.ends[col :: chunk.ncols]

    def fail(i: int, why: str) -> CsvParseError:
        return CsvParseError(
            f"cannot parse {field.dtype.value} field {_field_text(chunk, i * chunk.ncols + col)!r} "
            f"at line {line_no + i}, column {col + 1}: {why}"
        )

    if field.dtype is DataType.INT64:
        out = np.empty(rows, np.int64)
        valid = np.ones(rows, np.uint8)
        err = int(_parse_int64(chunk.buf, starts, ends, field.nullable, out, valid))
        if err >= 0:
            raise fail(err, "not a 64-bit integer")
        bitmap = pack_validity(valid) if field.nullable and not valid.all() else None
        return ColumnVector(field.dtype, rows, out.view(np.uint8), bitmap)

    if field.dtype is DataType.FLOAT64:
        out = np.empty(rows, np.float64)
        valid = np.ones(rows, np.uint8)
        fallback = np.zeros(rows, np.uint8)
        _parse_float64(chunk.buf, starts, ends, field.nullable, out, valid, fallback)
        if fallback.any():
            for i in np.nonzero(fallback)[0]:
                s, e = int(starts[i]), int(ends[i])
                text = bytes(chunk.buf[s:e]).decode("utf-8", errors="replace")
                try:
                    out[i] = float(text)
                except ValueError:
                    raise fail(int(i), "not a float") from None
        bitmap = pack_validity(valid) if field.nullable and not valid.all() else None
        return ColumnVector(field.dtype, rows, out.view(np.uint8), bitmap)

    lens = ends - starts
    offsets64 = np.zeros(rows + 1, np.int64)
    np.cumsum(lens, out=offsets64[1:])
    total = int(offsets64[-1])
    if total >= 1 << 32:
        raise CsvParseError(f"utf8 column {field.name!r} exceeds the 4 GiB batch cap")
    data = np.empty(total, np.uint8)
    _gather_bytes(chunk.buf, starts, ends, offsets64, data)
    bitmap = None
    if field.nullable:
        valid = (lens > 0).astype(np.uint8)
        if not valid.all():
            bitmap = pack_validity(valid)
    return ColumnVector(field.dtype, rows, data, bitmap, offsets64.astype(np.uint32))


def scan_csv(
    path: str | os.PathLike,
    file_schema: Schema,
    out_fields: Sequence[tuple[Field, int | None]],
    dialect: CsvDialect,
    batch_rows: int,
) -> Iterator[RecordBatch]:
    """Parse ``path`` into batches of exactly ``batch_rows`` rows (last may
    be short), materializing only the mapped columns.

    ``out_fields`` pairs output fields with their position in the file, or
    ``None`` for fields the file lacks. Row shape is validated for every
    line; field contents are only validated for materialized columns.
    """
    out_schema = Schema(f for f, _ in out_fields)

    def chunks() -> Iterator[RecordBatch]:
        for chunk, line_no in _iter_row_chunks(path, len(file_schema), dialect):
            cols = []
            for field, idx in out_fields:
                if idx is None:
                    cols.append(null_column(field, chunk.rows))
                else:
                    cols.append(_convert_column(chunk, idx, field, line_no))
                alloc_stats.bump()
            yield RecordBatch(out_schema, cols, chunk.rows)

    return rebatch(chunks(), batch_rows)


def csv_parse_batches(
    source: str | os.PathLike,
    schema: Schema,
    dialect: CsvDialect = CsvDialect(),
    batch_rows: int = 8192,
) -> Iterator[RecordBatch]:
    """Parse a whole file whose field count matches ``schema``."""
    if batch_rows < 1:
        raise ValueError("batch_rows must be >= 1")
    mapping = [(f, i) for i, f in enumerate(schema)]
    return scan_csv(source, schema, mapping, dialect, batch_rows)


_INT64_MIN = -(1 << 63)
_INT64_MAX = (1 << 63) - 1


def _classify(text: str) -> DataType:
    """Narrowest dtype for one sample, matching the parser's grammar."""
    if _is_int_text(text):
        v = int(text)
        if _INT64_MIN <= v <= _INT64_MAX:
            return DataType.INT64
        return DataType.FLOAT64
    if _is_float_text(text):
        return DataType.FLOAT64
    return DataType.UTF8


def _is_int_text(text: str) -> bool:
    body = text[1:] if text[:1] in "+-" else text
    return bool(body) and body.isascii() and body.isdigit()


def _is_float_text(text: str) -> bool:
    body = text[1:] if text[:1] in "+-" else text
    if body.lower() in ("inf", "infinity", "nan"):
        return True
    if not body or not body.isascii():
        return False
    mant, _, ex = body.partition("e") if "e" in body else body.partition("E")
    if ex:
        if ex[:1] in "+-":
            ex = ex[1:]
        if not ex.isdigit():
            return False
    head, point, tail = mant.partition(".")
    if point:
        if not (head or tail):
            return False
        return (not head or head.isdigit()) and (not tail or tail.isdigit())
    return mant.isdigit()


def csv_infer_schema(
    path: str | os.PathLike,
    dialect: CsvDialect = CsvDialect(),
    sample_rows: int = 1024,
) -> Schema:
    """Infer names and narrowest dtypes from the first ``sample_rows`` rows."""
    if os.path.getsize(path) == 0:
        raise CsvParseError(f"cannot infer a schema from empty file {path!r}")
    header: list[str] | None = None
    samples: list[list[str]] = []
    ncols = None
    with open(path, "rb") as f:
        blob = b""
        while True:
            chunk = f.read(_CHUNK_BYTES)
            if not chunk:
                break
            io_stats.add_meta(len(chunk))
            blob += chunk
            want = sample_rows + (1 if dialect.has_header else 0)
            if blob.count(b"\n") > want:
                break
    try:
        text = blob.decode("utf-8", errors="strict")
    except UnicodeDecodeError:
        # The sample may end mid multi-byte sequence; drop the ragged tail.
        text = blob.decode("utf-8", errors="ignore")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    elif len(lines) > 1:
        lines.pop()  # incomplete trailing line from a truncated sample
    if not lines:
        raise CsvParseError(f"no rows to sample in {path!r}")
    if dialect.has_header:
        header = lines[0].split(dialect.delimiter)
        lines = lines[1:]
    for i, line in enumerate(lines[:sample_rows]):
        fields = line.split(dialect.delimiter)
        if ncols is None:
            ncols = len(fields)
            if header is not None and len(header) != ncols:
                raise CsvParseError(
                    f"ragged sample: header has {len(header)} fields, line 2 has {ncols}"
                )
        elif len(fields) != ncols:
            at = i + (2 if dialect.has_header else 1)
            raise CsvParseError(f"ragged sample at line {at}: expected {ncols} fields, got {len(fields)}")
        samples.append(fields)
    if ncols is None:
        ncols = len(header) if header else 0
    if ncols == 0:
        raise CsvParseError(f"no fields found in {path!r}")
    names = header if header is not None else [f"c{i}" for i in range(ncols)]
    fields_out = []
    for c in range(ncols):
        values = [row[c] for row in samples]
        nullable = any(v == "" for v in values)
        kinds = {_classify(v) for v in values if v != ""}
        if not kinds or kinds == {DataType.INT64}:
            dtype = DataType.INT64 if kinds else DataType.UTF8
        elif DataType.UTF8 in kinds:
            dtype = DataType.UTF8
        else:
            dtype = DataType.FLOAT64
        fields_out.append(Field(names[c], dtype, nullable))
    return Schema(fields_out)


def write_csv(
    path: str | os.PathLike,
    schema: Schema,
    batches: Iterable[RecordBatch],
    dialect: CsvDialect = CsvDialect(),
) -> int:
    """Write batches as CSV; returns rows written.

    Nulls become empty fields; utf8 values containing the delimiter or a
    newline are rejected (the dialect cannot represent them).
    """
    delim = dialect.delimiter
    forbidden = (delim, "\n", "\r")
    total = 0
    with open(path, "w", encoding="utf-8", newline="") as f:
        if dialect.has_header:
            f.write(delim.join(fld.name for fld in schema) + "\n")
        for batch in batches:
            if batch.schema != schema:
                raise ValueError("batch schema does not match file schema")
            violations = validate_batch(batch)
            if violations:
                raise ValueError("invalid batch: " + "; ".join(violations))
            cols = []
            for field, col in zip(schema, batch.columns):
                if field.dtype is DataType.INT64:
                    vals = col.values()
                    cols.append([str(int(v)) for v in vals])
                elif field.dtype is DataType.FLOAT64:
                    cols.append([repr(float(v)) for v in col.values()])
                else:
                    texts = [col.str_at(i) for i in range(col.length)]
                    for t in texts:
                        if any(ch in t for ch in forbidden):
                            raise ValueError(
                                f"utf8 value {t!r} contains the delimiter or a line break"
                            )
                    cols.append(texts)
                if col.validity is not None:
                    for i in range(col.length):
                        if not col.is_valid(i):
                            cols[-1][i] = ""
            for r in range(batch.num_rows):
                f.write(delim.join(c[r] for c in cols))
                f.write("\n")
            total += batch.num_rows
    return total
