"""Row-oriented access over columnar batches.

A cursor walks one batch; typed array views and unpacked validity are
computed once per batch, so moving the cursor and reading fixed-width
values does no per-row heap work beyond boxing the returned scalar.
Strings copy on ``get_str`` and stay zero-copy via ``get_str_view``.

Views are ephemeral: each one is stamped with the cursor position that
minted it and refuses to read after the cursor moves, which turns the
classic saved-reference bug into a loud error instead of silently serving
a different row.
"""

from __future__ import annotations

from typing import Callable, Iterator

import numpy as np

from .bridge import Handle, HandleRegistry, registry as default_registry
from .core import DataType, RecordBatch, unpack_validity
from .scanner import scan_tasks, task_next_batch


class StaleRowError(Exception):
    """A RowView outlived the cursor position that created it."""


class RowCursor:
    """Forward-only position over one batch's rows."""

    __slots__ = ("batch", "_n", "_pos", "_stamp", "_dtypes", "_typed", "_valid", "_offsets", "_data")

    def __init__(self, batch: RecordBatch) -> None:
        self.batch = batch
        self._n = batch.num_rows
        self._pos = 0
        self._stamp = 0
        self._dtypes = tuple(f.dtype for f in batch.schema)
        typed: list[np.ndarray | None] = []
        offsets: list[np.ndarray | None] = []
        data: list[memoryview | None] = []
        valid: list[np.ndarray | None] = []
        for col in batch.columns:
            if col.dtype.is_fixed_width:
                typed.append(col.values())
                offsets.append(None)
                data.append(None)
            else:
                typed.append(None)
                offsets.append(col.offsets)
                data.append(memoryview(col.data.data))
            valid.append(unpack_validity(col.validity, col.length) if col.validity is not None else None)
        self._typed = typed
        self._valid = valid
        self._offsets = offsets
        self._data = data

    @property
    def position(self) -> int:
        return self._pos

    @property
    def valid(self) -> bool:
        return 0 <= self._pos < self._n

    def advance(self) -> bool:
        """Move to the next row; stamps out existing views."""
        self._pos += 1
        self._stamp += 1
        return self._pos < self._n

    def view(self) -> "RowView":
        if not self.valid:
            raise IndexError(f"cursor is past the end (row {self._pos} of {self._n})")
        return RowView(self, self._pos, self._stamp)

    def __iter__(self) -> Iterator["RowView"]:
        while self.valid:
            yield self.view()
            self.advance()


class RowView:
    """Typed accessors for one row; valid only until the cursor advances."""

    __slots__ = ("_cursor", "_row", "_stamp")

    def __init__(self, cursor: RowCursor, row: int, stamp: int) -> None:
        self._cursor = cursor
        self._row = row
        self._stamp = stamp

    @property
    def row(self) -> int:
        return self._row

    def _check(self, col: int, want: DataType | None) -> RowCursor:
        cur = self._cursor
        if cur._stamp != self._stamp:
            raise StaleRowError(
                f"row view for row {self._row} used after the cursor advanced"
            )
        dtypes = cur._dtypes
        if not 0 <= col < len(dtypes):
            raise IndexError(f"column {col} out of range (batch has {len(dtypes)})")
        if want is not None and dtypes[col] is not want:
            raise TypeError(f"column {col} is {dtypes[col].value}, not {want.value}")
        return cur

    def is_null(self, col: int) -> bool:
        cur = self._check(col, None)
        flags = cur._valid[col]
        return flags is not None and flags[self._row] == 0

    def get_int64(self, col: int) -> int:
        cur = self._check(col, DataType.INT64)
        return int(cur._typed[col][self._row])

    def get_f64(self, col: int) -> float:
        cur = self._check(col, DataType.FLOAT64)
        return float(cur._typed[col][self._row])

    def get_str_view(self, col: int) -> memoryview:
        cur = self._check(col, DataType.UTF8)
        offsets = cur._offsets[col]
        return cur._data[col][offsets[self._row] : offsets[self._row + 1]]

    def get_str(self, col: int) -> str:
        return str(self.get_str_view(col), "utf-8")


def rows(batch: RecordBatch) -> RowCursor:
    """Cursor positioned at row 0 of ``batch``."""
    return RowCursor(batch)


def row_stream(
    scanner_handle: Handle,
    registry: HandleRegistry = default_registry,
) -> Iterator[RowView]:
    """Stream every row of a scanner as ephemeral views.

    Consumes the scanner; all task handles and the scanner handle are
    released when the stream ends (or is closed early).
    """
    task_handles: list[Handle | None] = list(scan_tasks(scanner_handle, registry))
    try:
        for i, th in enumerate(task_handles):
            while (batch := task_next_batch(th, registry)) is not None:
                cursor = RowCursor(batch)
                while cursor.valid:
                    yield cursor.view()
                    cursor.advance()
            registry.release(th)
            task_handles[i] = None
    finally:
        for th in task_handles:
            if th is not None:
                registry.resolve(th).close()
                registry.release(th)
        registry.release(scanner_handle)


def for_each_row(
    scanner_handle: Handle,
    fn: Callable[[RowView], None],
    registry: HandleRegistry = default_registry,
) -> int:
    """Apply ``fn`` to every row; returns the row count."""
    n = 0
    stream = row_stream(scanner_handle, registry)
    try:
        for view in stream:
            fn(view)
            n += 1
    finally:
        stream.close()
    return n
