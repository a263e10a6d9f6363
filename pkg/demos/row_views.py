"""Iterate columnar batches row by row without materializing rows.

A cursor walks the batch; each view borrows the cursor's position and
goes stale the moment it advances, which keeps accidental row retention
from silently reading the wrong data.
"""

from arrowgate import (
    DataType,
    Field,
    Schema,
    StaleRowError,
    batch_from_pydict,
    rows,
)

schema = Schema([
    Field("name", DataType.UTF8, False),
    Field("score", DataType.INT64, True),
])
batch = batch_from_pydict(schema, {
    "name": ["ada", "grace", "edsger"],
    "score": [9, None, 7],
})

total = 0
for view in rows(batch):
    label = "null" if view.is_null(1) else view.get_int64(1)
    print(f"row {view.row}: name={view.get_str(0)!r} score={label}")
    if not view.is_null(1):
        total += view.get_int64(1)
print(f"sum of scores: {total}")

# get_str_view exposes the utf8 bytes without copying them.
cursor = rows(batch)
print(f"zero-copy bytes of row 0: {bytes(cursor.view().get_str_view(0))!r}")

# Holding a view across an advance is an error, not a stale answer.
kept = cursor.view()
cursor.advance()
try:
    kept.get_str(0)
except StaleRowError as exc:
    print(f"kept view refused: {exc}")
