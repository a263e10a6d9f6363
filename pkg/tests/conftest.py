"""Shared fixtures and hypothesis strategies."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import strategies as st

from arrowgate import (
    DataType,
    Field,
    HandleRegistry,
    Schema,
    batch_from_pydict,
    reset_all,
)
from arrowgate.bridge import registry as default_registry


@pytest.fixture(autouse=True)
def _clean_counters(request):
    reset_all()
    default_registry.reset()
    yield
    # TEMP DIAGNOSTIC: find tests that leave gauge debris behind
    import gc

    from arrowgate.instruments import memory_gauge

    before = memory_gauge.snapshot().current_bytes
    gc.collect()
    after = memory_gauge.snapshot().current_bytes
    if before != 0 or after != 0:
        with open("/tmp/gauge_debris.log", "a") as fh:
            fh.write(f"{request.node.nodeid} before={before} after={after}\n")
    reset_all()
    default_registry.reset()


@pytest.fixture()
def bridge() -> HandleRegistry:
    return HandleRegistry()


# ---------------------------------------------------------------------------
# Strategies for random tables.

_NAMES = st.lists(
    st.text(alphabet="abcdefghijklmnopqrstuvwxyz_", min_size=1, max_size=8),
    min_size=1,
    max_size=5,
    unique=True,
)

_I64 = st.integers(min_value=-(2**63), max_value=2**63 - 1)
_F64 = st.floats(allow_nan=True, allow_infinity=True, width=64) | st.just(-0.0)
_TEXT = st.text(max_size=12)


def _column_values(dtype: DataType, n: int, nullable: bool, text_strategy):
    if dtype is DataType.INT64:
        value = _I64
    elif dtype is DataType.FLOAT64:
        value = _F64
    else:
        value = text_strategy
    if nullable:
        value = st.one_of(st.none(), value)
    return st.lists(value, min_size=n, max_size=n)


@st.composite
def tables(draw, max_rows: int = 48, text_strategy=_TEXT, dtypes=tuple(DataType)):
    """A (schema, column dict) pair with random shapes, types and nulls."""
    names = draw(_NAMES)
    n = draw(st.integers(min_value=0, max_value=max_rows))
    fields = []
    data = {}
    for name in names:
        dtype = draw(st.sampled_from(dtypes))
        nullable = draw(st.booleans())
        fields.append(Field(name, dtype, nullable))
        data[name] = draw(_column_values(dtype, n, nullable, text_strategy))
    return Schema(fields), data


# CSV cannot carry the delimiter, line breaks, or the null/empty-string
# ambiguity; this alphabet and min_size keep the round trip exact.
_CSV_TEXT = st.text(
    alphabet=st.characters(blacklist_characters=",\n\r", blacklist_categories=("Cs",)),
    min_size=1,
    max_size=10,
)


def csv_tables():
    return tables(text_strategy=_CSV_TEXT)


def make_batch(schema: Schema, data: dict):
    return batch_from_pydict(schema, data)


def null_mask(values: list) -> np.ndarray:
    return np.array([v is not None for v in values], dtype=bool)


def assert_same_values(batch, schema: Schema, data: dict) -> None:
    """Compare a batch against the plain-python columns it came from."""
    assert batch.num_rows == (len(next(iter(data.values()))) if data else 0)
    for ci, field in enumerate(schema):
        col = batch.column(ci)
        values = data[field.name]
        for ri, expected in enumerate(values):
            if expected is None:
                assert not col.is_valid(ri), (field.name, ri)
                continue
            assert col.is_valid(ri), (field.name, ri)
            if field.dtype is DataType.INT64:
                assert int(col.values()[ri]) == expected
            elif field.dtype is DataType.FLOAT64:
                got = float(col.values()[ri])
                if math.isnan(expected):
                    assert math.isnan(got)
                else:
                    assert got == expected and math.copysign(1, got) == math.copysign(1, expected)
            else:
                assert col.str_at(ri) == expected
