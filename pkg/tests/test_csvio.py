"""Batch CSV parser: goldens, null semantics, numerics, inference."""

import math

import numpy as np
import pytest
from hypothesis import given, settings

from arrowgate import (
    CsvDialect,
    CsvParseError,
    DataType,
    Field,
    Schema,
    batch_from_pydict,
    concat_batches,
    csv_infer_schema,
    csv_parse_batches,
    io_stats,
    write_csv,
)
from arrowgate.csvio import scan_csv

from conftest import assert_same_values, csv_tables, make_batch

INT64_MIN = -(1 << 63)
INT64_MAX = (1 << 63) - 1


def _parse(path, schema, dialect=CsvDialect(), batch_rows=8192):
    batches = list(csv_parse_batches(path, schema, dialect, batch_rows))
    return concat_batches(batches) if batches else None


def _schema(*specs):
    return Schema([Field(n, d, nullable=nul) for n, d, nul in specs])


def test_golden_mixed_row(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("1,1.5,hi\n-2,nan,\n")
    schema = _schema(
        ("a", DataType.INT64, False),
        ("b", DataType.FLOAT64, False),
        ("c", DataType.UTF8, True),
    )
    batch = _parse(p, schema)
    assert batch.column(0).values().tolist() == [1, -2]
    vals = batch.column(1).values()
    assert vals[0] == 1.5 and math.isnan(vals[1])
    assert batch.column(2).str_at(0) == "hi"
    assert not batch.column(2).is_valid(1)


def test_missing_trailing_newline(tmp_path):
    p = tmp_path / "t.csv"
    p.write_bytes(b"1\n2\n3")
    schema = _schema(("a", DataType.INT64, False))
    assert _parse(p, schema).column(0).values().tolist() == [1, 2, 3]


def test_header_row_skipped(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("a,b\n7,8\n")
    schema = _schema(("a", DataType.INT64, False), ("b", DataType.INT64, False))
    io_stats.reset()
    batch = _parse(p, schema, CsvDialect(has_header=True))
    assert batch.column(0).values().tolist() == [7]
    snap = io_stats.snapshot()
    assert snap.data_bytes == p.stat().st_size


def test_batch_rows_chunking(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("".join(f"{i}\n" for i in range(25)))
    schema = _schema(("a", DataType.INT64, False))
    batches = list(csv_parse_batches(p, schema, batch_rows=10))
    assert [b.num_rows for b in batches] == [10, 10, 5]
    assert concat_batches(batches).column(0).values().tolist() == list(range(25))


def test_chunk_boundary_straddling_rows(tmp_path):
    # Rows long enough that the 1 MiB read chunk splits mid-row.
    p = tmp_path / "t.csv"
    text = "x" * 600_000
    rows = [f"{i},{text}" for i in range(8)]
    p.write_text("\n".join(rows) + "\n")
    schema = _schema(("i", DataType.INT64, False), ("t", DataType.UTF8, False))
    batch = _parse(p, schema)
    assert batch.num_rows == 8
    assert batch.column(0).values().tolist() == list(range(8))
    assert batch.column(1).str_at(7) == text


def test_int64_extremes_and_overflow(tmp_path):
    p = tmp_path / "ok.csv"
    p.write_text(f"{INT64_MIN}\n{INT64_MAX}\n0\n-0\n+7\n")
    schema = _schema(("a", DataType.INT64, False))
    assert _parse(p, schema).column(0).values().tolist() == [
        INT64_MIN,
        INT64_MAX,
        0,
        0,
        7,
    ]

    for bad in (str(INT64_MAX + 1), str(INT64_MIN - 1), "12x", "", "-", "+"):
        q = tmp_path / "bad.csv"
        q.write_text(f"1\n{bad}\n")
        with pytest.raises(CsvParseError, match="line 2"):
            _parse(q, schema)


def test_float_exactness_against_python(tmp_path):
    texts = [
        "1.5",
        "-0.0",
        "2.5e-3",
        "1e22",
        "9007199254740993",  # 2^53 + 1: fast path must not round through int
        "0.1",
        "3.141592653589793",
        "1.7976931348623157e308",
        "5e-324",
        "123456789012345678901234567890.5",  # > 19 digits: fallback path
        "inf",
        "-Infinity",
        "NAN",
    ]
    p = tmp_path / "f.csv"
    p.write_text("".join(t + "\n" for t in texts))
    schema = _schema(("x", DataType.FLOAT64, False))
    got = _parse(p, schema).column(0).values()
    for text, g in zip(texts, got):
        expected = float(text)
        if math.isnan(expected):
            assert math.isnan(g)
        else:
            assert float(g) == expected, text
            assert math.copysign(1, g) == math.copysign(1, expected), text

    q = tmp_path / "bad.csv"
    q.write_text("1.2.3\n")
    with pytest.raises(CsvParseError, match="line 1"):
        _parse(q, schema)


def test_null_semantics(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("1,,x\n,2.5,\n")
    schema = _schema(
        ("a", DataType.INT64, True),
        ("b", DataType.FLOAT64, True),
        ("c", DataType.UTF8, True),
    )
    batch = _parse(p, schema)
    assert [batch.column(0).is_valid(i) for i in (0, 1)] == [True, False]
    assert [batch.column(1).is_valid(i) for i in (0, 1)] == [False, True]
    assert [batch.column(2).is_valid(i) for i in (0, 1)] == [True, False]
    assert batch.column(0).null_count == 1

    strict = _schema(("a", DataType.INT64, False))
    q = tmp_path / "strict.csv"
    q.write_text("1\n\n3\n")
    with pytest.raises(CsvParseError, match="line 2"):
        _parse(q, strict)


def test_empty_utf8_is_null_not_empty_string(tmp_path):
    # The dialect cannot distinguish "" from null, so empty maps to null
    # for nullable fields.
    p = tmp_path / "t.csv"
    p.write_text("a,\n,b\n")
    schema = _schema(("x", DataType.UTF8, True), ("y", DataType.UTF8, True))
    batch = _parse(p, schema)
    assert batch.column(0).str_at(0) == "a"
    assert not batch.column(0).is_valid(1)
    assert not batch.column(1).is_valid(0)


def test_ragged_rows_rejected(tmp_path):
    schema = _schema(("a", DataType.INT64, False), ("b", DataType.INT64, False))
    for text, line in (("1,2\n3\n", 2), ("1,2\n3,4,5\n", 2), ("1\n", 1)):
        p = tmp_path / "t.csv"
        p.write_text(text)
        with pytest.raises(CsvParseError, match=f"line {line}"):
            _parse(p, schema)


def test_custom_delimiter(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("1|a\n2|b\n")
    schema = _schema(("i", DataType.INT64, False), ("s", DataType.UTF8, False))
    batch = _parse(p, schema, CsvDialect(delimiter="|"))
    assert batch.column(1).str_at(1) == "b"

    with pytest.raises(ValueError, match="single byte"):
        CsvDialect(delimiter="ab")
    with pytest.raises(ValueError, match="single byte"):
        CsvDialect(delimiter="é")
    with pytest.raises(ValueError, match="line break"):
        CsvDialect(delimiter="\n")
    with pytest.raises(ValueError, match="rows"):
        CsvDialect(newline="\r\n")


def test_scan_csv_projection_and_null_fill(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("1,10,x\n2,20,y\n")
    file_schema = _schema(
        ("a", DataType.INT64, False),
        ("b", DataType.INT64, False),
        ("c", DataType.UTF8, False),
    )
    extra = Field("z", DataType.FLOAT64, nullable=True)
    out_fields = [(file_schema[2], 2), (extra, None), (file_schema[0], 0)]
    (batch,) = scan_csv(p, file_schema, out_fields, CsvDialect(), 100)
    assert batch.num_columns == 3
    assert batch.column(0).str_at(0) == "x"
    assert batch.column(1).null_count == 2
    assert batch.column(2).values().tolist() == [1, 2]

    # still validates shape with zero output columns
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2,3\n4,5\n")
    with pytest.raises(CsvParseError, match="line 2"):
        list(scan_csv(bad, file_schema, [], CsvDialect(), 100))


def test_zero_column_scan_counts_rows(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("1,2\n3,4\n5,6\n")
    file_schema = _schema(("a", DataType.INT64, False), ("b", DataType.INT64, False))
    batches = list(scan_csv(p, file_schema, [], CsvDialect(), 2))
    assert [b.num_rows for b in batches] == [2, 1]
    assert all(b.num_columns == 0 for b in batches)


def test_parse_error_names_field_and_column(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("1,ok\n2,ok\nboom,ok\n")
    schema = _schema(("a", DataType.INT64, False), ("b", DataType.UTF8, False))
    with pytest.raises(CsvParseError) as info:
        _parse(p, schema)
    msg = str(info.value)
    assert "boom" in msg and "line 3" in msg and "column 1" in msg


@given(table=csv_tables())
@settings(max_examples=40, deadline=None)
def test_write_read_roundtrip(tmp_path_factory, table):
    schema, cols = table
    batch = make_batch(schema, cols)
    p = tmp_path_factory.mktemp("csv") / "t.csv"
    rows = write_csv(p, schema, [batch], CsvDialect(has_header=True))
    assert rows == batch.num_rows
    got = list(csv_parse_batches(p, schema, CsvDialect(has_header=True)))
    if got:
        assert_same_values(concat_batches(got), schema, cols)
    else:
        assert batch.num_rows == 0


def test_write_rejects_unrepresentable(tmp_path):
    schema = _schema(("s", DataType.UTF8, False))
    for bad in ("a,b", "a\nb"):
        batch = batch_from_pydict(schema, {"s": [bad]})
        with pytest.raises(ValueError, match="delimiter or a line break"):
            write_csv(tmp_path / "x.csv", schema, [batch])


def test_infer_schema_types_and_names(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("id,score,tag\n1,2.5,a\n2,3.5,b\n")
    schema = csv_infer_schema(p, CsvDialect(has_header=True))
    assert schema.names == ["id", "score", "tag"]
    assert [f.dtype for f in schema] == [
        DataType.INT64,
        DataType.FLOAT64,
        DataType.UTF8,
    ]
    assert not any(f.nullable for f in schema)

    q = tmp_path / "n.csv"
    q.write_text("1,x\n2,\n")
    inferred = csv_infer_schema(q)
    assert inferred.names == ["c0", "c1"]
    assert [f.nullable for f in inferred] == [False, True]


def test_infer_schema_widening(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("1\n2.5\n")
    assert csv_infer_schema(p)[0].dtype is DataType.FLOAT64

    q = tmp_path / "o.csv"
    q.write_text(f"1\n{INT64_MAX + 1}\n")
    assert csv_infer_schema(q)[0].dtype is DataType.FLOAT64

    r = tmp_path / "m.csv"
    r.write_text("1\n2.5\nword\n")
    assert csv_infer_schema(r)[0].dtype is DataType.UTF8

    s = tmp_path / "e.csv"
    s.write_text(",\n,\n")
    inferred = csv_infer_schema(s)
    assert [f.dtype for f in inferred] == [DataType.UTF8, DataType.UTF8]
    assert all(f.nullable for f in inferred)


def test_infer_schema_sampling_window(tmp_path):
    # Values beyond the sample window must not affect the inferred type.
    p = tmp_path / "t.csv"
    p.write_text("".join("1\n" for _ in range(1024)) + "not a number\n")
    assert csv_infer_schema(p, sample_rows=1024)[0].dtype is DataType.INT64
    assert csv_infer_schema(p, sample_rows=1025)[0].dtype is DataType.UTF8


def test_infer_empty_file_fails(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("")
    with pytest.raises(CsvParseError, match="empty"):
        csv_infer_schema(p)


def test_header_only_file_parses_to_nothing(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("a,b\n")
    schema = csv_infer_schema(p, CsvDialect(has_header=True))
    assert schema.names == ["a", "b"]
    batches = list(csv_parse_batches(p, schema, CsvDialect(has_header=True)))
    assert batches == []


def test_utf8_multibyte_values(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("1,héllo\n2,日本語\n", encoding="utf-8")
    schema = _schema(("i", DataType.INT64, False), ("s", DataType.UTF8, False))
    batch = _parse(p, schema)
    assert batch.column(1).str_at(0) == "héllo"
    assert batch.column(1).str_at(1) == "日本語"


def test_full_file_bytes_counted_once(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("".join(f"{i},{i*2}\n" for i in range(1000)))
    schema = _schema(("a", DataType.INT64, False), ("b", DataType.INT64, False))
    io_stats.reset()
    batch = _parse(p, schema, batch_rows=64)
    assert batch.num_rows == 1000
    assert io_stats.snapshot().data_bytes == p.stat().st_size
