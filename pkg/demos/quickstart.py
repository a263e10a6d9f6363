"""Build a table in memory, store it twice, read it back.

Walks the shortest useful path through the library: an in-memory record
batch, one columnar file and one CSV file holding the same rows, and a
partitioned reader counting them back.
"""

import tempfile
from pathlib import Path

from arrowgate import (
    Codec,
    CsvDialect,
    DataType,
    Field,
    Schema,
    batch_from_pydict,
    count,
    dataset_open,
    load,
    read_config,
    write_acf,
    write_csv,
)

root = Path(tempfile.mkdtemp(prefix="quickstart-"))

# A schema is an ordered list of named, typed, optionally nullable fields.
schema = Schema([
    Field("city", DataType.UTF8, False),
    Field("population", DataType.INT64, False),
    Field("rainfall_mm", DataType.FLOAT64, True),
])

batch = batch_from_pydict(schema, {
    "city": ["utrecht", "delft", "leiden", "gouda"],
    "population": [361699, 103581, 125099, 73681],
    "rainfall_mm": [851.0, None, 837.5, 812.2],
})
print(f"in memory: {batch.num_rows} rows, {batch.nbytes} bytes across {len(schema)} columns")

# The same rows as a compressed columnar file and as plain CSV.
write_acf(root / "cities.acf", schema, [batch], Codec.DEFLATE, rows_per_group=2)
write_csv(root / "cities.csv", schema, [batch], CsvDialect(has_header=True))
acf_size = (root / "cities.acf").stat().st_size
csv_size = (root / "cities.csv").stat().st_size
print(f"on disk: cities.acf is {acf_size} bytes, cities.csv is {csv_size} bytes")

# Opening a directory discovers every readable file and merges schemas.
dataset = dataset_open(root, dialect=CsvDialect(has_header=True))
print(f"dataset: {len(dataset.fragments)} fragments, columns {dataset.schema.names}")

# The reader plans partitions over fragments and drains them through the
# scan pipeline; both copies of the table are counted here.
reader = load(read_config().source_uri(root).dialect(CsvDialect(has_header=True)).build())
print(f"counted {count(reader)} rows (4 per file, 2 files)")
