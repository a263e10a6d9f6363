"""Dataset discovery: resolve a URI to files, fragments and a merged schema.

A dataset URI is a plain file path, a directory (walked recursively), or a
glob pattern. Discovery reads only metadata: ACF footers and a bounded CSV
sample for schema inference. Column data stays untouched until a scan
pulls it.

The unit of scan parallelism is the fragment: one ACF row group, or one
whole CSV file (text has no random-access row boundaries).
"""

from __future__ import annotations

import glob as _glob
import os
from dataclasses import dataclass

from .acf import AcfFooter, read_acf_footer
from .core import DataType, Field, Schema
from .csvio import CsvDialect, csv_infer_schema
from .formats import FormatKind, detect_format


class DatasetError(Exception):
    pass


@dataclass(frozen=True)
class Fragment:
    """One independently scannable unit of a dataset.

    ``rows`` is exact for ACF (from the footer) and None for CSV, where the
    count is unknown until the file is parsed.
    """

    index: int
    path: str
    format: FormatKind
    row_group: int | None = None
    rows: int | None = None


_GLOB_CHARS = ("*", "?", "[")


def _discover_files(uri: str) -> list[tuple[str, FormatKind]]:
    if os.path.isdir(uri):
        found = []
        for root, dirs, names in os.walk(uri):
            dirs.sort()
            for name in sorted(names):
                path = os.path.join(root, name)
                if not os.path.isfile(path):
                    continue
                try:
                    fmt = detect_format(path)
                except ValueError:
                    # Directories may carry manifests or notes alongside the
                    # data; skip what we cannot classify. A bad .acf magic
                    # still raises inside detect_format distinctly.
                    if os.path.splitext(name)[1].lower() == ".acf":
                        raise
                    continue
                found.append((path, fmt))
        return found
    if any(ch in uri for ch in _GLOB_CHARS):
        paths = sorted(p for p in _glob.glob(uri, recursive=True) if os.path.isfile(p))
        return [(p, detect_format(p)) for p in paths]
    if os.path.isfile(uri):
        return [(uri, detect_format(uri))]
    raise DatasetError(f"uri matches no files: {uri!r}")


def merge_schemas(schemas: list[Schema]) -> Schema:
    """Union by name in first-appearance order.

    A column missing from some file is nullable in the result (scans fill
    it with nulls there); matching names must agree on dtype.
    """
    order: list[str] = []
    dtypes: dict[str, DataType] = {}
    nullable: dict[str, bool] = {}
    seen_in: dict[str, int] = {}
    for schema in schemas:
        for field in schema:
            if field.name not in dtypes:
                order.append(field.name)
                dtypes[field.name] = field.dtype
                nullable[field.name] = field.nullable
                seen_in[field.name] = 0
            elif dtypes[field.name] is not field.dtype:
                raise DatasetError(
                    f"column {field.name!r} is {dtypes[field.name].value} in one file "
                    f"and {field.dtype.value} in another"
                )
            else:
                nullable[field.name] = nullable[field.name] or field.nullable
            seen_in[field.name] += 1
    for name in order:
        if seen_in[name] < len(schemas):
            nullable[name] = True
    return Schema(Field(n, dtypes[n], nullable[n]) for n in order)


class Dataset:
    """Discovered files plus cached per-file metadata and a merged schema."""

    def __init__(self, uri: str, dialect: CsvDialect = CsvDialect()) -> None:
        self.uri = uri
        self.dialect = dialect
        self.files = _discover_files(uri)
        if not self.files:
            raise DatasetError(f"uri matches no data files: {uri!r}")
        self._footers: dict[str, AcfFooter] = {}
        self._csv_schemas: dict[str, Schema] = {}
        fragments: list[Fragment] = []
        file_schemas: list[Schema] = []
        for path, fmt in self.files:
            if fmt is FormatKind.ACF:
                footer = self.footer(path)
                file_schemas.append(footer.schema)
                for g, meta in enumerate(footer.row_groups):
                    fragments.append(Fragment(len(fragments), path, fmt, g, meta.row_count))
            else:
                file_schemas.append(self.csv_schema(path))
                fragments.append(Fragment(len(fragments), path, fmt))
        self.fragments: tuple[Fragment, ...] = tuple(fragments)
        self.schema = merge_schemas(file_schemas)

    def footer(self, path: str) -> AcfFooter:
        footer = self._footers.get(path)
        if footer is None:
            footer = read_acf_footer(path)
            self._footers[path] = footer
        return footer

    def csv_schema(self, path: str) -> Schema:
        schema = self._csv_schemas.get(path)
        if schema is None:
            schema = csv_infer_schema(path, self.dialect)
            self._csv_schemas[path] = schema
        return schema

    def file_schema(self, fragment: Fragment) -> Schema:
        if fragment.format is FormatKind.ACF:
            return self.footer(fragment.path).schema
        return self.csv_schema(fragment.path)

    def __repr__(self) -> str:
        return (
            f"Dataset({self.uri!r}, files={len(self.files)}, "
            f"fragments={len(self.fragments)}, columns={len(self.schema)})"
        )


def dataset_open(uri: str | os.PathLike, dialect: CsvDialect = CsvDialect()) -> Dataset:
    """Open a dataset URI; all metadata is read and cached here."""
    return Dataset(os.fspath(uri), dialect)


def dataset_schema(dataset: Dataset) -> Schema:
    return dataset.schema


def dataset_fragments(dataset: Dataset) -> list[Fragment]:
    return list(dataset.fragments)
