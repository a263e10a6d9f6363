"""Deterministic benchmark data: generation, manifests, inflation.

Values come from per-column 64-bit linear congruential streams (MMIX
multiplier), seeded through a splitmix64 finalizer so columns are
decorrelated. The stream supports O(log n) jump-ahead, so any file or row
range can be produced independently and the same (seed, shape) always
yields byte-identical files, in both formats.

``value_mask_bits`` keeps the top N bits of each draw. 64 gives
incompressible noise; small values give repetitive, compressible columns
for codec experiments.

A generated directory carries ``manifest.json``: file list, per-file row
counts and sha256, and the generating spec. Benchmarks refuse to run when
the data on disk no longer matches. ``inflate`` scales a dataset's logical
size with hardlinked copies (physical bytes unchanged); copies are a
flagged fallback for filesystems without link support.
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from numba import njit

from .acf import write_acf
from .codecs import Codec
from .core import ColumnVector, DataType, Field as ColumnField, RecordBatch, Schema

MANIFEST_NAME = "manifest.json"

LCG_A = 6364136223846793005
LCG_C = 1442695040888963407
_M64 = (1 << 64) - 1

_A = np.uint64(LCG_A)
_C = np.uint64(LCG_C)


class DatagenError(Exception):
    pass


def mix64(x: int) -> int:
    """splitmix64 finalizer; avalanches a seed into a stream state."""
    x &= _M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _M64
    return x ^ (x >> 31)


def column_state(seed: int, col: int) -> int:
    """Initial LCG state for one column's stream."""
    return mix64((seed + (col + 1) * 0x9E3779B97F4A7C15) & _M64)


def lcg_advance(state: int, delta: int) -> int:
    """Jump the stream ``delta`` steps in O(log delta)."""
    acc_mult, acc_plus = 1, 0
    cur_mult, cur_plus = LCG_A, LCG_C
    while delta > 0:
        if delta & 1:
            acc_mult = (acc_mult * cur_mult) & _M64
            acc_plus = (acc_plus * cur_mult + cur_plus) & _M64
        cur_plus = ((cur_mult + 1) * cur_plus) & _M64
        cur_mult = (cur_mult * cur_mult) & _M64
        delta >>= 1
    return (acc_mult * state + acc_plus) & _M64


def reference_values(seed: int, col: int, start_row: int, n: int, mask_bits: int = 64) -> list[int]:
    """Pure-host replay of the stream, as signed int64 (for checks)."""
    x = lcg_advance(column_state(seed, col), start_row)
    shift = 64 - mask_bits
    out = []
    for _ in range(n):
        x = (x * LCG_A + LCG_C) & _M64
        v = x >> shift
        out.append(v - (1 << 64) if v >= (1 << 63) else v)
    return out


@njit(cache=True)
def _lcg_fill(state, shift, out):  # pragma: no cover - jit
    x = state
    for i in range(out.shape[0]):
        x = x * _A + _C
        out[i] = x >> shift
    return x


@njit(cache=True)
def _write_int64_csv(vals, delim, out):  # pragma: no cover - jit
    """Render a (ncols, n) int64 block as delimited text; returns length."""
    ncols = vals.shape[0]
    n = vals.shape[1]
    pos = 0
    for r in range(n):
        for c in range(ncols):
            if c:
                out[pos] = delim
                pos += 1
            v = vals[c, r]
            if v == 0:
                out[pos] = 48
                pos += 1
            else:
                if v < 0:
                    m = np.uint64(-(v + 1)) + np.uint64(1)
                    out[pos] = 45
                    pos += 1
                else:
                    m = np.uint64(v)
                start = pos
                while m > np.uint64(0):
                    out[pos] = np.uint8(48 + (m % np.uint64(10)))
                    m //= np.uint64(10)
                    pos += 1
                i = start
                j = pos - 1
                while i < j:
                    t = out[i]
                    out[i] = out[j]
                    out[j] = t
                    i += 1
                    j -= 1
        out[pos] = 10
        pos += 1
    return pos


@dataclass(frozen=True)
class GenSpec:
    rows: int
    cols: int
    rows_per_file: int
    out_dir: str
    formats: tuple[str, ...] = ("acf",)
    codec: Codec = Codec.NONE
    seed: int = 0
    rows_per_group: int = 65536
    value_mask_bits: int = 64

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1 or self.rows_per_file < 1:
            raise DatagenError("rows, cols and rows_per_file must be >= 1")
        if self.rows_per_group < 1:
            raise DatagenError("rows_per_group must be >= 1")
        if not 1 <= self.value_mask_bits <= 64:
            raise DatagenError("value_mask_bits must be in 1..64")
        bad = [f for f in self.formats if f not in ("acf", "csv")]
        if bad or not self.formats:
            raise DatagenError(f"formats must be a subset of acf,csv; got {self.formats!r}")


@dataclass(frozen=True)
class FileEntry:
    path: str
    format: str
    rows: int
    bytes: int
    sha256: str
    link_of: str | None = None


@dataclass(frozen=True)
class Manifest:
    version: int
    spec: dict
    schema: tuple[str, ...]
    total_rows: int
    files: tuple[FileEntry, ...]
    inflation: dict = field(default_factory=lambda: {"factor": 1, "copied": False})

    def base_files(self, fmt: str | None = None) -> list[FileEntry]:
        return [
            e for e in self.files
            if e.link_of is None and (fmt is None or e.format == fmt)
        ]

    def files_of(self, fmt: str) -> list[FileEntry]:
        return [e for e in self.files if e.format == fmt]

    def logical_rows(self, fmt: str) -> int:
        return sum(e.rows for e in self.files_of(fmt))


def _file_rows(rows: int, per_file: int) -> list[int]:
    sizes = [per_file] * (rows // per_file)
    if rows % per_file:
        sizes.append(rows % per_file)
    return sizes


def _schema_for(spec: GenSpec) -> Schema:
    return Schema(ColumnField(f"c{i}", DataType.INT64, False) for i in range(spec.cols))


def _hash_file(path: Path) -> tuple[str, int]:
    h = hashlib.sha256()
    size = 0
    with open(path, "rb") as f:
        while True:
            chunk = f.read(1 << 20)
            if not chunk:
                break
            h.update(chunk)
            size += len(chunk)
    return h.hexdigest(), size


def _column_blocks(spec: GenSpec, start_row: int, nrows: int, block: int) -> Iterator[np.ndarray]:
    """Yield (cols, block_rows) uint64 value blocks for a row range."""
    shift = np.uint64(64 - spec.value_mask_bits)
    states = [
        np.uint64(lcg_advance(column_state(spec.seed, c), start_row))
        for c in range(spec.cols)
    ]
    done = 0
    while done < nrows:
        n = min(block, nrows - done)
        vals = np.empty((spec.cols, n), np.uint64)
        for c in range(spec.cols):
            # The jit call hands the state back as a Python int; rewrap so
            # the next dispatch types it as uint64 rather than int64.
            states[c] = np.uint64(_lcg_fill(states[c], shift, vals[c]))
        done += n
        yield vals


def _write_acf_file(spec: GenSpec, path: Path, start_row: int, nrows: int, schema: Schema) -> None:
    def batches() -> Iterator[RecordBatch]:
        for vals in _column_blocks(spec, start_row, nrows, spec.rows_per_group):
            cols = [
                ColumnVector(DataType.INT64, vals.shape[1], vals[c].view(np.uint8))
                for c in range(spec.cols)
            ]
            yield RecordBatch(schema, cols)

    write_acf(path, schema, batches(), spec.codec, spec.rows_per_group)


def _write_csv_file(spec: GenSpec, path: Path, start_row: int, nrows: int) -> None:
    block = min(spec.rows_per_group, 1 << 16)
    out = np.empty(block * (21 * spec.cols + 1) + 64, np.uint8)
    with open(path, "wb") as f:
        for vals in _column_blocks(spec, start_row, nrows, block):
            n = _write_int64_csv(vals.view(np.int64), np.uint8(44), out)
            f.write(memoryview(out)[:n])


def generate(spec: GenSpec) -> Manifest:
    """Write the dataset and its manifest; returns the manifest."""
    root = Path(spec.out_dir)
    root.mkdir(parents=True, exist_ok=True)
    schema = _schema_for(spec)
    sizes = _file_rows(spec.rows, spec.rows_per_file)
    entries: list[FileEntry] = []
    for fmt in spec.formats:
        sub = root / fmt
        sub.mkdir(exist_ok=True)
        start = 0
        for i, nrows in enumerate(sizes):
            path = sub / f"part-{i:05d}.{fmt}"
            if fmt == "acf":
                _write_acf_file(spec, path, start, nrows, schema)
            else:
                _write_csv_file(spec, path, start, nrows)
            digest, size = _hash_file(path)
            entries.append(FileEntry(f"{fmt}/{path.name}", fmt, nrows, size, digest))
            start += nrows
    manifest = Manifest(
        version=1,
        spec={
            "rows": spec.rows,
            "cols": spec.cols,
            "rows_per_file": spec.rows_per_file,
            "formats": list(spec.formats),
            "codec": spec.codec.name.lower(),
            "seed": spec.seed,
            "rows_per_group": spec.rows_per_group,
            "value_mask_bits": spec.value_mask_bits,
        },
        schema=tuple(f.name for f in schema),
        total_rows=spec.rows,
        files=tuple(entries),
    )
    save_manifest(root, manifest)
    return manifest


def spec_from_manifest(manifest: Manifest, **overrides) -> GenSpec:
    """Rebuild the generating spec (for codec or format variants)."""
    s = manifest.spec
    kw = dict(
        rows=s["rows"],
        cols=s["cols"],
        rows_per_file=s["rows_per_file"],
        out_dir=overrides.pop("out_dir"),
        formats=tuple(s["formats"]),
        codec=Codec[s["codec"].upper()],
        seed=s["seed"],
        rows_per_group=s["rows_per_group"],
        value_mask_bits=s["value_mask_bits"],
    )
    kw.update(overrides)
    return GenSpec(**kw)


def save_manifest(root: str | os.PathLike, manifest: Manifest) -> Path:
    doc = {
        "version": manifest.version,
        "spec": manifest.spec,
        "schema": list(manifest.schema),
        "total_rows": manifest.total_rows,
        "files": [
            {
                "path": e.path,
                "format": e.format,
                "rows": e.rows,
                "bytes": e.bytes,
                "sha256": e.sha256,
                **({"link_of": e.link_of} if e.link_of else {}),
            }
            for e in manifest.files
        ],
        "inflation": manifest.inflation,
    }
    path = Path(root) / MANIFEST_NAME
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def load_manifest(root: str | os.PathLike) -> Manifest:
    path = Path(root) / MANIFEST_NAME
    if not path.is_file():
        raise DatagenError(f"no {MANIFEST_NAME} under {os.fspath(root)!r}")
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    return Manifest(
        version=doc["version"],
        spec=doc["spec"],
        schema=tuple(doc["schema"]),
        total_rows=doc["total_rows"],
        files=tuple(
            FileEntry(
                path=e["path"],
                format=e["format"],
                rows=e["rows"],
                bytes=e["bytes"],
                sha256=e["sha256"],
                link_of=e.get("link_of"),
            )
            for e in doc["files"]
        ),
        inflation=doc["inflation"],
    )


class ManifestMismatch(DatagenError):
    pass


def verify_manifest(root: str | os.PathLike, manifest: Manifest, fmt: str | None = None) -> None:
    """Re-hash base files and check link copies exist with the right size.

    Raises ManifestMismatch on any difference; benchmark runs call this
    before measuring anything.
    """
    root = Path(root)
    for entry in manifest.files:
        if fmt is not None and entry.format != fmt:
            continue
        path = root / entry.path
        if not path.is_file():
            raise ManifestMismatch(f"manifest file missing on disk: {entry.path}")
        if entry.link_of is not None:
            if path.stat().st_size != entry.bytes:
                raise ManifestMismatch(f"size mismatch for {entry.path}")
            continue
        digest, size = _hash_file(path)
        if size != entry.bytes or digest != entry.sha256:
            raise ManifestMismatch(
                f"checksum mismatch for {entry.path}: data dir does not match its manifest"
            )


def _linked_name(name: str, k: int) -> str:
    stem, ext = os.path.splitext(name)
    return f"{stem}.h{k:03d}{ext}"


def _link_or_copy(src: Path, dst: Path, copy_fallback: bool) -> bool:
    """Returns True when the bytes were copied instead of linked."""
    if dst.exists():
        dst.unlink()
    try:
        os.link(src, dst)
        return False
    except OSError:
        if not copy_fallback:
            raise DatagenError(
                f"hardlink {src} -> {dst} failed; pass copy_fallback to duplicate bytes"
            ) from None
        shutil.copyfile(src, dst)
        return True


def inflate(root: str | os.PathLike, factor: int, copy_fallback: bool = False) -> Manifest:
    """Add ``factor`` hardlinked copies of every base file in place.

    Logical rows become (old copies + factor) x base; physical bytes stay
    put unless the filesystem forces the copy fallback. factor 0 is a
    no-op.
    """
    if factor < 0:
        raise DatagenError("inflation factor must be >= 0")
    root = Path(root)
    manifest = load_manifest(root)
    if factor == 0:
        return manifest
    start = int(manifest.inflation["factor"])
    copied = bool(manifest.inflation.get("copied", False))
    new_entries: list[FileEntry] = []
    for entry in manifest.base_files():
        src = root / entry.path
        for k in range(start, start + factor):
            rel = os.path.join(os.path.dirname(entry.path), _linked_name(os.path.basename(entry.path), k))
            copied |= _link_or_copy(src, root / rel, copy_fallback)
            new_entries.append(replace(entry, path=rel, link_of=entry.path))
    out = Manifest(
        version=manifest.version,
        spec=manifest.spec,
        schema=manifest.schema,
        total_rows=manifest.total_rows,
        files=manifest.files + tuple(new_entries),
        inflation={"factor": start + factor, "copied": copied},
    )
    save_manifest(root, out)
    return out


def materialize_scaled(
    root: str | os.PathLike,
    manifest: Manifest,
    fmt: str,
    factor: int,
    dest: str | os.PathLike,
    copy_fallback: bool = False,
) -> int:
    """Build a directory holding ``factor`` linked copies of one format's
    base files; returns the logical row count. Reuses ``dest`` if it
    already has the right file count."""
    if factor < 1:
        raise DatagenError("scale factor must be >= 1")
    root = Path(root)
    dest = Path(dest)
    base = manifest.base_files(fmt)
    if not base:
        raise DatagenError(f"manifest has no {fmt} files")
    expected: list[tuple[Path, Path]] = []
    for e in base:
        name = os.path.basename(e.path)
        for k in range(factor):
            expected.append((root / e.path, dest / (name if k == 0 else _linked_name(name, k))))
    if dest.is_dir() and sorted(p.name for p in dest.iterdir()) == sorted(d.name for _, d in expected):
        return sum(e.rows for e in base) * factor
    if dest.exists():
        shutil.rmtree(dest)
    dest.mkdir(parents=True)
    for src, dst in expected:
        _link_or_copy(src, dst, copy_fallback)
    return sum(e.rows for e in base) * factor
