"""Benchmark harness: config sweeps, timed runs, reports.

Mechanics are fixed so runs are comparable: every config executes
``reps`` times in one process; the first run is discarded (it absorbs jit
compilation and cold caches) and the remaining reps-1 are reported with
median, mean, p1, p99 and the p99/p1 spread. The timer wraps query
execution only; dataset opening and metadata reads happen before it
starts. Every run's row count is checked against the data manifest and a
mismatch aborts the whole benchmark.

A config is identified by a fingerprint: sha256 over its canonical JSON
(truncated to 12 hex chars). The fingerprint covers only what executes:
data location, format, engine, batch rows, projection, partitions, pool
and boundary latency. A projection naming every column is normalized to
"no projection", so a full-width projected run and a plain full scan
fingerprint identically.

Experiments:

- e1  batch-size sweep over one ACF dataset
- e2  dataset-size sweep (hardlink-scaled copies), ACF
- e3  the same size sweep on CSV, against a naive per-row baseline
- e4  codec sweep (none / fastlz / deflate) on re-encoded variants
- e5  projection-width sweep on a wide table
- scan  one configurable scan, no sweep
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .acf import read_acf_footer, read_row_group
from .bridge import bridge_stats
from .codecs import Codec
from .csvio import CsvDialect, CsvParseError
from .datagen import (
    Manifest,
    generate,
    load_manifest,
    materialize_scaled,
    spec_from_manifest,
    verify_manifest,
)
from .formats import FormatKind
from .instruments import io_stats, memory_gauge
from .reader import count, load, read_config, resolve_pool

EXPERIMENTS = ("e1", "e2", "e3", "e4", "e5", "scan")

E1_BATCH_SWEEP = tuple(2**k for k in range(5, 16))
E2_FACTORS = (1, 2, 4)
E3_FACTORS = (1, 2, 4)
E4_CODECS = ("none", "fastlz", "deflate")
E5_WIDTHS = (1, 2, 5, 10, 25, 50, 100)

RAW_HEADER = "experiment,config,run,elapsed_ns,rows,bytes_read,batch_copies"


class BenchError(Exception):
    pass


@dataclass(frozen=True)
class RunSpec:
    """What to run; unset sweep fields fall back to each experiment's
    default grid."""

    experiment: str
    data_dir: str
    out_dir: str | None = None
    reps: int = 31
    discard_first: bool = True
    batch_rows: int = 8192
    projection: tuple[str, ...] | None = None
    partitions: int | None = None
    pool: int | None = None
    boundary_latency_us: float = 0.0
    format: str | None = None
    batch_sweep: tuple[int, ...] | None = None
    factors: tuple[int, ...] | None = None
    codecs: tuple[str, ...] | None = None
    widths: tuple[int, ...] | None = None
    verify: bool = True

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise BenchError(f"unknown experiment {self.experiment!r}; pick one of {EXPERIMENTS}")
        if self.reps < 2:
            raise BenchError("reps must be >= 2 (the first run is discarded)")
        if self.format is not None and self.format not in ("acf", "csv"):
            raise BenchError("format must be acf or csv")


@dataclass(frozen=True)
class RunRow:
    run: int
    elapsed_ns: int
    rows: int
    bytes_read: int
    batch_copies: int


@dataclass
class ConfigResult:
    experiment: str
    fingerprint: str
    config: dict
    expected_rows: int
    measured: list[RunRow]
    discarded_ns: int | None
    bridge: dict
    extra: dict = field(default_factory=dict)

    @property
    def elapsed(self) -> np.ndarray:
        return np.array([r.elapsed_ns for r in self.measured], np.int64)

    def stats(self) -> dict:
        ns = self.elapsed
        p1, p50, p99 = np.percentile(ns, [1, 50, 99])
        return {
            "median_ns": float(p50),
            "mean_ns": float(ns.mean()),
            "p1_ns": float(p1),
            "p99_ns": float(p99),
            "spread": float(p99 / p1) if p1 > 0 else float("inf"),
        }

    def median_ns(self) -> float:
        return float(np.median(self.elapsed))

    def bytes_read_median(self) -> int:
        return int(np.median([r.bytes_read for r in self.measured]))


@dataclass
class BenchReport:
    spec: dict
    meta: dict
    configs: list[ConfigResult]

    def find(self, **extra) -> ConfigResult:
        for cfg in self.configs:
            if all(cfg.extra.get(k) == v for k, v in extra.items()):
                return cfg
        raise KeyError(f"no config with {extra!r}")


def config_fingerprint(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def filesystem_of(path: str | os.PathLike) -> str:
    """Filesystem type backing ``path`` (longest mount-point match)."""
    target = os.path.realpath(path)
    best = ("", "unknown")
    try:
        with open("/proc/mounts", encoding="utf-8") as f:
            for line in f:
                parts = line.split()
                if len(parts) < 3:
                    continue
                mount, fstype = parts[1], parts[2]
                if (target == mount or target.startswith(mount.rstrip("/") + "/")) and len(mount) > len(best[0]):
                    best = (mount, fstype)
    except OSError:
        pass
    return best[1]


def baseline_naive_csv_count(path: str | os.PathLike, dialect: CsvDialect = CsvDialect()) -> tuple[int, int]:
    """Row-at-a-time CSV count: line strings, per-field split, eager value
    boxing. The anti-pattern the batched path is measured against."""
    t0 = time.perf_counter_ns()
    total = 0
    ncols = None
    line_no = 0
    with open(path, "r", encoding="utf-8", newline="") as f:
        if dialect.has_header:
            f.readline()
            line_no = 1
        for line in f:
            line_no += 1
            fields = line.rstrip("\n").split(dialect.delimiter)
            if ncols is None:
                ncols = len(fields)
            elif len(fields) != ncols:
                raise CsvParseError(
                    f"ragged row at line {line_no}: expected {ncols} fields, got {len(fields)}"
                )
            values: list[object] = []
            for text in fields:
                if not text:
                    values.append(None)
                    continue
                try:
                    values.append(int(text))
                except ValueError:
                    try:
                        values.append(float(text))
                    except ValueError:
                        values.append(text)
            total += 1
    io_stats.add_data(os.path.getsize(path))
    return total, time.perf_counter_ns() - t0


def baseline_eager_scan_count(path: str | os.PathLike) -> tuple[int, int, int]:
    """Materialize every row group of an ACF file before counting.

    Returns (rows, elapsed_ns, peak_batch_bytes); the peak is the whole
    decoded file, which is the point.
    """
    footer = read_acf_footer(path)
    t0 = time.perf_counter_ns()
    batches = []
    for meta in footer.row_groups:
        batch = read_row_group(path, meta, footer.schema)
        memory_gauge.acquire(batch.nbytes)
        batches.append(batch)
    total = sum(b.num_rows for b in batches)
    peak = sum(b.nbytes for b in batches)
    elapsed = time.perf_counter_ns() - t0
    for batch in batches:
        memory_gauge.release(batch.nbytes)
    return total, elapsed, peak


@dataclass
class _Config:
    """One measurable cell: a config dict plus how to execute it."""

    experiment: str
    config: dict
    expected_rows: int
    prepare: Callable[[], object]
    execute: Callable[[object], int]
    extra: dict

    @property
    def fingerprint(self) -> str:
        return config_fingerprint(self.config)


def _config_dict(
    data: str,
    fmt: str,
    engine: str,
    spec: RunSpec,
    projection: tuple[str, ...] | None,
    pool: int,
) -> dict:
    return {
        "data": data,
        "format": fmt,
        "engine": engine,
        "batch_rows": spec.batch_rows,
        "projection": list(projection) if projection is not None else None,
        "partitions": spec.partitions,
        "pool": pool,
        "boundary_latency_us": spec.boundary_latency_us,
    }


def _query_cell(
    root: Path,
    rel_data: str,
    fmt: str,
    spec: RunSpec,
    expected_rows: int,
    experiment: str,
    extra: dict,
    projection: tuple[str, ...] | None = None,
    batch_rows: int | None = None,
) -> _Config:
    pool = resolve_pool(spec.pool)
    cfg = _config_dict(rel_data, fmt, "arrowgate", spec, projection, pool)
    if batch_rows is not None:
        cfg["batch_rows"] = batch_rows

    def prepare() -> object:
        builder = (
            read_config()
            .source_uri(root / rel_data)
            .batch_rows(cfg["batch_rows"])
            .projection(projection)
            .format(FormatKind(fmt))
            .boundary_latency_us(spec.boundary_latency_us)
            .pool(pool)
        )
        if spec.partitions is not None:
            builder.num_partitions(spec.partitions)
        return load(builder.build())

    def execute(reader: object) -> int:
        return count(reader)

    return _Config(experiment, cfg, expected_rows, prepare, execute, extra)


def _naive_cell(
    root: Path,
    rel_data: str,
    spec: RunSpec,
    expected_rows: int,
    experiment: str,
    extra: dict,
) -> _Config:
    pool = resolve_pool(spec.pool)
    cfg = _config_dict(rel_data, "csv", "naive", spec, None, pool)

    def prepare() -> object:
        base = root / rel_data
        files = sorted(p for p in base.rglob("*") if p.is_file())
        if not files:
            raise BenchError(f"no files under {base}")
        return files

    def execute(files: object) -> int:
        return sum(baseline_naive_csv_count(p)[0] for p in files)

    return _Config(experiment, cfg, expected_rows, prepare, execute, extra)


def _pick_format(spec: RunSpec, manifest: Manifest, wanted: str | None) -> str:
    fmt = wanted or spec.format
    if fmt is None:
        have = {e.format for e in manifest.files}
        fmt = "acf" if "acf" in have else "csv"
    if not manifest.files_of(fmt):
        raise BenchError(f"manifest has no {fmt} files for experiment {spec.experiment}")
    return fmt


def _scaled_data(root: Path, manifest: Manifest, fmt: str, factor: int) -> tuple[str, int]:
    """Relative data dir and logical rows for one scale factor."""
    base_rows = sum(e.rows for e in manifest.base_files(fmt))
    if factor == 1 and manifest.inflation["factor"] == 1:
        return fmt, base_rows
    rel = f"scaled/{fmt}-x{factor}"
    rows = materialize_scaled(root, manifest, fmt, factor, root / rel)
    return rel, rows


def _codec_variant(root: Path, manifest: Manifest, codec_name: str) -> tuple[str, int]:
    """Relative ACF dir for a codec, regenerating when absent."""
    base_rows = sum(e.rows for e in manifest.base_files("acf"))
    if manifest.spec["codec"] == codec_name and manifest.inflation["factor"] == 1:
        return "acf", base_rows
    rel = f"codec/{codec_name}"
    variant_root = root / rel
    stamp = variant_root / "manifest.json"
    rebuild = True
    if stamp.is_file():
        try:
            existing = load_manifest(variant_root)
            rebuild = existing.spec["codec"] != codec_name or any(
                not (variant_root / e.path).is_file()
                or (variant_root / e.path).stat().st_size != e.bytes
                for e in existing.files
            )
        except Exception:
            rebuild = True
    if rebuild:
        gen_spec = spec_from_manifest(
            manifest,
            out_dir=str(variant_root),
            formats=("acf",),
            codec=Codec[codec_name.upper()],
        )
        generate(gen_spec)
    return f"{rel}/acf", base_rows


def _build_configs(spec: RunSpec, manifest: Manifest, root: Path) -> list[_Config]:
    exp = spec.experiment
    if exp == "scan":
        fmt = _pick_format(spec, manifest, None)
        rows = manifest.logical_rows(fmt)
        return [
            _query_cell(
                root, fmt, fmt, spec, rows, exp,
                extra={"label": f"scan-{fmt}"},
                projection=spec.projection,
            )
        ]
    if exp == "e1":
        fmt = _pick_format(spec, manifest, "acf")
        rows = manifest.logical_rows(fmt)
        sweep = spec.batch_sweep or E1_BATCH_SWEEP
        return [
            _query_cell(
                root, fmt, fmt, spec, rows, exp,
                extra={"batch_rows": n},
                projection=spec.projection,
                batch_rows=n,
            )
            for n in sweep
        ]
    if exp == "e2":
        fmt = _pick_format(spec, manifest, "acf")
        cells = []
        for factor in spec.factors or E2_FACTORS:
            rel, rows = _scaled_data(root, manifest, fmt, factor)
            cells.append(
                _query_cell(
                    root, rel, fmt, spec, rows, exp,
                    extra={"factor": factor, "rows": rows},
                    projection=spec.projection,
                )
            )
        return cells
    if exp == "e3":
        fmt = _pick_format(spec, manifest, "csv")
        cells = []
        for factor in spec.factors or E3_FACTORS:
            rel, rows = _scaled_data(root, manifest, fmt, factor)
            shared = {"factor": factor, "rows": rows}
            cells.append(
                _query_cell(
                    root, rel, fmt, spec, rows, exp,
                    extra={**shared, "engine": "arrowgate"},
                    projection=spec.projection,
                )
            )
            cells.append(
                _naive_cell(root, rel, spec, rows, exp, extra={**shared, "engine": "naive"})
            )
        return cells
    if exp == "e4":
        _pick_format(spec, manifest, "acf")
        cells = []
        for name in spec.codecs or E4_CODECS:
            if name not in ("none", "fastlz", "deflate"):
                raise BenchError(f"unknown codec {name!r}")
            rel, rows = _codec_variant(root, manifest, name)
            cells.append(
                _query_cell(
                    root, rel, "acf", spec, rows, exp,
                    extra={"codec": name},
                    projection=spec.projection,
                )
            )
        return cells
    if exp == "e5":
        fmt = _pick_format(spec, manifest, "acf")
        rows = manifest.logical_rows(fmt)
        names = list(manifest.schema)
        cells = []
        for width in spec.widths or E5_WIDTHS:
            if width < 1 or width > len(names):
                raise BenchError(
                    f"projection width {width} out of range for a {len(names)}-column dataset"
                )
            # Full width means no projection at all; the fingerprint must
            # match a plain full scan's.
            projection = None if width == len(names) else tuple(names[:width])
            cells.append(
                _query_cell(
                    root, fmt, fmt, spec, rows, exp,
                    extra={"width": width},
                    projection=projection,
                )
            )
        return cells
    raise BenchError(f"unknown experiment {exp!r}")


def _measure(spec: RunSpec, cell: _Config) -> ConfigResult:
    measured: list[RunRow] = []
    discarded_ns = None
    bridge_before = bridge_stats()
    for rep in range(spec.reps):
        prepared = cell.prepare()
        io0 = io_stats.snapshot()
        br0 = bridge_stats()
        t0 = time.perf_counter_ns()
        rows = cell.execute(prepared)
        elapsed = time.perf_counter_ns() - t0
        io1 = io_stats.snapshot()
        br1 = bridge_stats()
        if rows != cell.expected_rows:
            raise BenchError(
                f"correctness check failed for {cell.experiment}/{cell.fingerprint}: "
                f"run {rep} returned {rows} rows, manifest says {cell.expected_rows}"
            )
        row = RunRow(
            run=rep,
            elapsed_ns=elapsed,
            rows=rows,
            bytes_read=io1.data_bytes - io0.data_bytes,
            batch_copies=br1.batch_copies - br0.batch_copies,
        )
        if rep == 0 and spec.discard_first:
            discarded_ns = elapsed
        else:
            measured.append(row)
    bridge_after = bridge_stats()
    bridge = {
        "registered": bridge_after.registered - bridge_before.registered,
        "released": bridge_after.released - bridge_before.released,
        "batch_copies": bridge_after.batch_copies - bridge_before.batch_copies,
    }
    return ConfigResult(
        experiment=cell.experiment,
        fingerprint=cell.fingerprint,
        config=cell.config,
        expected_rows=cell.expected_rows,
        measured=measured,
        discarded_ns=discarded_ns,
        bridge=bridge,
        extra=cell.extra,
    )


def run(spec: RunSpec) -> BenchReport:
    """Verify the data, execute every config and (optionally) emit the
    report to ``spec.out_dir``."""
    root = Path(spec.data_dir)
    manifest = load_manifest(root)
    if spec.verify:
        verify_manifest(root, manifest)
    cells = _build_configs(spec, manifest, root)
    configs = [_measure(spec, cell) for cell in cells]
    meta = {
        "data_dir": str(root.resolve()),
        "filesystem": filesystem_of(root),
        "cpu_count": os.cpu_count() or 1,
        "pool": resolve_pool(spec.pool),
        "reps": spec.reps,
        "discard_first": spec.discard_first,
        "manifest_total_rows": manifest.total_rows,
        "manifest_codec": manifest.spec["codec"],
    }
    spec_doc = {
        "experiment": spec.experiment,
        "reps": spec.reps,
        "batch_rows": spec.batch_rows,
        "projection": list(spec.projection) if spec.projection else None,
        "partitions": spec.partitions,
        "pool": spec.pool,
        "boundary_latency_us": spec.boundary_latency_us,
        "format": spec.format,
    }
    report = BenchReport(spec=spec_doc, meta=meta, configs=configs)
    if spec.out_dir:
        report_emit(report, spec.out_dir)
    return report


_SERIES_KEYS = {
    "e1": ("batch_rows",),
    "e2": ("factor", "rows"),
    "e3": ("factor", "rows", "engine"),
    "e4": ("codec",),
    "e5": ("width",),
    "scan": ("label",),
}


def _series_lines(experiment: str, configs: list[ConfigResult]) -> list[str]:
    keys = _SERIES_KEYS[experiment]
    header = list(keys) + ["fingerprint", "median_ns", "mean_ns", "p1_ns", "p99_ns", "spread", "bytes_read_median"]
    lines = ["\t".join(header)]
    for cfg in configs:
        stats = cfg.stats()
        row = [str(cfg.extra.get(k, "")) for k in keys]
        row += [
            cfg.fingerprint,
            f"{stats['median_ns']:.0f}",
            f"{stats['mean_ns']:.0f}",
            f"{stats['p1_ns']:.0f}",
            f"{stats['p99_ns']:.0f}",
            f"{stats['spread']:.4f}",
            str(cfg.bytes_read_median()),
        ]
        lines.append("\t".join(row))
    if experiment == "e3":
        by_factor: dict[object, dict[str, float]] = {}
        for cfg in configs:
            by_factor.setdefault(cfg.extra["factor"], {})[cfg.extra["engine"]] = cfg.median_ns()
        lines.append("")
        lines.append("\t".join(["factor", "naive_median_ns", "batched_median_ns", "speedup"]))
        for factor in sorted(by_factor):
            pair = by_factor[factor]
            if "naive" in pair and "arrowgate" in pair and pair["arrowgate"] > 0:
                lines.append(
                    "\t".join(
                        [
                            str(factor),
                            f"{pair['naive']:.0f}",
                            f"{pair['arrowgate']:.0f}",
                            f"{pair['naive'] / pair['arrowgate']:.3f}",
                        ]
                    )
                )
    return lines


def report_emit(
    report: BenchReport,
    out_dir: str | os.PathLike,
    formats: Sequence[str] = ("csv", "json", "series"),
) -> list[Path]:
    """Write raw.csv, summary.json and per-experiment series TSVs.

    Emission is a pure function of the report: re-emitting the same report
    produces byte-identical files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if "csv" in formats:
        path = out / "raw.csv"
        lines = [RAW_HEADER]
        for cfg in report.configs:
            for row in cfg.measured:
                lines.append(
                    f"{cfg.experiment},{cfg.fingerprint},{row.run},{row.elapsed_ns},"
                    f"{row.rows},{row.bytes_read},{row.batch_copies}"
                )
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(path)
    if "json" in formats:
        path = out / "summary.json"
        doc = {
            "spec": report.spec,
            "meta": report.meta,
            "configs": [
                {
                    "experiment": cfg.experiment,
                    "fingerprint": cfg.fingerprint,
                    "config": cfg.config,
                    "extra": cfg.extra,
                    "expected_rows": cfg.expected_rows,
                    "runs_measured": len(cfg.measured),
                    "discarded_ns": cfg.discarded_ns,
                    "elapsed_ns": cfg.stats(),
                    "bytes_read_median": cfg.bytes_read_median(),
                    "bridge": cfg.bridge,
                }
                for cfg in report.configs
            ],
        }
        with open(path, "w", encoding="utf-8") as f:
            json.dump(doc, f, indent=2, sort_keys=True)
            f.write("\n")
        written.append(path)
    if "series" in formats:
        by_exp: dict[str, list[ConfigResult]] = {}
        for cfg in report.configs:
            by_exp.setdefault(cfg.experiment, []).append(cfg)
        for experiment, cfgs in sorted(by_exp.items()):
            path = out / f"series-{experiment}.tsv"
            path.write_text("\n".join(_series_lines(experiment, cfgs)) + "\n", encoding="utf-8")
            written.append(path)
    return written
