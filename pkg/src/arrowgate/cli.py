"""Command line front end: gen, inflate, run.

``gen`` writes a deterministic dataset plus manifest, ``inflate`` scales
it in place with hardlinks, ``run`` executes one experiment against it
and emits a report. ``run`` exits 0 only when every run's row count
matched the manifest.
"""

from __future__ import annotations

import argparse
import sys

from .bench import BenchError, RunSpec, run as bench_run
from .codecs import Codec
from .datagen import DatagenError, GenSpec, generate, inflate


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x != "")
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated integer list, got {text!r}") from None


def _str_list(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="arrowgate", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a dataset and its manifest")
    gen.add_argument("--rows", type=int, required=True, help="total rows")
    gen.add_argument("--cols", type=int, default=4, help="int64 columns (default 4)")
    gen.add_argument("--rows-per-file", type=int, required=True)
    gen.add_argument("--formats", type=_str_list, default=("acf",), help="comma list: acf,csv")
    gen.add_argument("--codec", choices=["none", "fastlz", "deflate"], default="none")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output directory")
    gen.add_argument("--rows-per-group", type=int, default=65536)
    gen.add_argument("--value-mask-bits", type=int, default=64,
                     help="keep the top N bits of each draw (small = compressible)")

    inf = sub.add_parser("inflate", help="add hardlinked copies to scale a dataset")
    inf.add_argument("--dir", required=True)
    inf.add_argument("--factor", type=int, required=True, help="extra copies per base file")
    inf.add_argument("--copy-fallback", action="store_true",
                     help="copy bytes when the filesystem refuses hardlinks")

    runp = sub.add_parser("run", help="run one experiment against a generated dataset")
    runp.add_argument("--exp", required=True, choices=["e1", "e2", "e3", "e4", "e5", "scan"])
    runp.add_argument("--data", required=True, help="directory created by gen")
    runp.add_argument("--reps", type=int, default=31)
    runp.add_argument("--batch-rows", type=int, default=8192)
    runp.add_argument("--projection", type=_str_list, default=None, help="comma list of columns")
    runp.add_argument("--partitions", type=int, default=None)
    runp.add_argument("--pool", type=int, default=None,
                      help="worker pool width (default: ARROWGATE_POOL, then CPU count)")
    runp.add_argument("--boundary-latency-us", type=float, default=0.0)
    runp.add_argument("--out", default=None, help="report directory")
    runp.add_argument("--format", choices=["acf", "csv"], default=None)
    runp.add_argument("--batch-sweep", type=_int_list, default=None, help="e1 batch sizes")
    runp.add_argument("--factors", type=_int_list, default=None, help="e2/e3 scale factors")
    runp.add_argument("--codecs", type=_str_list, default=None, help="e4 codec list")
    runp.add_argument("--widths", type=_int_list, default=None, help="e5 projection widths")
    return parser


def _cmd_gen(args: argparse.Namespace) -> int:
    spec = GenSpec(
        rows=args.rows,
        cols=args.cols,
        rows_per_file=args.rows_per_file,
        out_dir=args.out,
        formats=tuple(args.formats),
        codec=Codec[args.codec.upper()],
        seed=args.seed,
        rows_per_group=args.rows_per_group,
        value_mask_bits=args.value_mask_bits,
    )
    manifest = generate(spec)
    files = len(manifest.files)
    print(f"wrote {manifest.total_rows} rows x {len(manifest.schema)} cols "
          f"as {files} file(s) under {args.out}")
    return 0


def _cmd_inflate(args: argparse.Namespace) -> int:
    manifest = inflate(args.dir, args.factor, args.copy_fallback)
    how = "copied" if manifest.inflation.get("copied") else "hardlinked"
    print(f"dataset now {manifest.inflation['factor']}x its base size ({how}); "
          f"{len(manifest.files)} files in the manifest")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    spec = RunSpec(
        experiment=args.exp,
        data_dir=args.data,
        out_dir=args.out,
        reps=args.reps,
        batch_rows=args.batch_rows,
        projection=args.projection,
        partitions=args.partitions,
        pool=args.pool,
        boundary_latency_us=args.boundary_latency_us,
        format=args.format,
        batch_sweep=args.batch_sweep,
        factors=args.factors,
        codecs=args.codecs,
        widths=args.widths,
    )
    report = bench_run(spec)
    for cfg in report.configs:
        stats = cfg.stats()
        label = ", ".join(f"{k}={v}" for k, v in sorted(cfg.extra.items()))
        print(
            f"{cfg.experiment} [{cfg.fingerprint}] {label}: "
            f"median {stats['median_ns'] / 1e6:.3f} ms, "
            f"p1 {stats['p1_ns'] / 1e6:.3f}, p99 {stats['p99_ns'] / 1e6:.3f}, "
            f"spread {stats['spread']:.2f}, rows {cfg.expected_rows}"
        )
    if args.out:
        print(f"report written to {args.out}")
    print("all correctness checks passed")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            return _cmd_gen(args)
        if args.command == "inflate":
            return _cmd_inflate(args)
        return _cmd_run(args)
    except (BenchError, DatagenError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
