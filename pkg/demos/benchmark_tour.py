"""Generate a dataset, inflate it with hardlinks, and measure a sweep.

The same flow the ``arrowgate`` command line drives, called as a
library: a seeded deterministic dataset, a hardlink inflation that
multiplies logical size without duplicating bytes, and a batch-size
sweep whose report lands as raw CSV, a JSON summary, and per-experiment
series tables.
"""

import tempfile
from pathlib import Path

from arrowgate import GenSpec, RunSpec, generate, inflate, run

root = Path(tempfile.mkdtemp(prefix="bench-tour-"))
data = root / "data"

manifest = generate(GenSpec(
    rows=100_000,
    cols=4,
    rows_per_file=50_000,
    out_dir=str(data),
    value_mask_bits=16,
))
base_bytes = sum(e.bytes for e in manifest.files)
print(f"generated {manifest.total_rows} rows in {len(manifest.files)} files "
      f"({base_bytes} bytes)")

manifest = inflate(data, 3)
print(f"inflated to {manifest.inflation['factor']}x: "
      f"{manifest.logical_rows('acf')} logical rows, still {base_bytes} physical bytes")

report = run(RunSpec(
    experiment="e1",
    data_dir=str(data),
    out_dir=str(root / "report"),
    reps=5,
    batch_sweep=(64, 1024, 16384),
))
print("\nbatch size sweep (medians over 4 kept repetitions):")
for cfg in report.configs:
    stats = cfg.stats()
    print(f"  batch_rows={cfg.extra['batch_rows']:>6}: "
          f"median {stats['median_ns'] / 1e6:8.2f} ms, spread {stats['spread']:.2f}")

print(f"\nreport files: {sorted(p.name for p in (root / 'report').iterdir())}")
