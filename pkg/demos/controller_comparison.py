"""Adaptive welfare controller against a frozen policy, seed by seed.

Each seed is run twice with identical networks, endowments and project
draws; only the controller switch differs.  The table reports the tail
betrayal rate of every pair.

Usage: ``python demos/controller_comparison.py [out_dir]``.  The spec file
is small enough to finish in a few minutes on one core; raise ``ticks`` and
the seed list for a firmer answer.
"""

import sys
from pathlib import Path

from welfarenet.sweep import load_spec, paired_comparison, run_sweep

here = Path(__file__).parent
out = Path(sys.argv[1] if len(sys.argv) > 1 else "out/controller_sweep")

spec = load_spec(here / "configs" / "controller_sweep.json")
res = run_sweep(spec, out)
if not res.ok:
    print(res.failure_report())

for stat in ("betrayal_rate_mean", "betrayal_rate_std"):
    cmp = paired_comparison(res.rows, "welfare.controller_enabled", True, False, stat)
    print(f"\n{stat}")
    print(cmp.table("adaptive", "frozen"))
print(f"\naggregate table: {res.aggregate_path}")
