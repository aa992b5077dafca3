"""Walk through one simulation run and the files it writes.

Usage: ``python demos/single_run.py [out_dir]`` (default ``out/single_run``).
The same run is available as
``welfarenet run --config demos/configs/run_small.json --out out/single_run``.
"""

import sys
from collections import Counter
from pathlib import Path

from welfarenet import config, run
from welfarenet.outputs import schema_check, write_run_outputs

here = Path(__file__).parent
out = Path(sys.argv[1] if len(sys.argv) > 1 else "out/single_run")

cfg = config.load(here / "configs" / "run_small.json")
res = run(cfg)
print(f"{res.summary['ticks_run']} ticks, ledger failures: {len(res.ledger_failures)}")
for when in ("initial", "final"):
    snap = res.summary[when]
    print(f"{when:>7}: agents hold {snap['total_agent_wealth']:.1f}, treasury {snap['center_wealth']:.1f}, "
          f"rates {snap['rates']}, min {snap['min_guarantee']:.2f}")

# %% what happened to the projects
outcomes = Counter(e["outcome"] for e in res.events)
solo = sum(1 for e in res.events if e["solo"])
print(f"\n{len(res.events)} projects ({solo} solo):", dict(outcomes))

# %% the controller's trajectory, every 50 ticks
print(f"\n{'tick':>5} {'rate':>6} {'min':>7} {'poor':>5} {'betray':>7} {'black':>6}")
for m in res.metrics[::50]:
    print(f"{m.tick:5d} {m.current_rate:6.2f} {m.current_min_guarantee:7.2f} "
          f"{m.poor_count:5d} {m.betrayal_count:7d} {m.blacklist_size:6d}")

# %% files, then check them against their schemas
paths = write_run_outputs(out, res)
for name, path in paths.items():
    print(schema_check(path))
