"""Parameter sweeps: Cartesian product of axes times seeds, run in a process pool.

A sweep spec is a JSON object::

    {
      "schema_version": 1,
      "base": { ...a run config... },
      "axes": [{"path": "welfare.controller_enabled", "values": [true, false]}],
      "seeds": [0, 1, 2],
      "parallelism": 2,
      "tail_ticks": 1000,
      "max_runs": 10000,
      "per_run_outputs": "metrics"
    }

``tail_ticks`` defaults to the last half of the run.  ``per_run_outputs`` is
``"none"``, ``"metrics"`` (metrics CSV and summary JSON) or ``"all"`` (adds
the event log).  Runs are numbered in spec order, seeds varying fastest.
"""

from __future__ import annotations

import itertools
import json
import logging
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

import numpy as np

from . import config as cfgmod
from .config import ConfigError, RunConfig
from .engine import MetricsRecord, run
from .outputs import AGGREGATE_LEAD, AGGREGATE_STATS, write_rows, write_run_outputs

log = logging.getLogger(__name__)

DEFAULT_MAX_RUNS = 10_000
PER_RUN_CHOICES = ("none", "metrics", "all")


@dataclass
class Axis:
    path: str
    values: list


@dataclass
class SweepSpec:
    base: RunConfig
    axes: list[Axis]
    seeds: list[int]
    parallelism: int = 1
    tail_ticks: int | None = None
    max_runs: int = DEFAULT_MAX_RUNS
    per_run_outputs: str = "metrics"

    @property
    def run_count(self) -> int:
        return int(np.prod([len(a.values) for a in self.axes], dtype=np.int64)) * len(self.seeds)

    def validate(self) -> None:
        pr: list[tuple[str, str]] = []
        if not self.seeds:
            pr.append(("seeds", "at least one seed is required"))
        if len(set(self.seeds)) != len(self.seeds):
            pr.append(("seeds", "seeds must be distinct"))
        if self.parallelism < 1:
            pr.append(("parallelism", f"must be a positive integer, got {self.parallelism}"))
        if self.per_run_outputs not in PER_RUN_CHOICES:
            pr.append(("per_run_outputs", f"must be one of {list(PER_RUN_CHOICES)}"))
        if self.max_runs < 1:
            pr.append(("max_runs", "must be >= 1"))
        elif self.run_count > self.max_runs:
            pr.append(("axes", f"sweep expands to {self.run_count} runs, above max_runs={self.max_runs}"))
        for i, axis in enumerate(self.axes):
            if not axis.values:
                pr.append((f"axes[{i}].values", "must not be empty"))
            for v in axis.values:
                try:
                    self.base.replace(axis.path, v)
                except ConfigError as exc:
                    pr.extend((f"axes[{i}] ({axis.path}={v!r}) {p}", m) for p, m in exc.problems)
        if not pr and self.tail_ticks is not None:
            if self.tail_ticks < 1:
                pr.append(("tail_ticks", "must be >= 1"))
            for coords in self.coordinates():
                ticks = self.config_for(coords, self.seeds[0]).ticks
                if self.tail_ticks > ticks:
                    pr.append(("tail_ticks", f"tail window {self.tail_ticks} exceeds run length {ticks} ticks"))
                    break
        if pr:
            raise ConfigError(pr)

    def coordinates(self) -> Iterator[tuple]:
        return itertools.product(*(a.values for a in self.axes))

    def config_for(self, coords: tuple, seed: int) -> RunConfig:
        raw = self.base.to_dict()
        for axis, v in zip(self.axes, coords):
            cfgmod.set_path(raw, axis.path, v)
        raw["seed"] = seed
        return cfgmod.from_dict(raw)

    def jobs(self) -> Iterator[tuple[int, tuple, int]]:
        rid = 0
        for coords in self.coordinates():
            for seed in self.seeds:
                yield rid, coords, seed
                rid += 1


def spec_from_dict(raw: Any) -> SweepSpec:
    if not isinstance(raw, dict):
        raise ConfigError([("<root>", "sweep spec must be a JSON object")])
    known = {"schema_version", "base", "axes", "seeds", "parallelism", "tail_ticks", "max_runs", "per_run_outputs"}
    pr = [(k, "unknown field") for k in raw if k not in known]
    for key in ("base", "seeds"):
        if key not in raw:
            pr.append((key, "required field is missing"))
    if raw.get("schema_version", cfgmod.SCHEMA_VERSION) != cfgmod.SCHEMA_VERSION:
        pr.append(("schema_version", f"unsupported version, expected {cfgmod.SCHEMA_VERSION}"))
    if pr:
        raise ConfigError(pr)
    try:
        base = cfgmod.from_dict(raw["base"])
    except ConfigError as exc:
        raise ConfigError([(f"base.{p}", m) for p, m in exc.problems]) from None
    axes = []
    for i, a in enumerate(raw.get("axes", [])):
        if not isinstance(a, dict) or not isinstance(a.get("path"), str) or not isinstance(a.get("values"), list):
            pr.append((f"axes[{i}]", "expected an object with 'path' (string) and 'values' (list)"))
            continue
        axes.append(Axis(a["path"], list(a["values"])))
    seeds = raw["seeds"]
    if not isinstance(seeds, list) or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        pr.append(("seeds", "expected a list of integers"))
    for key in ("parallelism", "tail_ticks", "max_runs"):
        v = raw.get(key)
        if v is not None and (isinstance(v, bool) or not isinstance(v, int)):
            pr.append((key, f"expected an integer, got {v!r}"))
    if pr:
        raise ConfigError(pr)
    spec = SweepSpec(
        base=base,
        axes=axes,
        seeds=list(seeds),
        parallelism=raw.get("parallelism", 1),
        tail_ticks=raw.get("tail_ticks"),
        max_runs=raw.get("max_runs", DEFAULT_MAX_RUNS),
        per_run_outputs=raw.get("per_run_outputs", "metrics"),
    )
    spec.validate()
    return spec


def load_spec(path: str | Path) -> SweepSpec:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError([(f"line {exc.lineno} column {exc.colno}", exc.msg)]) from None
    return spec_from_dict(raw)


def tail_stats(metrics: list[MetricsRecord], tail_ticks: int | None = None) -> dict:
    """Mean and population std of the per-tick rates over the last ``tail_ticks`` ticks."""
    if tail_ticks is None:
        tail_ticks = max(len(metrics) // 2, 1)
    if tail_ticks > len(metrics):
        raise ValueError(f"tail window {tail_ticks} exceeds run length {len(metrics)} ticks")
    tail = metrics[len(metrics) - tail_ticks:]
    br = np.array([r.betrayal_rate for r in tail])
    ar = np.array([r.acceptance_rate for r in tail])
    return {
        "tail_ticks": tail_ticks,
        "betrayal_rate_mean": float(br.mean()),
        "betrayal_rate_std": float(br.std()),
        "acceptance_rate_mean": float(ar.mean()),
        "acceptance_rate_std": float(ar.std()),
    }


def _encode(v: Any) -> str:
    return json.dumps(v)


def _execute(job: dict) -> dict:
    cfg = cfgmod.from_dict(job["config"])
    mode = job["per_run_outputs"]
    res = run(cfg, record_events=mode == "all", check_ledger=False)
    if job["out_dir"] is not None and mode != "none":
        write_run_outputs(job["out_dir"], res, events=mode == "all")
    row = {"run_id": job["run_id"], "seed": cfg.seed}
    row.update(job["coords"])
    row.update(tail_stats(res.metrics, job["tail_ticks"]))
    return row


@dataclass
class SweepResult:
    header: list[str]
    rows: list[dict]
    failures: list[tuple[int, str]] = field(default_factory=list)
    aggregate_path: Path | None = None

    @property
    def ok(self) -> bool:
        return not self.failures

    def failure_report(self) -> str:
        if not self.failures:
            return "all runs completed"
        lines = [f"{len(self.failures)} run(s) failed: " + ", ".join(str(r) for r, _ in self.failures)]
        lines += [f"  run {r}: {msg.strip().splitlines()[-1]}" for r, msg in self.failures]
        return "\n".join(lines)


def run_sweep(spec: SweepSpec, out_dir: str | Path | None = None, parallelism: int | None = None) -> SweepResult:
    """Execute every run of ``spec``; completed runs are aggregated even if others fail."""
    spec.validate()
    workers = parallelism or spec.parallelism
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    header = AGGREGATE_LEAD + [a.path for a in spec.axes] + AGGREGATE_STATS
    jobs = []
    for rid, coords, seed in spec.jobs():
        jobs.append({
            "run_id": rid,
            "coords": {a.path: _encode(v) for a, v in zip(spec.axes, coords)},
            "config": spec.config_for(coords, seed).to_dict(),
            "tail_ticks": spec.tail_ticks,
            "per_run_outputs": spec.per_run_outputs,
            "out_dir": None if out is None else str(out / "runs" / f"run_{rid:05d}"),
        })
    rows: list[dict] = []
    failures: list[tuple[int, str]] = []

    def collect(job: dict, fn) -> None:
        try:
            rows.append(fn())
        except Exception:  # a failed run must not sink the sweep
            msg = traceback.format_exc()
            log.warning("run %d failed: %s", job["run_id"], msg.strip().splitlines()[-1])
            failures.append((job["run_id"], msg))

    if workers <= 1:
        for job in jobs:
            collect(job, lambda job=job: _execute(job))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [(job, pool.submit(_execute, job)) for job in jobs]
            for job, fut in futures:
                collect(job, fut.result)
    rows.sort(key=lambda r: r["run_id"])
    failures.sort()
    result = SweepResult(header, rows, failures)
    if out is not None:
        result.aggregate_path = out / "aggregate.csv"
        write_rows(result.aggregate_path, header, rows)
        report = {"runs": len(jobs), "completed": len(rows), "failed": [r for r, _ in failures],
                  "errors": {str(r): m for r, m in failures}}
        (out / "sweep_report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return result


@dataclass
class PairedComparison:
    """Seed-by-seed comparison of one statistic between two axis values."""

    statistic: str
    pairs: list[tuple[int, float, float]]

    @property
    def wins(self) -> int:
        return sum(a < b for _, a, b in self.pairs)

    def table(self, label_a: str = "a", label_b: str = "b") -> str:
        lines = [f"{'seed':>6} {label_a:>14} {label_b:>14}  lower"]
        for seed, a, b in self.pairs:
            lines.append(f"{seed:>6} {a:>14.6g} {b:>14.6g}  {'yes' if a < b else 'no'}")
        lines.append(f"{self.statistic}: {label_a} lower in {self.wins}/{len(self.pairs)} seeds")
        return "\n".join(lines)


def paired_comparison(rows: list[dict], path: str, value_a: Any, value_b: Any, statistic: str) -> PairedComparison:
    """Pair rows that differ only in ``path`` (``value_a`` vs ``value_b``) by seed."""
    ea, eb = _encode(value_a), _encode(value_b)
    by_seed: dict[int, dict] = {}
    for r in rows:
        if r[path] in (ea, eb):
            by_seed.setdefault(r["seed"], {})[r[path]] = float(r[statistic])
    pairs = [(s, d[ea], d[eb]) for s, d in sorted(by_seed.items()) if ea in d and eb in d]
    return PairedComparison(statistic, pairs)
