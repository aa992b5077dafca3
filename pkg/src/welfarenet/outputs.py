"""Flat-file outputs and their schemas.

Every CSV uses ``\\n`` line endings, a fixed header and ``repr`` for floats,
so two runs of the same configuration write byte-identical files.

Headers
-------
metrics    one row per tick, columns :data:`METRICS_HEADER`
events     one row per project, columns :data:`EVENTS_HEADER`; ``participants``,
           ``stakes`` and ``traitors`` are ``;``-joined lists aligned by position
edges      ``u,v`` with 0-based node ids and ``u < v``
psweep     ``p,C,L,seeds`` (seed-averaged clustering and path length)
aggregate  ``run_id,seed``, one column per sweep axis, then :data:`AGGREGATE_STATS`
summary    JSON object holding at least :data:`SUMMARY_KEYS`
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .engine import EVENT_FIELDS, METRICS_FIELDS, MetricsRecord, metrics_row

METRICS_HEADER = list(METRICS_FIELDS)
EVENTS_HEADER = list(EVENT_FIELDS)
EDGES_HEADER = ["u", "v"]
PSWEEP_HEADER = ["p", "C", "L", "seeds"]
AGGREGATE_LEAD = ["run_id", "seed"]
AGGREGATE_STATS = [
    "tail_ticks",
    "betrayal_rate_mean",
    "betrayal_rate_std",
    "acceptance_rate_mean",
    "acceptance_rate_std",
]
SUMMARY_KEYS = ["schema_version", "config", "controller", "ticks_run", "totals", "initial", "final", "wall_clock_seconds"]

_INT_METRICS = {
    "tick", "betrayal_count", "projects_attempted", "projects_succeeded",
    "invitations_issued", "invitations_accepted", "blacklist_size", "poor_count",
}
_CONTROLLER_ACTIONS = {"shortfall", "surplus", "hold", "frozen"}
_OUTCOMES = {"success", "failure", "betrayal"}


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def write_rows(path: str | Path, header: Sequence[str], rows: Iterable[dict]) -> int:
    n = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(row[h]) for h in header])
            n += 1
    return n


def write_metrics_csv(path: str | Path, metrics: Iterable[MetricsRecord]) -> int:
    return write_rows(path, METRICS_HEADER, (metrics_row(r) for r in metrics))


def write_events_csv(path: str | Path, events: Iterable[dict]) -> int:
    return write_rows(path, EVENTS_HEADER, events)


def write_summary_json(path: str | Path, summary: dict) -> None:
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def write_psweep_csv(path: str | Path, rows: Iterable[dict]) -> int:
    return write_rows(path, PSWEEP_HEADER, rows)


def write_run_outputs(out_dir: str | Path, result, events: bool = True) -> dict[str, Path]:
    """Write ``metrics.csv``, ``events.csv`` (optional) and ``summary.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"metrics": out / "metrics.csv", "summary": out / "summary.json"}
    write_metrics_csv(paths["metrics"], result.metrics)
    if events:
        paths["events"] = out / "events.csv"
        write_events_csv(paths["events"], result.events)
    write_summary_json(paths["summary"], result.summary)
    return paths


# -- schema checking ---------------------------------------------------------


@dataclass
class SchemaReport:
    path: str
    kind: str | None
    rows: int = 0
    problems: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.kind is not None and not self.problems

    def __str__(self) -> str:
        if self.ok:
            return f"{self.path}: valid {self.kind} file ({self.rows} rows)"
        head = f"{self.path}: " + (f"invalid {self.kind} file" if self.kind else "unrecognised file")
        return "\n".join([head] + [f"  {p}" for p in self.problems])


def _is_int(s: str) -> bool:
    try:
        int(s)
    except ValueError:
        return False
    return True


def _is_float(s: str) -> bool:
    try:
        return not math.isnan(float(s))
    except ValueError:
        return False


def _id_list(s: str) -> list[int] | None:
    if s == "":
        return []
    parts = s.split(";")
    return [int(p) for p in parts] if all(_is_int(p) for p in parts) else None


def _detect(header: list[str]) -> str | None:
    if header == METRICS_HEADER:
        return "metrics"
    if header == EVENTS_HEADER:
        return "events"
    if header == EDGES_HEADER:
        return "edges"
    if header == PSWEEP_HEADER:
        return "psweep"
    n_lead, n_stats = len(AGGREGATE_LEAD), len(AGGREGATE_STATS)
    if len(header) >= n_lead + n_stats and header[:n_lead] == AGGREGATE_LEAD and header[-n_stats:] == AGGREGATE_STATS:
        return "aggregate"
    return None


def _check_metrics(row: dict, bad) -> None:
    for k, v in row.items():
        if k == "controller_action":
            if v not in _CONTROLLER_ACTIONS:
                bad(f"controller_action {v!r} not one of {sorted(_CONTROLLER_ACTIONS)}")
        elif k in _INT_METRICS:
            if not _is_int(v) or int(v) < 0:
                bad(f"{k} must be a non-negative integer, got {v!r}")
        elif not _is_float(v):
            bad(f"{k} must be a number, got {v!r}")
    if _is_int(row["invitations_issued"]) and _is_int(row["invitations_accepted"]):
        if int(row["invitations_accepted"]) > int(row["invitations_issued"]):
            bad("invitations_accepted exceeds invitations_issued")


def _check_event(row: dict, bad) -> None:
    for k in ("tick", "project", "sponsor"):
        if not _is_int(row[k]):
            bad(f"{k} must be an integer, got {row[k]!r}")
    if row["solo"] not in ("0", "1"):
        bad(f"solo must be 0 or 1, got {row['solo']!r}")
    if row["outcome"] not in _OUTCOMES:
        bad(f"outcome {row['outcome']!r} not one of {sorted(_OUTCOMES)}")
    for k in ("risk", "gain_ratio", "loss_ratio"):
        if not _is_float(row[k]):
            bad(f"{k} must be a number, got {row[k]!r}")
    people = _id_list(row["participants"])
    traitors = _id_list(row["traitors"])
    stakes = row["stakes"].split(";") if row["stakes"] else []
    if people is None or not people:
        bad("participants must be a non-empty ;-separated id list")
        return
    if _is_int(row["sponsor"]) and people[0] != int(row["sponsor"]):
        bad("first participant must be the sponsor")
    if len(stakes) != len(people) or not all(_is_float(s) for s in stakes):
        bad("stakes must hold one number per participant")
    if traitors is None:
        bad("traitors must be a ;-separated id list")
    elif not set(traitors) <= set(people):
        bad("traitors must be participants")
    elif bool(traitors) != (row["outcome"] == "betrayal"):
        bad("traitors listed iff the outcome is betrayal")


def _check_edges(row: dict, bad, seen: set) -> None:
    if not (_is_int(row["u"]) and _is_int(row["v"])):
        bad("u and v must be integers")
        return
    u, v = int(row["u"]), int(row["v"])
    if u < 0 or u >= v:
        bad(f"edge ({u}, {v}) must satisfy 0 <= u < v")
    if (u, v) in seen:
        bad(f"duplicate edge ({u}, {v})")
    seen.add((u, v))


def _check_numeric(row: dict, bad, ints: Iterable[str], skip: Iterable[str] = ()) -> None:
    ints, skip = set(ints), set(skip)
    for k, v in row.items():
        if k in skip:
            continue
        ok = _is_int(v) if k in ints else _is_float(v)
        if not ok:
            bad(f"{k} has malformed value {v!r}")


def _check_csv(path: Path, report: SchemaReport) -> None:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            report.problems.append("empty file")
            return
        report.kind = _detect(header)
        if report.kind is None:
            report.problems.append(f"header {header} matches no known schema")
            return
        seen: set = set()
        coords = header[len(AGGREGATE_LEAD):-len(AGGREGATE_STATS)] if report.kind == "aggregate" else []
        for lineno, values in enumerate(reader, start=2):
            report.rows += 1

            def bad(msg: str, lineno=lineno) -> None:
                if len(report.problems) < 50:
                    report.problems.append(f"line {lineno}: {msg}")

            if len(values) != len(header):
                bad(f"expected {len(header)} columns, got {len(values)}")
                continue
            row = dict(zip(header, values))
            if report.kind == "metrics":
                _check_metrics(row, bad)
            elif report.kind == "events":
                _check_event(row, bad)
            elif report.kind == "edges":
                _check_edges(row, bad, seen)
            elif report.kind == "psweep":
                _check_numeric(row, bad, ints=["seeds"])
            else:
                _check_numeric(row, bad, ints=["run_id", "seed", "tail_ticks"], skip=coords)


def _check_json(path: Path, report: SchemaReport) -> None:
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        report.problems.append(f"line {exc.lineno} column {exc.colno}: {exc.msg}")
        return
    report.kind = "summary"
    if not isinstance(data, dict):
        report.problems.append("summary must be a JSON object")
        return
    for key in SUMMARY_KEYS:
        if key not in data:
            report.problems.append(f"missing key {key!r}")
    if data.get("controller") not in (None, "adaptive", "frozen"):
        report.problems.append("controller must be 'adaptive' or 'frozen'")


def schema_check(path: str | Path) -> SchemaReport:
    """Identify a produced file by its header and validate every row."""
    p = Path(path)
    report = SchemaReport(str(p), None)
    if not p.is_file():
        report.problems.append("no such file")
        return report
    if p.suffix == ".json":
        _check_json(p, report)
    else:
        _check_csv(p, report)
    return report
