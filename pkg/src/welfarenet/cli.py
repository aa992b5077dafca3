"""Command-line entry point.

Exit codes: 0 success, 1 validation error (bad arguments, config or file),
2 runtime error (the simulation or a file write failed).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import config as cfgmod
from .config import ConfigError
from .engine import SimulationError, run
from .outputs import schema_check, write_psweep_csv, write_run_outputs
from .sweep import load_spec, run_sweep
from .topology import (
    SmallWorldParams,
    TopologyError,
    average_path_length,
    clustering_coefficient,
    generate_small_world,
    p_sweep,
    write_edge_csv,
)

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _report_config_error(exc: ConfigError) -> None:
    _err("invalid configuration")
    for path, msg in exc.problems:
        print(f"  {path}: {msg}", file=sys.stderr)


def cmd_generate(args: argparse.Namespace) -> int:
    params = SmallWorldParams(n=args.n, k=args.k, p=args.p, seed=args.seed)
    try:
        params.validate()
        g = generate_small_world(params)
    except TopologyError as exc:
        _err(str(exc))
        return EXIT_VALIDATION
    try:
        write_edge_csv(g, args.out)
    except OSError as exc:
        _err(f"cannot write {args.out}: {exc}")
        return EXIT_RUNTIME
    c = clustering_coefficient(g)
    try:
        apl = repr(average_path_length(g))
    except TopologyError:
        apl = "inf"
    print(f"n={params.n} k={params.k} p={params.p!r} seed={params.seed} C={c!r} L={apl} edges={g.edge_count}")
    return EXIT_OK


def cmd_metrics(args: argparse.Namespace) -> int:
    try:
        for p in args.p:
            SmallWorldParams(n=args.n, k=args.k, p=p).validate()
    except TopologyError as exc:
        _err(str(exc))
        return EXIT_VALIDATION
    try:
        rows = p_sweep(args.n, args.k, args.p, range(args.seeds))
        write_psweep_csv(args.out, rows)
    except (OSError, TopologyError) as exc:
        _err(str(exc))
        return EXIT_RUNTIME
    for r in rows:
        print(f"p={r['p']!r} C={r['C']:.6f} L={r['L']:.6f}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = cfgmod.load(args.config)
    except ConfigError as exc:
        _report_config_error(exc)
        return EXIT_VALIDATION
    except OSError as exc:
        _err(f"cannot read {args.config}: {exc}")
        return EXIT_VALIDATION
    try:
        res = run(cfg, record_events=not args.no_events)
        paths = write_run_outputs(args.out, res, events=not args.no_events)
    except SimulationError as exc:
        _err(f"run aborted at tick {exc.tick}: {exc.cause}")
        return EXIT_RUNTIME
    except OSError as exc:
        _err(f"cannot write outputs to {args.out}: {exc}")
        return EXIT_RUNTIME
    t = res.summary["totals"]
    print(f"ticks={res.summary['ticks_run']} projects={t['projects_attempted']} betrayals={t['betrayals']} "
          f"controller={res.summary['controller']} outputs={','.join(str(p) for p in paths.values())}")
    if res.ledger_failures:
        _err(f"ledger identity failed on {len(res.ledger_failures)} tick(s); first: {res.ledger_failures[0]}")
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    try:
        spec = load_spec(args.spec)
        if args.parallelism is not None:
            spec.parallelism = args.parallelism
            spec.validate()
    except ConfigError as exc:
        _report_config_error(exc)
        return EXIT_VALIDATION
    except OSError as exc:
        _err(f"cannot read {args.spec}: {exc}")
        return EXIT_VALIDATION
    try:
        res = run_sweep(spec, args.out)
    except OSError as exc:
        _err(f"cannot write outputs to {args.out}: {exc}")
        return EXIT_RUNTIME
    print(f"runs={spec.run_count} completed={len(res.rows)} aggregate={res.aggregate_path}")
    if res.failures:
        _err(res.failure_report())
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_schema_check(args: argparse.Namespace) -> int:
    report = schema_check(args.file)
    print(report)
    return EXIT_OK if report.ok else EXIT_VALIDATION


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits 2 by default; usage errors are validation errors
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="welfarenet", description="Welfare-network cooperation simulator.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a small-world edge list and print its C and L")
    g.add_argument("--n", type=int, default=1000)
    g.add_argument("--k", type=int, default=10)
    g.add_argument("--p", type=float, default=0.1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, type=Path)
    g.set_defaults(func=cmd_generate)

    m = sub.add_parser("metrics", help="seed-averaged C(p) and L(p) over a list of p values")
    m.add_argument("--n", type=int, default=1000)
    m.add_argument("--k", type=int, default=10)
    m.add_argument("--p", type=float, nargs="+", default=[0.0, 0.001, 0.01, 0.1, 1.0])
    m.add_argument("--seeds", type=int, default=10, help="average over seeds 0 .. SEEDS-1")
    m.add_argument("--out", required=True, type=Path)
    m.set_defaults(func=cmd_metrics)

    r = sub.add_parser("run", help="run one simulation from a JSON config")
    r.add_argument("--config", required=True, type=Path)
    r.add_argument("--out", required=True, type=Path, help="output directory")
    r.add_argument("--no-events", action="store_true", help="skip the per-project event log")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a parameter sweep from a JSON spec")
    s.add_argument("--spec", required=True, type=Path)
    s.add_argument("--out", required=True, type=Path, help="output directory")
    s.add_argument("--parallelism", type=int, default=None, help=f"worker processes (this machine has {os.cpu_count()})")
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("schema-check", help="validate a file produced by this tool")
    c.add_argument("--file", required=True, type=Path)
    c.set_defaults(func=cmd_schema_check)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
