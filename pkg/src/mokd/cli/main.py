"""``mokd`` command-line entry point.

Exit codes: 0 success, 1 property failure, 2 input or config error,
3 runtime or I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys

from ..errors import MokdError
from .config import ConfigError, load_config

EXIT_OK, EXIT_PROPERTY, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2, 3


def _err(msg: str) -> None:
    print(f"mokd: error: {msg}", file=sys.stderr)


def _parse_losses(text: str):
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"--losses expects two comma-separated values, got {text!r}")
    vals = [float(p) for p in parts]
    if not all(v > 0 for v in vals):
        raise ValueError(f"--losses must be positive, got {text!r}")
    return vals


def cmd_solve(args) -> int:
    from .gradfile import GradientFileError, read_gradient
    from .solve import format_report, solve_report

    try:
        g1 = read_gradient(args.g1)
        g2 = read_gradient(args.g2)
        losses = _parse_losses(args.losses) if args.losses else None
    except (GradientFileError, ValueError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    if g1.size != g2.size:
        _err(f"{args.g2}:1: length {g2.size} does not match {args.g1} (length {g1.size})")
        return EXIT_INPUT
    report = solve_report(g1, g2, losses)
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        print(format_report(report))
    return EXIT_OK


def cmd_train(args) -> int:
    from ..trainer.loop import run

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_INPUT
    trace = args.trace if args.trace is not None else cfg.trace_path
    if trace is None:
        trace = f"trace_{cfg.task}_{cfg.controller.mode}_seed{cfg.seed}.csv"
    try:
        result = run(cfg, trace_path=trace)
    except (MokdError, OSError) as exc:
        _err(f"run aborted: {exc}")
        return EXIT_RUNTIME
    print(json.dumps(result.summary, indent=2))
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import bench_grid, write_bench

    if args.angles < 2 or args.ratios < 2:
        _err("--angles and --ratios must both be >= 2")
        return EXIT_INPUT
    rows = bench_grid(args.angles, args.ratios)
    try:
        write_bench(args.out, rows)
    except OSError as exc:
        _err(f"cannot write {args.out}: {exc.strerror or exc}")
        return EXIT_RUNTIME
    opp = sum(r["fixed_opposes"] for r in rows)
    print(f"wrote {len(rows)} cells to {args.out}; fixed weights oppose a gradient in {opp}, "
          f"min-norm weights in {sum(r['mokd_opposes'] for r in rows)}")
    return EXIT_OK


def cmd_check(args) -> int:
    from .checks import run_checks

    results = run_checks(only=set(args.suite) if args.suite else None)
    failed = None
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'} {r.name}: {r.passed}/{r.total}")
        if not r.ok and failed is None:
            failed = r
    if failed is not None:
        print(f"first counterexample ({failed.name}):")
        print(json.dumps(failed.counterexample, default=float))
        return EXIT_PROPERTY
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mokd", description="Min-norm task weighting for distillation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="weights for two gradients read from text files")
    p.add_argument("--g1", required=True, help="distillation gradient file")
    p.add_argument("--g2", required=True, help="task gradient file")
    p.add_argument("--losses", help="'L1,L2': weight the log-gradients instead")
    p.add_argument("--json", action="store_true", help="print a JSON object")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("train", help="run an experiment from a JSON config")
    p.add_argument("--config", required=True, help="config path or bundled config name")
    p.add_argument("--trace", help="CSV trace path (overrides the config)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bench", help="sweep conflict angle and norm ratio")
    p.add_argument("--angles", type=int, required=True)
    p.add_argument("--ratios", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("check", help="run the seeded property suites")
    p.add_argument("--suite", action="append", help="run only the named suite (repeatable)")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
