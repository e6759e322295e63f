"""Command line entry point.

    bench run [--config FILE] [-o key=value ...]
    bench ref [--config FILE] [-o key=value ...]
    bench verify
"""
from __future__ import annotations

import argparse
import os
import sys

from .bench import (
    build_config,
    build_problem,
    compute_reference_optimum,
    parse_config,
    run_bench,
)


def _load_config(args) -> "BenchConfig":  # noqa: F821
    mapping = parse_config(args.config) if args.config else {}
    return build_config(mapping, args.override)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="bench",
        description="Convergence benchmarks for sparse composite solvers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the configured solver comparison")
    ref_p = sub.add_parser("ref", help="compute/refresh the reference optimum")
    for p in (run_p, ref_p):
        p.add_argument("--config", default=None,
                       help="flat key = value config file")
        p.add_argument("-o", "--override", action="append", default=[],
                       metavar="KEY=VALUE", help="override one config field")
    sub.add_parser("verify", help="run built-in self checks")

    args = parser.parse_args(argv)
    if args.command == "verify":
        from .verify import run_verify

        return 0 if run_verify() else 1

    try:
        cfg = _load_config(args)
        if args.command == "ref":
            problem, part = build_problem(cfg)
            f_star = compute_reference_optimum(
                problem, part, cfg, os.path.join(cfg.out_dir, "cache"))
            print(f"reference optimum: {f_star:.12g}")
            return 0
        run_bench(cfg)
    except (OSError, ValueError) as exc:
        print(f"bench: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
