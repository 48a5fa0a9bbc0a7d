"""Command-line entry point: `corsim run ...`."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .env import make_params
from .harness import ConfigError, TrialConfig, emit, run_ensemble


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corsim",
        description="Deterministic lock-step simulator for Byzantine-tolerant "
        "self-stabilizing consensus object recycling",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="execute seeded trials and emit a CSV")
    run.add_argument("--config", help="flat JSON config file; CLI flags override it")
    run.add_argument("--n", type=int)
    run.add_argument("--t", type=int)
    run.add_argument("--log-size", type=int, dest="log_size")
    run.add_argument("--index-num", type=int, dest="index_num")
    run.add_argument("--kappa", type=int)
    run.add_argument("--rounds", type=int)
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument(
        "--adversary",
        choices=["silent", "random", "equivocate", "worst-sig", "worst-eig"],
    )
    run.add_argument("--inject", choices=["none", "full", "targeted"])
    run.add_argument("--core", choices=["stub", "mmr-lite"])
    run.add_argument("--dmax", type=int)
    run.add_argument("--out", help="CSV output path")
    run.add_argument("--trace", action="store_true", help="write per-trial trace files")
    run.add_argument(
        "--strict",
        action="store_true",
        help="nonzero exit on any post-stabilization violation or unstabilized trial",
    )
    return parser


DEFAULTS = {
    "n": 4,
    "t": 1,
    "log_size": 3,
    "index_num": 8,
    "kappa": None,
    "rounds": 250,
    "trials": 1,
    "seed": 1,
    "adversary": "silent",
    "inject": "none",
    "core": "stub",
    "dmax": 3,
    "out": None,
}


def resolve_options(args: argparse.Namespace) -> dict:
    options = dict(DEFAULTS)
    if args.config:
        with open(args.config) as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise ConfigError([f"unknown config keys: {sorted(unknown)}"])
        options.update(loaded)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            options[key] = value
    return options


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        options = resolve_options(args)
        params = make_params(
            n=options["n"],
            t=options["t"],
            log_size=options["log_size"],
            index_num=options["index_num"],
            kappa=options["kappa"],
            seed=options["seed"],
        )
        config = TrialConfig(
            params=params,
            rounds=options["rounds"],
            adversary=options["adversary"].replace("-", "_"),
            inject=options["inject"],
            core=options["core"],
            dmax=options["dmax"],
        )
        results = run_ensemble(config, options["trials"])
    except ConfigError as err:
        print("invalid configuration:", file=sys.stderr)
        for violation in err.violations:
            print(f"  - {violation}", file=sys.stderr)
        return 2

    trace_dir = None
    if args.trace:
        if options["out"]:
            trace_dir = os.path.dirname(options["out"]) or "."
        else:
            trace_dir = "."
    try:
        summary, exit_code = emit(
            results, options["out"], strict=args.strict, trace_dir=trace_dir
        )
    except OSError as err:
        print(f"cannot write output: {err}", file=sys.stderr)
        return 2
    print(summary)
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
