"""Command-line entry point.

Subcommands
-----------
gen-channels   write the channel matrices of every sweep point and seed
run            run the configured scenario and write CSV files
rank-table     effective-channel ranks for the three Rician configurations
convergence    AO iteration and per-element slack traces
mp-check       large-system rates against a Monte Carlo estimate
audit          re-evaluate stored solutions from regenerated channels

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

import argparse
import dataclasses
import sys

from .config import POLICIES, ConfigError, ExperimentConfig, parse_config
from .runner import audit, generate_channel_files, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment file (defaults when omitted)")
    common.add_argument("--seed", type=int, help="run this single seed instead of the configured list")
    common.add_argument("--out", help="output directory (overrides the configured one)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--policy", help=f"comma-separated subset of {','.join(POLICIES)}")
    p = argparse.ArgumentParser(prog="symbiris", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("gen-channels", "write channel matrices as text files"),
        ("run", "run the configured scenario"),
        ("rank-table", "effective-channel rank table"),
        ("convergence", "AO convergence traces"),
        ("mp-check", "large-system rate check"),
        ("audit", "re-evaluate stored solutions"),
    ):
        sub.add_parser(name, parents=[common], help=help_)
    return p


def _load(args):
    cfg = parse_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.seed is not None:
        changes["seeds"] = (args.seed,)
    if args.policy:
        names = tuple(s.strip() for s in args.policy.split(",") if s.strip())
        bad = [n for n in names if n not in POLICIES]
        if bad or not names:
            raise ConfigError(f"unknown policies {bad}; choose from {POLICIES}")
        changes["policies"] = names
    if args.jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    return dataclasses.replace(cfg, **changes)


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = _load(args)
        forced = {"rank-table": "RankTable", "convergence": "Convergence", "mp-check": "MPCheck"}
        if args.command in forced:
            cfg = dataclasses.replace(cfg, scenario=forced[args.command])
            if args.command == "convergence" and not args.policy:
                cfg = dataclasses.replace(cfg, policies=("AO",))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or cfg.output

    if args.command == "gen-channels":
        dirs = generate_channel_files(cfg, out)
        print(f"wrote {len(dirs)} channel sets under {out}")
        return EXIT_OK
    if args.command == "audit":
        try:
            problems = audit(cfg, out)
        except FileNotFoundError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        for msg in problems:
            print(msg)
        print(f"audit: {len(problems)} mismatches")
        return EXIT_OK if not problems else EXIT_NUMERICAL

    result = run_experiment(cfg, out, args.jobs)
    for name, path in result["files"].items():
        print(f"{name}: {path}")
    if result["exit_code"] == EXIT_NUMERICAL:
        print("numerical failure in at least one solve", file=sys.stderr)
    return result["exit_code"]


if __name__ == "__main__":
    sys.exit(main())
