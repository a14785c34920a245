"""Command-line entry point: ``matchlab gen|solve|experiment|verify|truncate-rank``.

Exit codes: 0 success, 1 invalid input, 2 verification failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import checks
from .da import OrderPolicy, run_dpda, run_hpda
from .experiments import (
    ExperimentConfig,
    ExperimentKind,
    csv_text,
    format_summary,
    run_experiment,
    write_csv,
    write_json,
)
from .market import Market, Side, generate_uniform_profile, load_profile, side_ranks
from .oracle import MAX_ORACLE_SIZE
from .truncation import Strategy, hospital_optimal_rank_via_truncation

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_VERIFY_FAILED = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _seed(text: str) -> int:
    return int(text, 0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="matchlab", description="Random two-sided matching market laboratory.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="write a uniformly random preference profile")
    p.add_argument("--doctors", type=_positive, required=True)
    p.add_argument("--hospitals", type=_positive, required=True)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("solve", help="run deferred acceptance on a profile file")
    p.add_argument("--profile", type=Path, required=True)
    p.add_argument("--side", choices=["doctors", "hospitals"], default="doctors")
    p.add_argument("--trace", action="store_true", help="include the full proposal log")
    p.add_argument("--order", type=OrderPolicy.parse, default=OrderPolicy("queue"), help="queue, stack or random:SEED")
    p.add_argument("--out", type=Path)

    p = sub.add_parser("experiment", help="run a Monte Carlo experiment")
    p.add_argument("kind", choices=[k.value for k in ExperimentKind])
    p.add_argument("--n", type=_positive, required=True, help="number of doctors")
    p.add_argument("--trials", type=_positive, required=True)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out", type=Path, help="report path; the other format is written alongside")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")

    p = sub.add_parser("verify", help="check DA, truncation and the lazy process against the brute-force oracle")
    p.add_argument("--max-n", type=_positive, required=True)
    p.add_argument("--trials", type=_positive, required=True)
    p.add_argument("--seed", type=_seed, required=True)

    p = sub.add_parser("truncate-rank", help="a hospital's best stable rank via list truncation")
    p.add_argument("--profile", type=Path, required=True)
    p.add_argument("--hospital", type=int, required=True)
    p.add_argument("--strategy", choices=[s.value for s in Strategy], default="binary")
    return parser


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def cmd_gen(args) -> int:
    profile = generate_uniform_profile(Market(args.doctors, args.hospitals), args.seed)
    _emit(json.dumps(profile.to_dict()) + "\n", args.out)
    return EXIT_OK


def cmd_solve(args) -> int:
    profile = load_profile(args.profile)
    solver = run_dpda if args.side == "doctors" else run_hpda
    trace = solver(profile, args.order)
    mu = trace.matching
    result = {
        "side": args.side,
        "order": str(args.order),
        "pairs": [list(p) for p in mu.pairs],
        "doctor_ranks": side_ranks(profile, mu, Side.DOCTOR).tolist(),
        "hospital_ranks": side_ranks(profile, mu, Side.HOSPITAL).tolist(),
        "unmatched": {
            "doctors": [d for d, h in enumerate(mu.doctor_match) if h is None],
            "hospitals": [h for h, d in enumerate(mu.hospital_match) if d is None],
        },
        "total_proposals": trace.total_proposals,
    }
    if args.trace:
        result["trace"] = trace.to_dict()
    _emit(json.dumps(result) + "\n", args.out)
    return EXIT_OK


def cmd_experiment(args) -> int:
    config = ExperimentConfig.for_kind(args.kind, args.n, args.trials, args.seed)
    report = run_experiment(config, jobs=args.jobs)
    summary = format_summary(report) + "\n"
    if args.out is None:
        if args.format == "json":
            sys.stdout.write(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
        else:
            sys.stdout.write(csv_text(report))
        sys.stderr.write(summary)
        return EXIT_OK
    csv_path = args.out if args.format == "csv" else args.out.with_suffix(".csv")
    json_path = args.out if args.format == "json" else args.out.with_suffix(".json")
    write_csv(report, csv_path)
    write_json(report, json_path)
    sys.stdout.write(summary)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.max_n > MAX_ORACLE_SIZE:
        raise UsageError(f"--max-n {args.max_n} exceeds the oracle size guard ({MAX_ORACLE_SIZE})")

    def progress(market):
        print(f"ok {market.num_doctors}x{market.num_hospitals} ({args.trials} profiles)", file=sys.stderr)

    failure = checks.verify_suite(args.max_n, args.trials, args.seed, progress=progress)
    if failure:
        print(str(failure))
        return EXIT_VERIFY_FAILED
    print(f"all checks passed (max-n={args.max_n}, trials={args.trials}, seed={args.seed})")
    return EXIT_OK


def cmd_truncate_rank(args) -> int:
    profile = load_profile(args.profile)
    if not 0 <= args.hospital < profile.num_hospitals:
        raise UsageError(f"--hospital {args.hospital} out of range 0..{profile.num_hospitals - 1}")
    result = hospital_optimal_rank_via_truncation(profile, args.hospital, Strategy(args.strategy))
    print(json.dumps(result.to_dict()))
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "solve": cmd_solve,
    "experiment": cmd_experiment,
    "verify": cmd_verify,
    "truncate-rank": cmd_truncate_rank,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except (ValueError, KeyError, IndexError, OSError, json.JSONDecodeError) as exc:
        print(f"matchlab: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
