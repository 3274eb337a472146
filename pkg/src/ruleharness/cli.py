"""Command-line entry points: gen-data, run, summarize, oracle-check."""

from __future__ import annotations

import argparse
import sys

from .config import load_config
from .errors import HarnessError


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="harness",
                                     description="Batch prompting-experiment harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen-data", help="write a domain's dataset files")
    p_gen.add_argument("domain", choices=["functions", "colours", "fixture-translation"])
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("--config", required=True)
    mode = p_run.add_mutually_exclusive_group()
    mode.add_argument("--replay", help="serve responses from this recording dir")
    mode.add_argument("--record", help="call live and record responses here")

    p_sum = sub.add_parser("summarize", help="aggregate record files into tables")
    p_sum.add_argument("--records", required=True)
    p_sum.add_argument("--out", required=True)

    sub.add_parser("oracle-check", help="compare metrics against brute-force oracles")

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except HarnessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    if args.command == "gen-data":
        from .runner import gen_data

        counts = gen_data(args.domain, args.seed, args.out)
        for name, count in counts.items():
            print(f"{name}: {count} rows")
        return 0

    if args.command == "run":
        from .runner import run_experiment

        overrides = {}
        if args.replay:
            overrides = {"backend_mode": "replay", "replay_dir": args.replay}
        elif args.record:
            overrides = {"backend_mode": "live", "record_dir": args.record}
        config = load_config(args.config, overrides)
        result = run_experiment(config)
        counts = result.manifest.to_dict()["counts"]
        print(f"records: {result.records_path}")
        for name, count in counts.items():
            print(f"{name}: {count}")
        return 0

    if args.command == "summarize":
        from .summarize import load_records, summarize, write_summary

        summary = summarize(load_records(args.records))
        paths = write_summary(summary, args.out)
        for name, path in paths.items():
            print(f"{name}: {path}")
        return 0

    if args.command == "oracle-check":
        from .oracles import run_oracle_checks

        for name, cases, worst in run_oracle_checks():
            print(f"{name}: {cases} cases, max |diff| = {worst:.3g} ... ok")
        return 0

    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
