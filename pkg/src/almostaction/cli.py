"""Command-line entry point.

Exit status: 0 solved or verified, 2 config error, 3 count mismatch or gap
violation, 4 labelling obstruction, 5 intertwining obstruction, 6
insufficient data, 7 certificate failure, 8 verify mismatch, 9 not
equicontinuous, 10 lifting failure, 1 anything else.
"""
from __future__ import annotations

import argparse
import sys

from . import scenario
from .errors import AlmostActionError, ConfigError


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default=None, help="directory for report.json, timing.json and CSV tables")
    p.add_argument("--jobs", type=int, default=1, help="threads for per-stage work")
    p.add_argument("--strict", action="store_true", help="treat conditioning warnings as errors")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="almostaction", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run a scenario config (YAML or JSON)")
    p.add_argument("config")
    _common(p)
    p = sub.add_parser("verify", help="recompute a report bundle's tables from its intermediates")
    p.add_argument("bundle", help="report.json or a directory holding it")
    p.add_argument("--tau", type=float, default=None, help="comparison tolerance (default: config tau)")
    for name in scenario.PIPELINES:
        p = sub.add_parser(name, help=f"run the {name} pipeline (built-in preset unless a config is given)")
        p.add_argument("config", nargs="?")
        _common(p)
    return parser


def _emit(text: str) -> None:
    sys.stdout.write(text)
    sys.stdout.flush()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            bad = scenario.verify(scenario.load_bundle(args.bundle), args.tau)
            _emit(scenario.dumps({"verdict": "pass" if not bad else "mismatch",
                                  "mismatches": [m.to_dict() for m in bad]}))
            return scenario.exit_code("verify_mismatch") if bad else 0
        if args.command == "run":
            doc = scenario.load_config(args.config)
        elif args.config:
            doc = dict(scenario.load_config(args.config), pipeline=args.command)
        else:
            doc = scenario.preset(args.command)
        rep = scenario.run(doc, seed=args.seed, jobs=args.jobs, strict=args.strict)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return scenario.exit_code("config")
    except AlmostActionError as exc:
        print(f"{exc.kind}: {exc}", file=sys.stderr)
        return scenario.exit_code(exc.kind)
    if args.out:
        path = rep.write(args.out)
        _emit(scenario.dumps({"verdict": rep.verdict, "report": str(path), "error": rep.error}))
    else:
        _emit(scenario.dumps(rep.bundle()))
    return rep.exit_code


if __name__ == "__main__":
    sys.exit(main())
