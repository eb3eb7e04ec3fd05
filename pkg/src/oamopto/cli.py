"""Command-line entry point: ``oamopto run | validate | list-examples``."""

from __future__ import annotations

import argparse
import sys

from .dynamics import SimulationDiverged
from .runner import example_names, example_text, load_scenario, run
from .scenario import ScenarioError, parse_scenario

EXIT_INVALID = 2
EXIT_FAILED = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oamopto", description="Optomechanics with orbital angular momentum.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario file or bundled example")
    p.add_argument("scenario", help="scenario file, or the name of a bundled example")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override run.seed")
    p.add_argument("--override", action="append", metavar="SECTION.KEY=VALUE", default=[],
                   help="override one scenario value (repeatable)")

    p = sub.add_parser("validate", help="check a scenario and report every problem")
    p.add_argument("scenario")
    p.add_argument("--override", action="append", metavar="SECTION.KEY=VALUE", default=[])

    p = sub.add_parser("list-examples", help="list bundled scenarios")
    p.add_argument("--show", metavar="NAME", help="print one example")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-examples":
        if args.show:
            if args.show not in example_names():
                print(f"error: no bundled example named {args.show!r}", file=sys.stderr)
                return EXIT_INVALID
            sys.stdout.write(example_text(args.show))
            return 0
        for name in example_names():
            system = parse_scenario(example_text(name)).system
            print(f"{name:<16} {system}")
        return 0

    try:
        overrides = {}
        for item in args.override:
            key, sep, value = item.partition("=")
            if not sep or "." not in key:
                print(f"error: --override expects SECTION.KEY=VALUE, got {item!r}", file=sys.stderr)
                return EXIT_INVALID
            overrides[key.strip()] = value.strip()
        if getattr(args, "seed", None) is not None:
            overrides["run.seed"] = str(args.seed)
        scenario = load_scenario(args.scenario, overrides)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ScenarioError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INVALID

    if args.command == "validate":
        print(f"ok: {scenario.system} scenario, digest {scenario.digest()[:16]}")
        return 0

    try:
        manifest = run(scenario, args.out)
    except SimulationDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    print(f"wrote {len(manifest.files)} files to {args.out} ({manifest.wall_clock:.2f} s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
