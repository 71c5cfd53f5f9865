import argparse
import json
import logging
import sys
from typing import Optional, Sequence

from frackin import constants
from frackin.errors import FrackinError
from frackin.runner import default_registry, run, sweep
from frackin.scenario import load_scenario

log = logging.getLogger("frackin.main")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="frackin",
        description="Fractional Liouville, Bogoliubov and kinetic-equation numerics",
    )
    parser.add_argument("--out-dir", help="directory for tables and sidecars")
    parser.add_argument(
        "--threads", type=int, help="worker threads for sweeps (default: config)"
    )
    parser.add_argument(
        "--seed",
        type=int,
        help="seed recorded in the sidecar; every current scenario is deterministic",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    for name, summary in (
        ("run", "run one scenario"),
        ("sweep", "run every point of a scenario's sweep"),
        ("validate", "check a scenario and print it with defaults filled in"),
    ):
        command = commands.add_parser(name, help=summary)
        command.add_argument("config", help="path to the scenario JSON file")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point of the `frackin` command; returns the exit status."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None and args.threads < 1:
        parser.error("--threads must be at least 1")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        parser.error("--seed must be an unsigned 64-bit integer")

    log.debug(f"Debug: {constants.DEBUG_MODE}")
    try:
        scenario = load_scenario(args.config)
        if args.command == "validate":
            print(json.dumps(scenario.to_dict(), indent=2, sort_keys=True))
            return 0

        registry = default_registry()
        if args.command == "run":
            run(scenario, registry, args.out_dir, args.seed)
            return 0

        failures = 0
        for point, outcome in sweep(
            scenario, registry, args.out_dir, args.threads, args.seed
        ):
            if isinstance(outcome, FrackinError):
                log.error(f"Sweep point `{point.name}` failed: {outcome}")
                failures += 1
        log.info(f"Sweep finished with {failures} failed points")
        return 1 if failures else 0
    except FrackinError as e:
        log.error(f"{args.command} {args.config}: {e}")
        return 1
    except OSError as e:
        log.error(f"{args.command} {args.config}: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
