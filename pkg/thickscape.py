import argparse
import asyncio
import logging
import sys
from logging import getLogger
from pathlib import Path

import config
from app_main import COMMANDS, run_command
from emit_outputs import emit_outputs
from errors import ScenarioParseError, ThickscapeError, UsageError
from models import RunOptions
from scenario import parse_scenario

_LOGGER = getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# Command-line convention names and the curvature-gap formula each selects.
CONVENTION_FLAGS = {"paper": "ratio", "standard": "product"}


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else getattr(logging, config.LOG_LEVEL, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
        handlers=[logging.StreamHandler(sys.stdout)],
        force=True,
    )


def _parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="thickscape",
        description="Audit and analyze the thickness return map of a scenario and write deterministic artifacts.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--scenario", dest="scenario_path", type=Path, required=True)
    parser.add_argument("--out", dest="out_dir", type=Path, required=True)
    parser.add_argument("--seeds", type=int, help="number of seeds, overriding the scenario")
    parser.add_argument("--rng-seed", dest="rng_seed", type=int, help="draw random seeds from this generator seed")
    parser.add_argument("--max-steps", dest="max_steps", type=int)
    parser.add_argument("--convention", choices=CONVENTION_FLAGS, default="paper")
    parser.add_argument("--verbose", action="store_true")
    return parser.parse_args(argv)


async def _run(args: argparse.Namespace) -> int:
    try:
        text = args.scenario_path.read_text(encoding="utf-8")
    except OSError as exc:
        _LOGGER.error("cannot read scenario %s: %s", args.scenario_path, exc)
        return EXIT_USAGE
    try:
        scenario = parse_scenario(text)
    except ScenarioParseError as exc:
        _LOGGER.error("scenario %s: %s", args.scenario_path, exc)
        return EXIT_USAGE

    if args.seeds is not None and args.seeds < 1:
        _LOGGER.error("--seeds must be at least 1, got %d", args.seeds)
        return EXIT_USAGE
    options = RunOptions(seeds=args.seeds, rng_seed=args.rng_seed, convention=CONVENTION_FLAGS[args.convention], max_steps=args.max_steps)
    try:
        bundle = await run_command(scenario, args.command, options)
    except UsageError as exc:
        _LOGGER.error("%s on scenario %s: %s", args.command, scenario.name, exc)
        return EXIT_USAGE
    except ThickscapeError as exc:
        _LOGGER.error("%s on scenario %s failed: %s: %s", args.command, scenario.name, type(exc).__name__, exc)
        return EXIT_FAILURE

    try:
        emit_outputs(bundle, args.out_dir)
    except OSError as exc:
        _LOGGER.error("cannot write artifacts to %s: %s", args.out_dir, exc)
        return EXIT_FAILURE
    return EXIT_FAILURE if bundle.exit_status else EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _parse_args(argv)
    _configure_logging(args.verbose)
    return asyncio.run(_run(args))


if __name__ == "__main__":
    raise SystemExit(main())
