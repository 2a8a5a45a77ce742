"""Command-line runner: ``dwb <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Callable, Dict

from dwbsim import __version__, experiments, paths, selftest
from dwbsim.config_io import load_config
from dwbsim.config_merge import merge_config_with_args
from dwbsim.errors import EXIT_IO, EXIT_OK, DwbError
from dwbsim.models import ScenarioConfig
from dwbsim.validate import validate_scenario

RUNNERS: Dict[str, Callable[[ScenarioConfig, Path], Dict[str, Path]]] = {
    "array-response": experiments.run_array_response,
    "power-sweep": experiments.run_power_sweep,
    "deceive": experiments.run_deception,
    "deceive-batch": experiments.run_deception_trials,
    "solve": experiments.run_single_solve,
}


def _common_parser(top_level: bool) -> argparse.ArgumentParser:
    """Shared flags; accepted before or after the command name.

    The per-command copy uses SUPPRESS defaults so a flag given before the
    command is not reset by the subparser.
    """
    common = argparse.ArgumentParser(add_help=False)
    value = None if top_level else argparse.SUPPRESS
    flag = False if top_level else argparse.SUPPRESS
    common.add_argument("--config", type=Path, default=value, help="Scenario JSON file.")
    common.add_argument("--seed", type=int, default=value, help="Master seed (overrides config).")
    common.add_argument("--out-dir", default=value, help="Output directory (default data/runs/<cmd>).")
    common.add_argument("--trials", type=int, default=value, help="Monte-Carlo trial count.")
    common.add_argument(
        "--full",
        action="store_true",
        default=flag,
        help="Use the full 1000-trial count instead of the desk-scale one.",
    )
    common.add_argument("--workers", type=int, default=value, help="Parallel trial workers.")
    level = common.add_mutually_exclusive_group()
    level.add_argument("--quiet", action="store_true", default=flag, help="Only log warnings and errors.")
    level.add_argument("--verbose", action="store_true", default=flag, help="Log per-trial debug lines.")
    return common


def _build_parser() -> argparse.ArgumentParser:
    common = _common_parser(top_level=False)
    parser = argparse.ArgumentParser(
        prog="dwb",
        description="Deceptive wireless beamforming simulator.",
        parents=[_common_parser(top_level=True)],
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser(
        "array-response", parents=[common], help="DWB vs nulling beampatterns, PSL and null depth."
    )
    sub.add_parser("power-sweep", parents=[common], help="Paired DWB/nulling power Monte-Carlo sweep.")
    deceive = sub.add_parser(
        "deceive", parents=[common], help="End-to-end deception run against the eavesdropper radar."
    )
    deceive.add_argument(
        "--batch", action="store_true", help="Random targets and spoofs over --trials runs."
    )
    sub.add_parser("solve", parents=[common], help="Single DWB solve; dumps S, X_e and diagnostics.")
    sub.add_parser("selftest", parents=[common], help="Quick numerical self check.")
    return parser


def _command_key(args: argparse.Namespace) -> str:
    if args.command == "deceive" and getattr(args, "batch", False):
        return "deceive-batch"
    return args.command


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    level = logging.WARNING if args.quiet else logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(message)s", force=True)

    if args.command == "selftest":
        return selftest.main()

    command = _command_key(args)
    started = time.perf_counter()
    try:
        config = merge_config_with_args(load_config(args.config), args)
        validate_scenario(config, command)
        out_dir = paths.resolve_output_dir(args.out_dir, config.output_dir, command)
        logging.info(
            "RUN cmd=%s trials=%d seed=%d workers=%d out=%s",
            command,
            config.n_trials,
            config.seed,
            config.workers,
            out_dir,
        )
        written = RUNNERS[command](config, out_dir)
    except DwbError as exc:
        logging.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code
    except OSError as exc:
        logging.error("I/O error: %s", exc)
        return EXIT_IO

    for kind, path in written.items():
        logging.info("wrote %s %s", kind, path)
    logging.info("DONE cmd=%s elapsed=%.2fs", command, time.perf_counter() - started)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
