#!/usr/bin/env python
# License: BSD 3 clause
"""
Runs DMCL experiments from the command line.

Each sub-command runs one task; ``run`` runs the tasks listed in the
configuration file. Exit codes: 0 on success, 2 for configuration
errors, 3 for budget errors and 4 for failed numerical checks.
"""

import logging
import sys
from argparse import ArgumentDefaultsHelpFormatter, ArgumentParser
from typing import List, Optional

from dmcl.config import ExperimentConfig, default_config, parse_config_file
from dmcl.experiments import run_configuration
from dmcl.utils.constants import (
    EXIT_BUDGET_ERROR,
    EXIT_CONFIG_ERROR,
    EXIT_NUMERICAL_ERROR,
    EXIT_OK,
    VALID_BACKENDS,
    VALID_TASKS,
)
from dmcl.utils.exceptions import (
    BudgetError,
    ConfigError,
    ConvergenceError,
    DriftError,
    NumericalAssertionError,
    RangeError,
    WindowError,
)
from dmcl.version import __version__

TASK_HELP = {
    "characterize": "Equilibrium gain, settling time and interface balance.",
    "cir": "Channel impulse response (and optionally the state heatmap).",
    "taps": "Symbol-rate ISI taps, their increments and return probabilities.",
    "noise-stats": "Theoretical and Monte Carlo noise correlation profiles.",
    "simulate": "Simulated bound-count traces.",
    "ber-sweep": "Bit error rates of the configured detectors.",
    "calibrate-koff": "Unbinding rates that reach the target settling times.",
}


def _build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="dmcl",
        description="Runs DNA microarray molecular communication channel experiments.",
        formatter_class=ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    common = ArgumentParser(add_help=False)
    common.add_argument(
        "--config", help="Configuration file; reference channel defaults if omitted."
    )
    common.add_argument("--seed", type=int, help="Override experiment.seed.")
    common.add_argument("--trials", type=int, help="Override experiment.trials.")
    common.add_argument("--backend", choices=VALID_BACKENDS, help="Override experiment.backend.")
    common.add_argument("--out", help="Override output.directory.")
    common.add_argument(
        "-v",
        "--verbose",
        help="Include debug information in the logging output.",
        default=False,
        action="store_true",
    )

    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    subparsers.add_parser(
        "run", parents=[common], help="Run the tasks listed in experiment.tasks."
    )
    for task in VALID_TASKS:
        subparsers.add_parser(task, parents=[common], help=TASK_HELP[task])
    return parser


def _load_config(path: Optional[str]) -> ExperimentConfig:
    return parse_config_file(path) if path else default_config()


def main(argv: Optional[List[str]] = None) -> int:
    """
    Handle command line arguments and get things started.

    Parameters
    ----------
    argv : Optional[List[str]], default=None
        List of arguments, as if specified on the command-line.
        If ``None``, ``sys.argv[1:]`` is used instead.

    Returns
    -------
    int
        The process exit code.
    """
    args = _build_parser().parse_args(argv)

    # Default logging level is INFO unless we are being verbose
    log_level = logging.DEBUG if args.verbose else logging.INFO
    logging.captureWarnings(True)
    logging.basicConfig(
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s", level=log_level
    )
    logger = logging.getLogger("dmcl.commandline")

    try:
        if args.command == "run" and not args.config:
            raise ConfigError("The run command needs --config.")
        cfg = _load_config(args.config)
        run_configuration(
            cfg,
            tasks=None if args.command == "run" else [args.command],
            seed=args.seed,
            trials=args.trials,
            backend=args.backend,
            output_dir=args.out,
            log_level=log_level,
        )
    except (ConfigError, FileNotFoundError, RangeError, WindowError) as exc:
        logger.error(f"Configuration error: {exc}")
        return EXIT_CONFIG_ERROR
    except BudgetError as exc:
        logger.error(f"Budget exceeded: {exc}")
        return EXIT_BUDGET_ERROR
    except (NumericalAssertionError, DriftError, ConvergenceError) as exc:
        logger.error(f"Numerical check failed: {exc}")
        return EXIT_NUMERICAL_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
