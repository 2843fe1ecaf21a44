"""
Command-line front end.
"""
import argparse
import logging
import sys
from typing import List, Optional, Sequence

import numpy as np
from dotenv import load_dotenv

from diagram_landmarks.config import SELECTION_RULES, TAU_RULES, RunConfig
from diagram_landmarks.diagram import bottleneck
from diagram_landmarks.errors import ConfigError, DataError, NumericGuardError
from diagram_landmarks.logger import setup_logging
from diagram_landmarks.pipeline import LandmarkPipeline
from diagram_landmarks.records import read_diagrams
from diagram_landmarks.reports import matrix_lines

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

PIPELINE_COMMANDS = ("embed", "select", "evaluate", "audit")


def _comma_list(raw: str) -> List[str]:
    return [item.strip() for item in raw.split(",") if item.strip()]


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per stage."""
    parser = argparse.ArgumentParser(
        prog="diagram_landmarks",
        description="Landmark embeddings of persistence diagrams with certified classification",
    )
    parser.add_argument("--env-file", help="dotenv file with LANDMARKS_* settings")
    parser.add_argument("--log-level", help="logging level (default: INFO)")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in PIPELINE_COMMANDS:
        cmd = sub.add_parser(name, help=f"run the {name} stage")
        cmd.add_argument("dataset", nargs="?", help="TU dataset directory or labeled diagram file")
        cmd.add_argument("--out", dest="output_dir", help="output directory")
        cmd.add_argument("--descriptors", type=_comma_list,
                         help="comma separated descriptors, e.g. degree+hks:10,closeness")
        cmd.add_argument("--tau", dest="tau_rule", choices=TAU_RULES, help="scale center rule")
        cmd.add_argument("--n-scales", type=int, help="number of scales")
        cmd.add_argument("--n-max", type=int, help="points kept per diagram")
        cmd.add_argument("--folds", type=int, help="outer CV folds")
        cmd.add_argument("--seed", type=int, action="append", dest="seeds",
                         help="CV seed, repeatable")
        cmd.add_argument("--alpha", type=float, help="certificate confidence level")
        cmd.add_argument("--n-jobs", type=int, help="joblib workers")
        if name == "select":
            cmd.add_argument("--rule", dest="selection_rule", choices=SELECTION_RULES,
                             help="selection statistic")

    cmd = sub.add_parser("bottleneck", help="pairwise bottleneck distances between diagram files")
    cmd.add_argument("first", help="diagram file")
    cmd.add_argument("second", nargs="?", help="second diagram file (default: first)")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """Environment configuration with command-line overrides."""
    if args.env_file:
        load_dotenv(args.env_file, override=True)
    config = RunConfig.from_env()
    overrides = {key: getattr(args, key, None) for key in (
        "dataset", "output_dir", "tau_rule", "n_scales", "n_max", "folds", "alpha",
        "n_jobs", "selection_rule", "log_level",
    )}
    if getattr(args, "descriptors", None):
        overrides["descriptors"] = tuple(args.descriptors)
    if getattr(args, "seeds", None):
        overrides["seeds"] = tuple(args.seeds)
    return config.with_overrides(**overrides)


def run_bottleneck(first: str, second: Optional[str], out=None) -> np.ndarray:
    """Print the bottleneck matrix between two diagram files, tab separated."""
    out = out or sys.stdout
    left = [r.diagram for r in read_diagrams(first)]
    right = left if second is None else [r.diagram for r in read_diagrams(second)]
    matrix = np.array([[bottleneck(a, b) for b in right] for a in left]).reshape(len(left), len(right))
    for line in matrix_lines(matrix):
        print(line, file=out)
    return matrix


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Command-line entry point.

    Returns:
        int: Exit code (0 ok, 1 usage, 2 data error, 3 numeric guard)
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    try:
        config = config_from_args(args)
    except ConfigError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_USAGE

    if args.command in PIPELINE_COMMANDS:
        error = config.validate() or (None if config.dataset else "Dataset must be set")
        if error:
            print(f"Configuration error: {error}", file=sys.stderr)
            return EXIT_USAGE

    try:
        setup_logging(config)
    except ValueError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_USAGE

    try:
        if args.command == "bottleneck":
            run_bottleneck(args.first, args.second)
        else:
            LandmarkPipeline(config).run(args.command)
        return EXIT_OK
    except NumericGuardError as e:
        logger.error(f"Numeric guard: {e}")
        return EXIT_NUMERIC
    except (DataError, OSError) as e:
        logger.error(f"Data error: {e}")
        return EXIT_DATA
    except ValueError as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_USAGE
