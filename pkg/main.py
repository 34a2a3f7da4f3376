#!/usr/bin/env python3
"""
Sloppy Phase Explorer
Fisher-information spectra, stiff-direction exploration walks and the
bundled validation studies for stochastic simulation models
"""

import argparse
import asyncio
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional

# Add the project root to Python path
PROJECT_ROOT = Path(__file__).parent
sys.path.insert(0, str(PROJECT_ROOT))

from config.settings import (
    COMMANDS,
    DEFAULT_WORKERS,
    EXIT_CONFIG_ERROR,
    EXIT_FAILURE,
    EXIT_MODEL_FAILURE,
    EXIT_OK,
    EXIT_VALIDATION_FAILURE,
    LOG_FORMAT,
    LOG_LEVEL,
    OUTPUT_DIR,
    WISHART_DIMENSION,
    WISHART_SAMPLES,
    WISHART_TRIALS,
)
from runners.explore_runner import ExploreRunner
from runners.spectrum_runner import SpectrumRunner
from runners.validate_runner import ValidateRunner
from runners.wishart_runner import WishartRunner
from services.monitoring_service import CallCounter, MonitoringService
from services.run_config import load_run_config
from utils.errors import ConfigError, ModelFailure, ValidationFailure

# Set up logging
logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Sloppiness analysis and phase exploration for simulation models",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Fisher spectrum at a parameter point
  python main.py spectrum --config config/examples/synthetic_spectrum.json --out output/spectrum

  # Exploration walk, both first orientations
  python main.py explore --config config/examples/synthetic_walk.json --both-orientations

  # Resume an interrupted walk
  python main.py explore --config config/examples/synthetic_walk.json --resume

  # Bundled studies
  python main.py validate --out output/validate
  python main.py wishart --dimension 8 --samples 64 --trials 200 --seed 1
        """,
    )

    # Flags shared by every command
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Run configuration JSON file")
    common.add_argument("--out", help="Output directory (overrides the config file)")
    common.add_argument(
        "--workers",
        type=int,
        default=None,
        help=f"Maximum concurrent simulate calls (default: {DEFAULT_WORKERS})",
    )
    common.add_argument("--seed", type=int, default=None, help="Run seed (overrides the config file)")
    common.add_argument(
        "--dump-ensembles",
        action="store_true",
        help="Write one CSV per seed of the baseline ensemble",
    )

    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("spectrum", parents=[common], help="Fisher matrix and eigen-spectrum")

    explore = commands.add_parser("explore", parents=[common], help="Stiff-direction exploration walk")
    explore.add_argument(
        "--both-orientations",
        action="store_true",
        help="Run two walks with opposite first steps (walk_pos.jsonl, walk_neg.jsonl)",
    )
    explore.add_argument(
        "--resume", action="store_true", help="Continue from the last complete step of existing traces"
    )

    commands.add_parser("validate", parents=[common], help="Polynomial / Hilbert convergence study")

    wishart = commands.add_parser("wishart", parents=[common], help="Wishart null eigenvalues")
    wishart.add_argument("--dimension", type=int, default=WISHART_DIMENSION, help="Matrix size P")
    wishart.add_argument("--samples", type=int, default=WISHART_SAMPLES, help="Columns M (M >= P)")
    wishart.add_argument("--trials", type=int, default=WISHART_TRIALS, help="Number of matrices")

    return parser


def _load_config(args):
    if not args.config:
        raise ConfigError("--config", f"is required for the {args.command} command")
    config = load_run_config(Path(args.config))
    return config.with_overrides(
        output_dir=args.out,
        workers=args.workers,
        seed=args.seed,
        dump_ensembles=args.dump_ensembles,
    )


def resolve_output_dir(args) -> Path:
    """--out flag, then the config file's output_dir, then the settings default"""
    if args.out:
        return Path(args.out)
    if args.command in ("spectrum", "explore") and args.config:
        try:
            return Path(load_run_config(Path(args.config), check_files=False).output_dir)
        except ConfigError:
            pass
    return OUTPUT_DIR / args.command


async def run_command(args, counter: CallCounter) -> dict:
    if args.command == "spectrum":
        config = _load_config(args)
        return await SpectrumRunner(config, counter=counter).run()

    if args.command == "explore":
        config = _load_config(args)
        runner = ExploreRunner(
            config,
            both_orientations=args.both_orientations,
            resume=args.resume,
            counter=counter,
        )
        return await runner.run()

    if args.command == "validate":
        runner = ValidateRunner(
            output_dir=str(resolve_output_dir(args)),
            seed=args.seed or 0,
            workers=args.workers or DEFAULT_WORKERS,
            counter=counter,
        )
        return await runner.run()

    if args.command == "wishart":
        runner = WishartRunner(
            dimension=args.dimension,
            samples=args.samples,
            trials=args.trials,
            seed=args.seed or 0,
            output_dir=str(resolve_output_dir(args)),
        )
        return await runner.run()

    raise ConfigError("command", f"unknown command '{args.command}', expected one of {COMMANDS}")


async def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    output_dir = resolve_output_dir(args)
    output_dir.mkdir(parents=True, exist_ok=True)
    monitoring_service = MonitoringService(output_dir / "run_metrics.json")
    counter = CallCounter()

    logger.info(f"Sloppy Phase Explorer: {args.command}")
    logger.info(f"Output: {output_dir}")

    start = time.monotonic()
    errors = []
    exit_code = EXIT_OK

    try:
        result = await run_command(args, counter)
        logger.info(f"{args.command} finished with status {result.get('status')}")

    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        errors.append(str(e))
        exit_code = EXIT_CONFIG_ERROR

    except ModelFailure as e:
        logger.error(f"Model failure: {e}")
        errors.append(str(e))
        exit_code = EXIT_MODEL_FAILURE

    except ValidationFailure as e:
        logger.error(f"Validation failed: {e}")
        errors.append(str(e))
        exit_code = EXIT_VALIDATION_FAILURE

    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        errors.append("interrupted")
        exit_code = EXIT_FAILURE

    except Exception as e:
        logger.error(f"Error during {args.command}: {e}")
        errors.append(str(e))
        exit_code = EXIT_FAILURE

    monitoring_service.log_command_run(
        command=args.command,
        duration_seconds=time.monotonic() - start,
        model_calls=counter.snapshot(),
        success=exit_code == EXIT_OK,
        errors=errors,
        output_dir=str(output_dir),
    )
    history = monitoring_service.get_summary(args.command)
    logger.info(
        f"{args.command} history in {output_dir}: {history['total_runs']} runs, "
        f"{history['failed_runs']} failed, {history['total_duration']}s"
    )
    return exit_code


if __name__ == "__main__":
    # Set up logging
    logging.basicConfig(
        level=getattr(logging, LOG_LEVEL.upper(), logging.INFO),
        format=LOG_FORMAT,
    )
    sys.exit(asyncio.run(main()))
