"""Command-line entry point: ``mmap-birl {generate,learn,evaluate,sweep}``."""

import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional

from mmap_birl.models.config import ExperimentConfig, Method, SweepConfig, load_config
from mmap_birl.tools.evaluate import evaluate_weights
from mmap_birl.tools.generate import generate_demonstrations
from mmap_birl.tools.learn import learn_reward
from mmap_birl.tools.sweep import run_sweep_command
from mmap_birl.utils.error_handling import BirlError, handle_error

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 3
EXIT_ALL_CELLS_FAILED = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmap-birl",
        description="Marginal MAP Bayesian IRL from occluded, noisy demonstrations.",
    )
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    subparsers = parser.add_subparsers(dest="command", required=True)

    def common(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--config", required=True, help="YAML configuration file.")
        sub.add_argument("--seed", type=int, help="Override the config seed.")
        sub.add_argument("--method", choices=[m.value for m in Method], help="Override the learning method.")
        sub.add_argument("--jobs", type=int, help="Parallel workers (output does not depend on it).")
        sub.add_argument("--out", help="Output path.")

    generate = subparsers.add_parser("generate", help="Simulate and write a demonstration batch.")
    common(generate)

    learn = subparsers.add_parser("learn", help="Learn feature weights from a batch.")
    common(learn)
    learn.add_argument("--batch", required=True, help="Trajectory batch file.")

    evaluate = subparsers.add_parser("evaluate", help="Score a learned weights file.")
    common(evaluate)
    evaluate.add_argument("--weights", required=True, help="Weights file written by 'learn'.")

    sweep = subparsers.add_parser("sweep", help="Run an occlusion/noise sweep.")
    common(sweep)
    sweep.add_argument("--quiet", action="store_true", help="Hide the progress bar.")
    return parser


def _experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(ExperimentConfig, args.config)
    return config.with_overrides(seed=args.seed, method=args.method, jobs=args.jobs)


def _report_failure(response: Dict[str, Any]) -> int:
    print(json.dumps(response["error"], indent=2, default=str), file=sys.stderr)
    return EXIT_ERROR


def _run(args: argparse.Namespace) -> int:
    if args.command == "sweep":
        sweep_config = load_config(SweepConfig, args.config)
        sweep_config = sweep_config.with_overrides(
            seed=args.seed, methods=[args.method] if args.method else None
        )
        out = args.out or "results/sweep.csv"
        response = run_sweep_command(sweep_config, out, jobs=args.jobs or 1, progress=not args.quiet)
        if not response["success"]:
            return _report_failure(response)
        for cell in response["data"]["best"]:
            print(f"occlusion={cell['occlusion']} noise={cell['noise']} best={cell['best_method']}")
        return EXIT_ALL_CELLS_FAILED if response["data"]["all_failed"] else EXIT_OK

    config = _experiment_config(args)
    if args.command == "generate":
        response = generate_demonstrations(config, args.out)
        if not response["success"]:
            return _report_failure(response)
        print(response["data"]["digest"])
        return EXIT_OK

    if args.command == "learn":
        response = learn_reward(config, args.batch, args.out)
        if not response["success"]:
            return _report_failure(response)
        data = response["data"]
        print(f"{data['weights_path']} converged={data['converged']} iterations={data['iterations']}")
        return EXIT_OK if data["converged"] else EXIT_NOT_CONVERGED

    response = evaluate_weights(config, args.weights)
    if not response["success"]:
        return _report_failure(response)
    print(response["data"]["csv"], end="")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """Parse ``argv`` and run one command; returns the process exit code."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)
    logger.info(f"Running mmap-birl {args.command} with config {args.config}")
    try:
        return _run(args)
    except BirlError as e:
        return _report_failure(handle_error(e, context={"command": args.command}, logger=logger))


if __name__ == "__main__":
    sys.exit(main())
