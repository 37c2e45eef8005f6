"""Command: score learned weights against the environment's expert."""

import logging
import time
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from mmap_birl.models.config import ExperimentConfig
from mmap_birl.models.records import EvaluationReport
from mmap_birl.tools.learn import read_weights_file
from mmap_birl.utils.environments import load_environment, simulate_onion_sort
from mmap_birl.utils.error_handling import ErrorContext, ValidationError, create_success_response, handle_error
from mmap_birl.utils.mdp_solver import solve_optimal
from mmap_birl.utils.metrics import inverse_learning_error, precision_recall
from mmap_birl.utils.reward_model import reward_of

logger = logging.getLogger(__name__)

UNDEFINED = "undefined"


def _cell(value: Optional[float]) -> str:
    return UNDEFINED if value is None else repr(float(value))


def format_report(report: EvaluationReport) -> str:
    """CSV header plus one row; sort columns appear only when the report has counts."""
    header = ["method", "environment", "ile"]
    row = [report.method, report.environment, repr(report.ile)]
    if report.counts is not None:
        header += ["precision", "recall", "tp", "fp", "tn", "fn"]
        counts = report.counts
        row += [_cell(report.precision), _cell(report.recall)] + [
            str(v) for v in (counts.tp, counts.fp, counts.tn, counts.fn)
        ]
    return ",".join(header) + "\n" + ",".join(row) + "\n"


def evaluate_weights(config: ExperimentConfig, weights_path: Union[str, Path]) -> Dict[str, Any]:
    """
    Compute the inverse learning error of learned weights, plus a simulated sort for onionworld.

    Args:
        config: Resolved experiment configuration naming the environment.
        weights_path: Weights document written by the learn command.

    Returns:
        Dictionary containing:
        - success: Whether evaluation succeeded
        - data: the report fields and its CSV rendering under ``csv``
        - processing_time: Time taken in seconds
        - error: Error details (if evaluation failed)
    """
    start_time = time.perf_counter()

    try:
        with ErrorContext("evaluate_weights", logger, context={"weights": str(weights_path)}):
            document = read_weights_file(weights_path)
            env = load_environment(config.environment, discount=config.ascent.discount)
            weights = np.asarray(document["weights"], dtype=np.float64)
            if weights.shape != (env.features.num_features,):
                raise ValidationError(
                    f"weights file has {weights.size} weights but {env.name} has "
                    f"{env.features.num_features} features",
                    field_name="weights",
                    field_value=weights.size,
                )

            learned_policy, _ = solve_optimal(env.mdp, reward_of(weights, env.features))
            expert_policy, _ = solve_optimal(env.mdp, env.true_reward)
            ile = inverse_learning_error(
                env.mdp, env.true_reward, expert_policy, learned_policy, config.evaluation.ile_norm
            )

            precision = recall = None
            counts = None
            if env.has_positive_class:
                counts = simulate_onion_sort(env, learned_policy, config.evaluation.sort_onions, config.seed)
                precision, recall = precision_recall(counts)

            report = EvaluationReport(
                method=str(document.get("method", config.method.value)),
                environment=env.name,
                ile=ile,
                precision=precision,
                recall=recall,
                counts=counts,
            )
            logger.info(f"ILE {ile:.6f} for {report.method} on {env.name}")
            return create_success_response(
                {**report.model_dump(mode="json"), "csv": format_report(report)},
                processing_time=time.perf_counter() - start_time,
            )

    except Exception as e:
        return handle_error(e, context={"operation": "evaluate_weights", "weights": str(weights_path)}, logger=logger)
