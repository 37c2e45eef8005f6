"""Command: learn feature weights from an observed batch with the configured method."""

import json
import logging
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import yaml

from mmap_birl.models.config import ExperimentConfig
from mmap_birl.utils.baselines import run_learner
from mmap_birl.utils.environments import load_environment
from mmap_birl.utils.error_handling import (
    ErrorContext,
    FormatError,
    ValidationError,
    create_success_response,
    handle_error,
)
from mmap_birl.utils.mdp_solver import solve_optimal
from mmap_birl.utils.reward_model import reward_of
from mmap_birl.utils.trajectory_io import read_trajectory_batch

logger = logging.getLogger(__name__)

WEIGHTS_FILE = "weights.yaml"
DIAGNOSTICS_FILE = "diagnostics.jsonl"


def write_weights_file(path: Union[str, Path], document: Dict[str, Any]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        yaml.safe_dump(document, f, sort_keys=False)


def read_weights_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Load a weights document and check it carries a numeric ``weights`` list."""
    try:
        with open(path, encoding="utf-8") as f:
            document = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise FormatError(f"cannot read weights file: {e}", path=str(path)) from e
    if not isinstance(document, dict) or not isinstance(document.get("weights"), list):
        raise FormatError("weights file must contain a 'weights' list", path=str(path))
    try:
        document["weights"] = [float(w) for w in document["weights"]]
    except (TypeError, ValueError) as e:
        raise FormatError(f"weights must be numbers: {e}", path=str(path)) from e
    return document


def _write_diagnostics(path: Path, records: List[Dict[str, Any]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True) + "\n")


def learn_reward(
    config: ExperimentConfig,
    batch_path: Union[str, Path],
    out_dir: Optional[Union[str, Path]] = None,
) -> Dict[str, Any]:
    """
    Learn a reward from the demonstrations in ``batch_path``.

    Nothing is written unless learning succeeds. The weights document embeds
    the resolved config, the learned weights, the induced reward table and
    greedy policy, and whether the ascent converged.

    Args:
        config: Resolved experiment configuration; ``config.method`` selects the learner.
        batch_path: Observed trajectory batch.
        out_dir: Output directory; defaults to ``config.output``.

    Returns:
        Dictionary containing:
        - success: Whether learning succeeded
        - data: weights, converged flag, iteration count and output paths
        - processing_time: Time taken in seconds
        - error: Error details (if learning failed)
    """
    start_time = time.perf_counter()
    out_dir = Path(out_dir) if out_dir is not None else Path(config.output)

    try:
        with ErrorContext("learn_reward", logger, context={"method": config.method.value, "batch": str(batch_path)}):
            batch, num_observations = read_trajectory_batch(batch_path)
            if not batch:
                raise ValidationError("trajectory batch is empty", field_name="batch")
            env = load_environment(config.environment, discount=config.ascent.discount)
            if num_observations != env.observation_model.num_observations:
                raise ValidationError(
                    f"batch declares O={num_observations} but {env.name} has "
                    f"{env.observation_model.num_observations} observations",
                    field_name="num_observations",
                    field_value=num_observations,
                )

            ascent = config.ascent.model_copy(update={"seed": config.seed})
            learned = run_learner(
                config.method,
                env.mdp,
                batch,
                env.observation_model,
                env.features,
                config.prior.to_prior(env.features.num_features),
                ascent,
                config.em.with_ascent(ascent),
                config.segment_start,
                config.restarts,
                config.jobs,
                config.record_timing,
            )
            reward = reward_of(learned.weights, env.features)
            policy, _ = solve_optimal(env.mdp, reward)

            document = {
                "config": config.model_dump(mode="json", exclude={"jobs"}),
                "method": config.method.value,
                "environment": env.name,
                "feature_names": list(env.features.names),
                "weights": [float(w) for w in learned.weights],
                "reward": np.asarray(reward).tolist(),
                "policy": [int(a) for a in policy],
                "converged": bool(learned.converged),
            }
            weights_path = out_dir / WEIGHTS_FILE
            diagnostics_path = out_dir / DIAGNOSTICS_FILE
            write_weights_file(weights_path, document)
            _write_diagnostics(diagnostics_path, learned.diagnostics)

            if not learned.converged:
                logger.warning(f"{config.method.value} stopped before converging; weights written anyway")
            return create_success_response(
                {
                    "weights": document["weights"],
                    "converged": document["converged"],
                    "iterations": len(learned.diagnostics),
                    "weights_path": str(weights_path),
                    "diagnostics_path": str(diagnostics_path),
                },
                processing_time=time.perf_counter() - start_time,
            )

    except Exception as e:
        return handle_error(e, context={"operation": "learn_reward", "batch": str(batch_path)}, logger=logger)
