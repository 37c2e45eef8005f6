"""Command: simulate expert demonstrations and write an observed batch plus its ground truth."""

import logging
import time
from pathlib import Path
from typing import Any, Dict, Optional, Union

from mmap_birl.models.config import ExperimentConfig, config_to_yaml
from mmap_birl.utils.environments import expert_policy, load_environment
from mmap_birl.utils.error_handling import ErrorContext, create_success_response, handle_error
from mmap_birl.utils.observation_model import simulate_demonstrations
from mmap_birl.utils.trajectory_io import write_ground_truth, write_trajectory_batch

logger = logging.getLogger(__name__)


def sidecar_path(batch_path: Union[str, Path], kind: str) -> Path:
    """``runs/batch.txt`` -> ``runs/batch.<kind>.txt`` (or ``.yaml`` for configs)."""
    batch_path = Path(batch_path)
    suffix = ".yaml" if kind == "config" else batch_path.suffix or ".txt"
    return batch_path.with_name(f"{batch_path.stem}.{kind}{suffix}")


def generate_demonstrations(config: ExperimentConfig, out: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """
    Simulate ``config.demonstrations.count`` expert trajectories and write them to disk.

    The expert acts greedily under the environment's true weights (or with a
    Boltzmann policy when ``demonstrations.expert_beta`` is set). Observations
    pass through the environment's observation model and are then occluded per
    ``config.occlusion``.

    Args:
        config: Resolved experiment configuration.
        out: Batch file path; defaults to ``<config.output>/batch.txt``.

    Returns:
        Dictionary containing:
        - success: Whether generation succeeded
        - data: batch/ground-truth/config paths, SHA-256 digest of the batch, counts
        - processing_time: Time taken in seconds
        - error: Error details (if generation failed)
    """
    start_time = time.perf_counter()
    batch_path = Path(out) if out is not None else Path(config.output) / "batch.txt"

    try:
        with ErrorContext("generate_demonstrations", logger, context={"environment": config.environment.name}):
            env = load_environment(config.environment, discount=config.ascent.discount)
            demonstrations = config.demonstrations
            observed, truth = simulate_demonstrations(
                env.mdp,
                expert_policy(env, demonstrations.expert_beta),
                env.observation_model,
                demonstrations.horizon,
                config.occlusion,
                demonstrations.count,
                config.seed,
            )

            digest = write_trajectory_batch(batch_path, observed, env.observation_model.num_observations)
            truth_path = sidecar_path(batch_path, "truth")
            write_ground_truth(truth_path, truth)
            config_path = sidecar_path(batch_path, "config")
            config_path.write_text(config_to_yaml(config.model_copy(update={"jobs": 1})), encoding="utf-8")

            occluded = sum(t.num_occluded for t in observed)
            logger.info(f"Wrote {len(observed)} trajectories ({occluded} occluded steps) to {batch_path}")
            return create_success_response(
                {
                    "batch_path": str(batch_path),
                    "truth_path": str(truth_path),
                    "config_path": str(config_path),
                    "digest": digest,
                    "num_trajectories": len(observed),
                    "horizon": demonstrations.horizon,
                    "occluded_steps": occluded,
                },
                processing_time=time.perf_counter() - start_time,
            )

    except Exception as e:
        return handle_error(e, context={"operation": "generate_demonstrations", "out": str(batch_path)}, logger=logger)
