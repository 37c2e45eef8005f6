"""Batched experiment sweeps over (method, occlusion, noise) cells with a resumable CSV table."""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from mmap_birl.models.config import EnvironmentConfig, Method, OcclusionSpec, SweepConfig
from mmap_birl.models.records import SweepRow
from mmap_birl.utils.baselines import run_learner
from mmap_birl.utils.environments import expert_policy, load_environment
from mmap_birl.utils.error_handling import BirlError, FormatError
from mmap_birl.utils.mdp_solver import solve_optimal
from mmap_birl.utils.metrics import inverse_learning_error
from mmap_birl.utils.observation_model import simulate_demonstrations
from mmap_birl.utils.reward_model import reward_of

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = [
    "method",
    "occlusion",
    "noise",
    "batch_count",
    "ile_mean",
    "ile_se",
    "time_mean_s",
    "time_se_s",
    "occlusion_mode",
    "status",
]

CellKey = Tuple[str, float, float]


@dataclass(frozen=True)
class SweepTask:
    """One learner run on one demonstration batch."""

    method: Method
    occlusion: float
    noise: float
    data_cell: int
    batch: int


@dataclass(frozen=True)
class TaskOutcome:
    ile: Optional[float]
    seconds: float
    error: Optional[str] = None


def data_seed(seed: int, data_cell: int, batch: int) -> int:
    """Seed shared by every method on the same (occlusion, noise) cell and batch."""
    return int(np.random.SeedSequence([seed, data_cell, batch]).generate_state(1, dtype=np.uint32)[0])


def run_task(task: SweepTask, config: SweepConfig) -> TaskOutcome:
    """Generate one batch, learn from it with ``task.method`` and score the learned policy."""
    seed = data_seed(config.seed, task.data_cell, task.batch)
    env_config = EnvironmentConfig(**{**config.environment.model_dump(), "noise": task.noise})
    try:
        env = load_environment(env_config, discount=config.ascent.discount)
        expert = expert_policy(env, config.expert_beta)
        batch, _ = simulate_demonstrations(
            env.mdp,
            expert,
            env.observation_model,
            config.horizon,
            OcclusionSpec(mode=config.occlusion_mode, rate=task.occlusion),
            config.trajectories_per_batch,
            seed,
        )
        ascent = config.ascent.model_copy(update={"seed": seed})
        started = time.perf_counter()
        learned = run_learner(
            task.method,
            env.mdp,
            batch,
            env.observation_model,
            env.features,
            config.prior.to_prior(env.features.num_features),
            ascent,
            config.em.with_ascent(ascent),
            config.segment_start,
            config.restarts,
            record_timing=config.record_timing,
        )
        seconds = time.perf_counter() - started if config.record_timing else 0.0
        learned_policy, _ = solve_optimal(env.mdp, reward_of(learned.weights, env.features))
        expert_greedy, _ = solve_optimal(env.mdp, env.true_reward)
        ile = inverse_learning_error(env.mdp, env.true_reward, expert_greedy, learned_policy, config.ile_norm)
        return TaskOutcome(ile=ile, seconds=seconds)
    except BirlError as e:
        logger.warning(f"{task.method.value} failed at occlusion={task.occlusion}, noise={task.noise}: {e}")
        return TaskOutcome(ile=None, seconds=0.0, error=type(e).__name__)


def _run_task_args(args: Tuple[SweepTask, SweepConfig]) -> TaskOutcome:
    return run_task(*args)


def _mean_and_se(values: List[float]) -> Tuple[float, float]:
    data = np.asarray(values, dtype=np.float64)
    se = float(data.std(ddof=1) / np.sqrt(len(data))) if len(data) > 1 else 0.0
    return float(data.mean()), se


def aggregate_cell(
    method: Method, occlusion: float, noise: float, outcomes: List[TaskOutcome], config: SweepConfig
) -> SweepRow:
    errors = sorted({o.error for o in outcomes if o.error is not None})
    common = dict(
        method=method.value,
        occlusion=occlusion,
        noise=noise,
        batch_count=len(outcomes),
        occlusion_mode=config.occlusion_mode.value,
    )
    if errors:
        return SweepRow(
            **common, ile_mean=None, ile_se=None, time_mean_s=None, time_se_s=None, status="failed:" + "|".join(errors)
        )
    ile_mean, ile_se = _mean_and_se([o.ile for o in outcomes if o.ile is not None])
    time_mean, time_se = _mean_and_se([o.seconds for o in outcomes])
    return SweepRow(**common, ile_mean=ile_mean, ile_se=ile_se, time_mean_s=time_mean, time_se_s=time_se)


def cell_order(config: SweepConfig) -> List[CellKey]:
    """Canonical row order: method, then occlusion, then noise, as listed in the config."""
    return [
        (method.value, float(occlusion), float(noise))
        for method in config.methods
        for occlusion in config.occlusion_levels
        for noise in config.noise_levels
    ]


def rows_to_frame(rows: Iterable[SweepRow]) -> pd.DataFrame:
    return pd.DataFrame([row.model_dump() for row in rows], columns=SWEEP_COLUMNS)


def write_results(path: Union[str, Path], rows: Iterable[SweepRow]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows_to_frame(rows).to_csv(path, index=False, lineterminator="\n")


def read_results(path: Union[str, Path]) -> List[SweepRow]:
    """Parse a results table written by :func:`write_results`."""
    try:
        frame = pd.read_csv(
            path,
            dtype={"method": str, "occlusion_mode": str, "status": str},
            float_precision="round_trip",
        )
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise FormatError(f"cannot read results table: {e}", path=str(path)) from e
    if list(frame.columns) != SWEEP_COLUMNS:
        raise FormatError(f"results header must be {','.join(SWEEP_COLUMNS)}", path=str(path), line_number=1)

    def optional(value: object) -> Optional[float]:
        return None if pd.isna(value) else float(value)  # type: ignore[arg-type]

    return [
        SweepRow(
            method=record["method"],
            occlusion=float(record["occlusion"]),
            noise=float(record["noise"]),
            batch_count=int(record["batch_count"]),
            ile_mean=optional(record["ile_mean"]),
            ile_se=optional(record["ile_se"]),
            time_mean_s=optional(record["time_mean_s"]),
            time_se_s=optional(record["time_se_s"]),
            occlusion_mode=record["occlusion_mode"],
            status=record["status"],
        )
        for record in frame.to_dict(orient="records")
    ]


def run_sweep(
    config: SweepConfig,
    output: Optional[Union[str, Path]] = None,
    jobs: int = 1,
    progress: bool = True,
) -> List[SweepRow]:
    """Evaluate every (method, occlusion, noise) cell over ``config.batches`` batches.

    All methods in an (occlusion, noise) cell see the same demonstration
    batches. When ``output`` exists, cells already recorded there with status
    ``ok`` are kept and skipped; the table is rewritten in canonical order
    after each cell so an interrupted sweep can be resumed.
    """
    order = cell_order(config)
    completed: Dict[CellKey, SweepRow] = {}
    if output is not None and Path(output).is_file():
        for row in read_results(output):
            key = (row.method, float(row.occlusion), float(row.noise))
            if row.status == "ok" and row.occlusion_mode == config.occlusion_mode.value and key in order:
                completed[key] = row
        logger.info(f"Resuming sweep: {len(completed)} of {len(order)} cells already complete")

    data_cells = {
        (float(occlusion), float(noise)): index
        for index, (occlusion, noise) in enumerate(
            (o, n) for o in config.occlusion_levels for n in config.noise_levels
        )
    }
    pending = [key for key in order if key not in completed]
    executor = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        for method_name, occlusion, noise in tqdm(pending, desc="sweep cells", disable=not progress):
            method = Method(method_name)
            tasks = [
                (SweepTask(method, occlusion, noise, data_cells[(occlusion, noise)], batch), config)
                for batch in range(config.batches)
            ]
            if executor is None:
                outcomes = [_run_task_args(args) for args in tasks]
            else:
                outcomes = list(executor.map(_run_task_args, tasks))
            row = aggregate_cell(method, occlusion, noise, outcomes, config)
            completed[(method_name, occlusion, noise)] = row
            logger.info(
                f"{method_name} occlusion={occlusion} noise={noise}: "
                f"ILE {row.ile_mean if row.ile_mean is not None else 'n/a'} ({row.status})"
            )
            if output is not None:
                write_results(output, [completed[key] for key in order if key in completed])
    finally:
        if executor is not None:
            executor.shutdown()

    return [completed[key] for key in order]
