"""Result and diagnostic records emitted by learning, evaluation and sweeps."""

from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class IterationRecord(BaseModel):
    """One ascent iteration."""

    model_config = ConfigDict(frozen=True)

    iteration: int
    log_posterior: float
    log_likelihood: float
    log_prior: float
    gradient_norm: float
    step_size: float
    delta: float
    cache_hit: bool
    policy_changed: bool
    wall_time_s: float


class AscentResult(BaseModel):
    """Outcome of one gradient ascent run."""

    model_config = ConfigDict(frozen=True)

    weights: List[float]
    initial_weights: List[float]
    converged: bool
    iterations: int
    cache_hits: int
    cache_size: int
    final_log_posterior: float
    records: List[IterationRecord] = Field(default_factory=list)

    @property
    def theta(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=np.float64)


class EmRoundRecord(BaseModel):
    """One expectation-maximization round."""

    model_config = ConfigDict(frozen=True)

    round: int
    log_posterior: float
    surrogate_before: float
    surrogate_after: float
    accepted: bool
    max_weight_change: float
    inner_iterations: int


class EmResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    weights: List[float]
    converged: bool
    rounds: List[EmRoundRecord] = Field(default_factory=list)

    @property
    def theta(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=np.float64)


class ConfusionCounts(BaseModel):
    """Sorting outcome counts; the positive class is a blemished onion."""

    model_config = ConfigDict(frozen=True)

    tp: int = Field(ge=0)
    fp: int = Field(ge=0)
    tn: int = Field(ge=0)
    fn: int = Field(ge=0)


class SweepRow(BaseModel):
    """Aggregated result of one (method, occlusion, noise) cell."""

    model_config = ConfigDict(frozen=True)

    method: str
    occlusion: float
    noise: float
    batch_count: int
    ile_mean: Optional[float]
    ile_se: Optional[float]
    time_mean_s: Optional[float]
    time_se_s: Optional[float]
    occlusion_mode: str
    status: str = "ok"


class EvaluationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    method: str
    environment: str
    ile: float
    precision: Optional[float] = None
    recall: Optional[float] = None
    counts: Optional[ConfusionCounts] = None
