"""Pydantic configuration models for experiments, sweeps and the ascent loop."""

from enum import Enum
from pathlib import Path
from typing import Any, List, Literal, Optional, Type, TypeVar, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field
from pydantic import ValidationError as PydanticValidationError
from pydantic import field_validator, model_validator

from mmap_birl.models.domain import GaussianPrior
from mmap_birl.utils.error_handling import ConfigurationError

BUILTIN_ENVIRONMENTS = ("forestworld", "onionworld")

ModelT = TypeVar("ModelT", bound=BaseModel)


class _Frozen(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class OcclusionMode(str, Enum):
    """Where occluded timesteps fall inside a trajectory."""
    CONTIGUOUS = "contiguous"
    IID = "iid"


class Method(str, Enum):
    MMAP = "mmap"
    IGNORE = "ignore"
    EM = "em"


class SegmentStart(str, Enum):
    """Start distribution for visible segments in the occlusion-ignoring baseline."""
    OCCUPANCY = "occupancy"
    UNIFORM = "uniform"


class OcclusionSpec(_Frozen):
    mode: OcclusionMode = OcclusionMode.CONTIGUOUS
    rate: float = Field(default=0.0, ge=0.0, le=1.0)


class AscentConfig(_Frozen):
    """Hyperparameters of the gradient ascent loop."""

    beta: float = Field(default=0.03, ge=0.0)
    step_size: float = Field(default=0.01, gt=0.0)
    decay: float = Field(default=0.95, gt=0.0, le=1.0)
    epsilon: float = Field(default=0.01, gt=0.0)
    discount: float = Field(default=0.99, ge=0.0, lt=1.0)
    max_iterations: int = Field(default=500, ge=1)
    use_cache: bool = True
    seed: int = 0

    @property
    def termination_threshold(self) -> float:
        if self.discount == 0.0:
            return float("inf")
        return self.epsilon * (1.0 - self.discount) / self.discount


class EmConfig(_Frozen):
    """Inner ascent settings plus the outer expectation-maximization loop.

    The ``em`` section of an experiment or sweep file leaves ``ascent`` unset;
    the file's own ascent section is filled in with :meth:`with_ascent`.
    """

    ascent: Optional[AscentConfig] = None
    em_max_rounds: int = Field(default=20, ge=1)
    em_tolerance: float = Field(default=1e-4, gt=0.0)

    @property
    def inner_ascent(self) -> AscentConfig:
        return self.ascent if self.ascent is not None else AscentConfig()

    def with_ascent(self, ascent: AscentConfig) -> "EmConfig":
        return self.model_copy(update={"ascent": ascent})


class PriorConfig(_Frozen):
    """Gaussian prior parameters; scalars are shared by every weight."""

    mean: Union[float, List[float]] = -1.0
    variance: Union[float, List[float]] = 0.5
    gradient_scale: float = 1.0

    @field_validator("gradient_scale")
    @classmethod
    def _known_scale(cls, value: float) -> float:
        if value not in (1.0, 0.5):
            raise ValueError("gradient_scale must be 1 or 0.5")
        return float(value)

    @field_validator("variance")
    @classmethod
    def _positive_variance(cls, value: Union[float, List[float]]) -> Union[float, List[float]]:
        if np.any(np.asarray(value, dtype=float) <= 0.0):
            raise ValueError("variance entries must be positive")
        return value

    def to_prior(self, num_features: int) -> GaussianPrior:
        mean = np.broadcast_to(np.asarray(self.mean, dtype=float), (num_features,))
        variance = np.broadcast_to(np.asarray(self.variance, dtype=float), (num_features,))
        return GaussianPrior(mean=mean, stddev=np.sqrt(variance), gradient_scale=self.gradient_scale)


class EnvironmentConfig(_Frozen):
    """Environment by builtin name or path to a generic environment file."""

    name: str = "forestworld"
    noise: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    start: Literal["safe", "non_goal", "uniform"] = "safe"
    blemish_rate: float = Field(default=0.5, ge=0.0, le=1.0)
    extra_factor_size: int = Field(default=1, ge=1)

    @property
    def is_builtin(self) -> bool:
        return self.name in BUILTIN_ENVIRONMENTS

    @model_validator(mode="after")
    def _environment_exists(self) -> "EnvironmentConfig":
        if not self.is_builtin and not Path(self.name).is_file():
            raise ValueError(
                f"environment '{self.name}' is neither one of {list(BUILTIN_ENVIRONMENTS)} nor an existing file"
            )
        return self


class DemonstrationConfig(_Frozen):
    count: int = Field(default=10, ge=1)
    horizon: int = Field(default=10, ge=1)
    expert_beta: Optional[float] = Field(default=None, ge=0.0)


class EvaluationConfig(_Frozen):
    sort_onions: int = Field(default=50, ge=1)
    ile_norm: Literal["l1", "squared"] = "l1"


class ExperimentConfig(_Frozen):
    """Everything needed to reproduce a generate/learn/evaluate run."""

    environment: EnvironmentConfig = EnvironmentConfig()
    method: Method = Method.MMAP
    ascent: AscentConfig = AscentConfig()
    prior: PriorConfig = PriorConfig()
    occlusion: OcclusionSpec = OcclusionSpec()
    demonstrations: DemonstrationConfig = DemonstrationConfig()
    em: EmConfig = EmConfig()
    evaluation: EvaluationConfig = EvaluationConfig()
    segment_start: SegmentStart = SegmentStart.OCCUPANCY
    restarts: int = Field(default=1, ge=1)
    jobs: int = Field(default=1, ge=1)
    record_timing: bool = True
    seed: int
    output: str = "runs/experiment"

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        """Apply CLI overrides (None values are ignored) and re-validate."""
        data = self.model_dump(mode="json")
        data.update({key: value for key, value in overrides.items() if value is not None})
        return validate_config(type(self), data)


class SweepConfig(_Frozen):
    """Grid of (method, occlusion, noise) cells evaluated over independent batches."""

    environment: EnvironmentConfig = EnvironmentConfig()
    occlusion_levels: List[float] = Field(default_factory=lambda: [0.1, 0.2, 0.3, 0.4])
    noise_levels: List[float] = Field(default_factory=lambda: [0.3])
    occlusion_mode: OcclusionMode = OcclusionMode.CONTIGUOUS
    batches: int = Field(default=10, ge=1)
    trajectories_per_batch: int = Field(default=10, ge=1)
    horizon: int = Field(default=10, ge=1)
    methods: List[Method] = Field(default_factory=lambda: [Method.MMAP, Method.IGNORE, Method.EM])
    ascent: AscentConfig = AscentConfig()
    prior: PriorConfig = PriorConfig()
    em: EmConfig = EmConfig()
    segment_start: SegmentStart = SegmentStart.OCCUPANCY
    expert_beta: Optional[float] = Field(default=None, ge=0.0)
    ile_norm: Literal["l1", "squared"] = "l1"
    restarts: int = Field(default=1, ge=1)
    record_timing: bool = True
    seed: int

    @field_validator("occlusion_levels", "noise_levels")
    @classmethod
    def _rates_in_range(cls, values: List[float]) -> List[float]:
        if not values:
            raise ValueError("at least one level is required")
        if any(not 0.0 <= v <= 1.0 for v in values):
            raise ValueError("rates must lie in [0, 1]")
        return values

    @field_validator("methods")
    @classmethod
    def _methods_present(cls, values: List[Method]) -> List[Method]:
        if not values:
            raise ValueError("at least one method is required")
        return values

    def with_overrides(self, **overrides: Any) -> "SweepConfig":
        data = self.model_dump(mode="json")
        data.update({key: value for key, value in overrides.items() if value is not None})
        return validate_config(type(self), data)


def validate_config(model: Type[ModelT], data: Any, path: Optional[Union[str, Path]] = None) -> ModelT:
    """Validate a mapping into ``model``, converting field errors into ConfigurationError."""
    try:
        return model.model_validate(data)
    except PydanticValidationError as e:
        field_errors = [
            f"{'.'.join(str(part) for part in err['loc'])}: {err['msg']}" for err in e.errors()
        ]
        raise ConfigurationError(
            f"invalid {model.__name__}: " + "; ".join(field_errors),
            config_path=str(path) if path is not None else None,
            field_errors=field_errors,
        ) from e


def load_config(model: Type[ModelT], path: Union[str, Path]) -> ModelT:
    """Read a YAML config file into ``model``."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}", config_path=str(path))
    try:
        with open(path, encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigurationError(f"config file is not valid YAML: {e}", config_path=str(path)) from e
    if not isinstance(data, dict):
        raise ConfigurationError("config file must contain a mapping", config_path=str(path))
    return validate_config(model, data, path)


def config_to_yaml(config: BaseModel) -> str:
    return yaml.safe_dump(config.model_dump(mode="json"), sort_keys=False)


def config_from_yaml(model: Type[ModelT], text: str) -> ModelT:
    return validate_config(model, yaml.safe_load(text))
