"""Numeric domain types shared by the solvers, the observation model and inference.

Containers are frozen dataclasses over read-only numpy arrays. States and actions
are dense integer indices; environment builders own the mapping to semantic labels.
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from mmap_birl.utils.error_handling import ValidationError

PROBABILITY_TOLERANCE = 1e-9

# Plain array aliases. Shapes: reward (S, A); weights (K,); deterministic
# policy (S,) of action indices; stochastic policy (S, A).
RewardTable = NDArray[np.float64]
FeatureWeights = NDArray[np.float64]
DeterministicPolicy = NDArray[np.int64]
StochasticPolicy = NDArray[np.float64]


def _frozen(array: NDArray, dtype: type = np.float64) -> NDArray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def _check_rows_stochastic(tensor: NDArray, name: str) -> None:
    if not np.all(np.isfinite(tensor)):
        raise ValidationError(f"{name} contains non-finite entries", field_name=name)
    if np.any(tensor < 0.0):
        raise ValidationError(f"{name} has negative probabilities", field_name=name)
    sums = tensor.sum(axis=-1)
    worst = float(np.max(np.abs(sums - 1.0)))
    if worst > PROBABILITY_TOLERANCE:
        raise ValidationError(
            f"{name} rows must sum to 1 (worst deviation {worst:.3e})",
            field_name=name,
            field_value=worst,
        )


@dataclass(frozen=True)
class DiscountedMdp:
    """Finite discounted MDP without a reward: S, A, T(s, a, s'), gamma and Pr(s^1)."""

    transitions: NDArray[np.float64]
    discount: float
    initial_distribution: NDArray[np.float64]

    def __post_init__(self) -> None:
        transitions = _frozen(self.transitions)
        initial = _frozen(self.initial_distribution)
        if transitions.ndim != 3 or transitions.shape[0] != transitions.shape[2]:
            raise ValidationError(
                f"transitions must have shape (S, A, S), got {transitions.shape}",
                field_name="transitions",
            )
        if transitions.shape[0] < 1 or transitions.shape[1] < 1:
            raise ValidationError("MDP needs at least one state and one action", field_name="transitions")
        _check_rows_stochastic(transitions, "transitions")
        if initial.shape != (transitions.shape[0],):
            raise ValidationError(
                f"initial_distribution must have shape ({transitions.shape[0]},)",
                field_name="initial_distribution",
            )
        _check_rows_stochastic(initial, "initial_distribution")
        if not 0.0 <= self.discount < 1.0:
            raise ValidationError(
                "discount must lie in [0, 1)", field_name="discount", field_value=self.discount
            )
        object.__setattr__(self, "transitions", transitions)
        object.__setattr__(self, "initial_distribution", initial)
        object.__setattr__(self, "discount", float(self.discount))

    @property
    def num_states(self) -> int:
        return int(self.transitions.shape[0])

    @property
    def num_actions(self) -> int:
        return int(self.transitions.shape[1])

    @property
    def num_pairs(self) -> int:
        return self.num_states * self.num_actions

    def with_discount(self, discount: float) -> "DiscountedMdp":
        return DiscountedMdp(self.transitions, discount, self.initial_distribution)


@dataclass(frozen=True)
class FeatureMap:
    """Basis functions phi(s, a, k) with values in [0, 1]."""

    phi: NDArray[np.float64]
    names: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        phi = _frozen(self.phi)
        if phi.ndim != 3:
            raise ValidationError(f"phi must have shape (S, A, K), got {phi.shape}", field_name="phi")
        if phi.shape[2] < 1:
            raise ValidationError("at least one feature is required", field_name="phi")
        if not np.all(np.isfinite(phi)) or np.any(phi < 0.0) or np.any(phi > 1.0):
            raise ValidationError("feature values must lie in [0, 1]", field_name="phi")
        names = tuple(self.names) or tuple(f"feature_{k}" for k in range(phi.shape[2]))
        if len(names) != phi.shape[2]:
            raise ValidationError("one name per feature is required", field_name="names")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "names", names)

    @property
    def num_features(self) -> int:
        return int(self.phi.shape[2])


@dataclass(frozen=True)
class GaussianPrior:
    """Independent Gaussian prior over feature weights.

    ``gradient_scale`` multiplies the analytic prior gradient: 1.0 is the exact
    derivative of the log density, 0.5 reproduces the halved constant used by
    some MAP-BIRL write-ups (it only rescales the prior's effective strength).
    """

    mean: NDArray[np.float64]
    stddev: NDArray[np.float64]
    gradient_scale: float = 1.0

    def __post_init__(self) -> None:
        mean = _frozen(np.atleast_1d(self.mean))
        stddev = _frozen(np.atleast_1d(self.stddev))
        if mean.shape != stddev.shape or mean.ndim != 1:
            raise ValidationError("prior mean and stddev must be vectors of equal length", field_name="stddev")
        if not np.all(np.isfinite(mean)):
            raise ValidationError("prior mean must be finite", field_name="mean")
        if np.any(~np.isfinite(stddev)) or np.any(stddev <= 0.0):
            raise ValidationError("prior stddev entries must be positive", field_name="stddev")
        if self.gradient_scale not in (1.0, 0.5):
            raise ValidationError(
                "gradient_scale must be 1 or 1/2",
                field_name="gradient_scale",
                field_value=self.gradient_scale,
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "stddev", stddev)

    @classmethod
    def from_scalars(
        cls, mean: float, variance: float, num_features: int, gradient_scale: float = 1.0
    ) -> "GaussianPrior":
        if variance <= 0.0:
            raise ValidationError("prior variance must be positive", field_name="variance", field_value=variance)
        return cls(
            mean=np.full(num_features, float(mean)),
            stddev=np.full(num_features, float(np.sqrt(variance))),
            gradient_scale=gradient_scale,
        )

    @property
    def num_features(self) -> int:
        return int(self.mean.shape[0])


@dataclass(frozen=True)
class ObservationModel:
    """Learner's stochastic channel O_l(s, a, o)."""

    prob: NDArray[np.float64]

    def __post_init__(self) -> None:
        prob = _frozen(self.prob)
        if prob.ndim != 3:
            raise ValidationError(f"observation model must have shape (S, A, O), got {prob.shape}", field_name="prob")
        _check_rows_stochastic(prob, "observation model")
        object.__setattr__(self, "prob", prob)

    @property
    def num_observations(self) -> int:
        return int(self.prob.shape[2])


@dataclass(frozen=True)
class ObservedTrajectory:
    """Per-timestep observation indices; ``None`` marks an occluded timestep."""

    records: Tuple[Optional[int], ...]

    def __post_init__(self) -> None:
        records = tuple(None if r is None else int(r) for r in self.records)
        if len(records) < 1:
            raise ValidationError("a trajectory needs at least one timestep", field_name="records")
        if any(r is not None and r < 0 for r in records):
            raise ValidationError("observation indices must be non-negative", field_name="records")
        object.__setattr__(self, "records", records)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def occluded_mask(self) -> NDArray[np.bool_]:
        return np.array([r is None for r in self.records], dtype=bool)

    @property
    def num_occluded(self) -> int:
        return sum(r is None for r in self.records)

    def visible_segments(self) -> Tuple[Tuple[int, "ObservedTrajectory"], ...]:
        """Maximal runs of observed timesteps as (offset, sub-trajectory) pairs."""
        segments = []
        start: Optional[int] = None
        for t, record in enumerate(self.records + (None,)):
            if record is not None and start is None:
                start = t
            elif record is None and start is not None:
                segments.append((start, ObservedTrajectory(self.records[start:t])))
                start = None
        return tuple(segments)

    def validate_against(self, num_observations: int) -> None:
        for t, record in enumerate(self.records):
            if record is not None and record >= num_observations:
                raise ValidationError(
                    f"observation {record} at t={t} exceeds the {num_observations} available observations",
                    field_name="records",
                    field_value=record,
                )


@dataclass(frozen=True)
class GroundTruthTrajectory:
    """The expert's actual (s^t, a^t) sequence, retained for evaluation only."""

    states: Tuple[int, ...]
    actions: Tuple[int, ...]

    def __post_init__(self) -> None:
        states = tuple(int(s) for s in self.states)
        actions = tuple(int(a) for a in self.actions)
        if len(states) != len(actions) or not states:
            raise ValidationError("states and actions must be non-empty and of equal length", field_name="states")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "actions", actions)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def steps(self) -> Tuple[Tuple[int, int], ...]:
        return tuple(zip(self.states, self.actions))


class ValueFunctions(NamedTuple):
    q: NDArray[np.float64]
    v: NDArray[np.float64]


@dataclass(frozen=True)
class PosteriorMarginals:
    """Smoothed marginals over flattened pairs x = s * |A| + a.

    ``single`` has shape (T, S*A); ``pairwise`` has shape (T-1, S*A, S*A) or is
    omitted when only single-step marginals were requested.
    """

    single: NDArray[np.float64]
    pairwise: Optional[NDArray[np.float64]] = None


@dataclass(frozen=True)
class OptimalityRegion:
    """Half-space description of the rewards for which ``policy`` stays optimal.

    Each row of ``matrix`` corresponds to a (state, non-policy action) pair in
    ``rows`` and is a linear functional of the flattened reward table equal to
    Q(s, a) - Q(s, pi(s)). The policy is optimal for R exactly when
    ``matrix @ R.ravel() <= 0`` holds row-wise.
    """

    policy: NDArray[np.int64]
    matrix: NDArray[np.float64]
    rows: Tuple[Tuple[int, int], ...] = field(default=())

    def __post_init__(self) -> None:
        matrix = _frozen(self.matrix)
        if not np.all(np.isfinite(matrix)):
            raise ValidationError("optimality region contains non-finite entries", field_name="matrix")
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "policy", _frozen(self.policy, np.int64))


@dataclass(frozen=True)
class GradientCacheEntry:
    """One element of the cache: a policy, its region and dQ/dtheta under it.

    A hit rebuilds Q and the likelihood gradient from ``q_jacobian``.
    """

    policy: NDArray[np.int64]
    region: OptimalityRegion
    q_jacobian: NDArray[np.float64]

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.q_jacobian)):
            raise ValidationError("cached Q-Jacobian must be finite", field_name="q_jacobian")


def check_reward_table(reward: RewardTable, mdp: DiscountedMdp) -> RewardTable:
    reward = np.asarray(reward, dtype=np.float64)
    if reward.shape != (mdp.num_states, mdp.num_actions):
        raise ValidationError(
            f"reward table must have shape ({mdp.num_states}, {mdp.num_actions}), got {reward.shape}",
            field_name="reward",
        )
    if not np.all(np.isfinite(reward)):
        raise ValidationError("reward table contains NaN or infinite entries", field_name="reward")
    return reward


def check_deterministic_policy(policy: Sequence[int], mdp: DiscountedMdp) -> DeterministicPolicy:
    policy = np.asarray(policy, dtype=np.int64)
    if policy.shape != (mdp.num_states,):
        raise ValidationError(f"policy must have shape ({mdp.num_states},)", field_name="policy")
    if np.any(policy < 0) or np.any(policy >= mdp.num_actions):
        raise ValidationError("policy maps a state to an invalid action", field_name="policy")
    return policy


def check_stochastic_policy(policy: StochasticPolicy, mdp: DiscountedMdp) -> StochasticPolicy:
    policy = np.asarray(policy, dtype=np.float64)
    if policy.shape != (mdp.num_states, mdp.num_actions):
        raise ValidationError(
            f"stochastic policy must have shape ({mdp.num_states}, {mdp.num_actions})",
            field_name="policy",
        )
    _check_rows_stochastic(policy, "stochastic policy")
    return policy


def one_hot_policy(policy: DeterministicPolicy, num_actions: int) -> StochasticPolicy:
    """Stochastic view of a deterministic policy."""
    probs = np.zeros((len(policy), num_actions))
    probs[np.arange(len(policy)), policy] = 1.0
    return probs
