"""Learner observation models, occlusion masks and the demonstration simulator.

Observations default to the joint state-action space: o = s * |A| + a.
"""

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from mmap_birl.models.config import OcclusionMode, OcclusionSpec
from mmap_birl.models.domain import (
    DiscountedMdp,
    GroundTruthTrajectory,
    ObservationModel,
    ObservedTrajectory,
    StochasticPolicy,
    check_stochastic_policy,
)
from mmap_birl.utils.error_handling import ValidationError

logger = logging.getLogger(__name__)

# Named random sub-streams; each draw site derives its generator from
# (seed, stream, index...) so toggling one feature never shifts another.
GENERATION_STREAM = 0
OCCLUSION_STREAM = 1
INITIALIZATION_STREAM = 2
SORT_STREAM = 3


def derived_rng(seed: int, *path: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), *(int(p) for p in path)])


def encode_observation(state: int, action: int, num_actions: int) -> int:
    return state * num_actions + action


def decode_observation(observation: int, num_actions: int) -> Tuple[int, int]:
    return divmod(observation, num_actions)


def identity_observation_model(num_states: int, num_actions: int) -> ObservationModel:
    """Noise-free channel: each (s, a) is observed as its own encoding."""
    n = num_states * num_actions
    return ObservationModel(np.eye(n).reshape(num_states, num_actions, n))


def confusion_observation_model(
    num_states: int, num_actions: int, noise: float, confusion: NDArray[np.float64]
) -> ObservationModel:
    """(1 - noise) on the true (s, a) plus ``noise`` times a confusion distribution.

    Args:
        num_states: |S|.
        num_actions: |A|.
        noise: Total confusion mass in [0, 1] for rows that have a confusion target.
        confusion: Tensor (S, A, S*A). Rows that sum to zero are observed exactly.
    """
    if not 0.0 <= noise <= 1.0:
        raise ValidationError("noise must lie in [0, 1]", field_name="noise", field_value=noise)
    n = num_states * num_actions
    confusion = np.asarray(confusion, dtype=np.float64)
    if confusion.shape != (num_states, num_actions, n):
        raise ValidationError(
            f"confusion kernel must have shape ({num_states}, {num_actions}, {n})", field_name="confusion"
        )
    identity = np.eye(n).reshape(num_states, num_actions, n)
    mass = confusion.sum(axis=2, keepdims=True)
    noisy = mass[..., 0] > 0.0
    normalized = np.divide(confusion, mass, out=np.zeros_like(confusion), where=mass > 0.0)
    prob = np.where(noisy[..., None], (1.0 - noise) * identity + noise * normalized, identity)
    return ObservationModel(prob)


def sample_observation(model: ObservationModel, state: int, action: int, rng: np.random.Generator) -> int:
    """Draw o ~ O_l(state, action, .)."""
    return int(rng.choice(model.num_observations, p=model.prob[state, action]))


def occlusion_block_length(rate: float, horizon: int) -> int:
    """Contiguous block length, rate * horizon rounded half up."""
    return min(horizon, int(math.floor(rate * horizon + 0.5)))


def apply_occlusion(
    observations: Sequence[Optional[int]], spec: OcclusionSpec, rng: np.random.Generator
) -> ObservedTrajectory:
    """Mask timesteps per ``spec``; occluded slots are kept and marked, never dropped."""
    records: List[Optional[int]] = list(observations)
    horizon = len(records)
    if spec.mode == OcclusionMode.CONTIGUOUS:
        length = occlusion_block_length(spec.rate, horizon)
        if length > 0:
            start = int(rng.integers(0, horizon - length + 1))
            for t in range(start, start + length):
                records[t] = None
    else:
        mask = rng.random(horizon) < spec.rate
        records = [None if hidden else r for r, hidden in zip(records, mask)]
    return ObservedTrajectory(tuple(records))


def rollout(
    mdp: DiscountedMdp, policy: StochasticPolicy, horizon: int, rng: np.random.Generator
) -> GroundTruthTrajectory:
    """s^1 ~ Pr(s^1), a^t ~ pi(.|s^t), s^{t+1} ~ T(s^t, a^t, .)."""
    states, actions = [], []
    state = int(rng.choice(mdp.num_states, p=mdp.initial_distribution))
    for t in range(horizon):
        action = int(rng.choice(mdp.num_actions, p=policy[state]))
        states.append(state)
        actions.append(action)
        if t + 1 < horizon:
            state = int(rng.choice(mdp.num_states, p=mdp.transitions[state, action]))
    return GroundTruthTrajectory(tuple(states), tuple(actions))


def simulate_demonstrations(
    mdp: DiscountedMdp,
    expert_policy: StochasticPolicy,
    obs_model: ObservationModel,
    horizon: int,
    occlusion: OcclusionSpec,
    num_trajectories: int,
    seed: int,
) -> Tuple[List[ObservedTrajectory], List[GroundTruthTrajectory]]:
    """Generate observed demonstrations and their hidden ground truth.

    Each trajectory ``i`` draws from its own generators derived from
    (seed, stream, i), so output does not depend on generation order.
    """
    if horizon < 1:
        raise ValidationError("horizon must be at least 1", field_name="horizon", field_value=horizon)
    expert_policy = check_stochastic_policy(expert_policy, mdp)
    if obs_model.prob.shape[:2] != (mdp.num_states, mdp.num_actions):
        raise ValidationError("observation model does not match the MDP", field_name="obs_model")

    observed: List[ObservedTrajectory] = []
    truth: List[GroundTruthTrajectory] = []
    for index in range(num_trajectories):
        generation = derived_rng(seed, GENERATION_STREAM, index)
        ground = rollout(mdp, expert_policy, horizon, generation)
        observations = [sample_observation(obs_model, s, a, generation) for s, a in ground.steps]
        observed.append(apply_occlusion(observations, occlusion, derived_rng(seed, OCCLUSION_STREAM, index)))
        truth.append(ground)

    logger.debug(
        f"Simulated {num_trajectories} demonstrations of length {horizon} "
        f"({occlusion.mode.value} occlusion at rate {occlusion.rate})"
    )
    return observed, truth
