"""Reward-space regions in which a deterministic policy stays optimal."""

from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from mmap_birl.models.domain import (
    DiscountedMdp,
    OptimalityRegion,
    RewardTable,
    check_deterministic_policy,
)
from mmap_birl.utils.error_handling import NumericalError, ValidationError

REGION_TOLERANCE = 1e-9


def policy_q_operator(mdp: DiscountedMdp, policy: Sequence[int]) -> NDArray[np.float64]:
    """Matrix G with Q^pi = G @ R.ravel() for any reward table R.

    G = I + gamma * T (I - gamma * T^pi)^-1 E^pi, where E^pi picks R(s, pi(s)).
    """
    policy = check_deterministic_policy(policy, mdp)
    num_states, n = mdp.num_states, mdp.num_pairs
    states = np.arange(num_states)
    selector = np.zeros((num_states, n))
    selector[states, states * mdp.num_actions + policy] = 1.0
    t_pi = mdp.transitions[states, policy, :]
    try:
        values_of_reward = np.linalg.solve(np.eye(num_states) - mdp.discount * t_pi, selector)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"optimality region solve failed: {e}", operation="reward_optimality_region") from e
    return np.eye(n) + mdp.discount * mdp.transitions.reshape(n, num_states) @ values_of_reward


def reward_optimality_region(mdp: DiscountedMdp, policy: Sequence[int]) -> OptimalityRegion:
    """Half-spaces H with pi optimal for R exactly when H @ R.ravel() <= 0.

    Row (s, a) for every non-policy action a equals Q^pi(s, a) - Q^pi(s, pi(s)).
    """
    policy = check_deterministic_policy(policy, mdp)
    operator = policy_q_operator(mdp, policy)
    num_actions = mdp.num_actions
    rows = [(s, a) for s in range(mdp.num_states) for a in range(num_actions) if a != policy[s]]
    if rows:
        matrix = np.stack(
            [operator[s * num_actions + a] - operator[s * num_actions + policy[s]] for s, a in rows]
        )
    else:
        matrix = np.zeros((0, mdp.num_pairs))
    return OptimalityRegion(policy=policy, matrix=matrix, rows=tuple(rows))


def region_slack(region: OptimalityRegion, reward: RewardTable) -> NDArray[np.float64]:
    """H @ R; the largest entry is the worst violation of optimality."""
    flat = np.asarray(reward, dtype=np.float64).ravel()
    if flat.shape[0] != region.matrix.shape[1]:
        raise ValidationError("reward table does not match the optimality region", field_name="reward")
    return region.matrix @ flat


def gradient_reusable(region: OptimalityRegion, new_reward: RewardTable) -> bool:
    """True when the region's policy remains optimal for ``new_reward``."""
    slack = region_slack(region, new_reward)
    if slack.size == 0:
        return True
    tolerance = REGION_TOLERANCE * max(1.0, float(np.max(np.abs(new_reward))))
    return bool(np.all(slack <= tolerance))
