"""Evaluation metrics: inverse learning error, sort precision/recall and policy agreement."""

from typing import Optional, Tuple, Union

import numpy as np
from numpy.typing import NDArray

from mmap_birl.models.domain import (
    DeterministicPolicy,
    DiscountedMdp,
    RewardTable,
    StochasticPolicy,
    one_hot_policy,
)
from mmap_birl.models.records import ConfusionCounts
from mmap_birl.utils.error_handling import ValidationError
from mmap_birl.utils.mdp_solver import evaluate_policy, evaluate_stochastic_policy

AnyPolicy = Union[DeterministicPolicy, StochasticPolicy]


def policy_values(mdp: DiscountedMdp, reward: RewardTable, policy: AnyPolicy) -> NDArray[np.float64]:
    """V^pi under ``reward``; accepts an action vector or a (S, A) probability table."""
    policy = np.asarray(policy)
    if policy.ndim == 1:
        return evaluate_policy(mdp, reward, policy)
    return evaluate_stochastic_policy(mdp, reward, policy)


def inverse_learning_error(
    mdp: DiscountedMdp,
    true_reward: RewardTable,
    expert_policy: AnyPolicy,
    learned_policy: AnyPolicy,
    norm: str = "l1",
) -> float:
    """sum_s |V^E(s) - V^L(s)| under the true reward (``norm="squared"`` squares the differences)."""
    difference = policy_values(mdp, true_reward, expert_policy) - policy_values(mdp, true_reward, learned_policy)
    if norm == "l1":
        return float(np.sum(np.abs(difference)))
    if norm == "squared":
        return float(np.sum(difference**2))
    raise ValidationError(f"unknown ILE norm '{norm}'", field_name="norm", field_value=norm)


def precision_recall(counts: ConfusionCounts) -> Tuple[Optional[float], Optional[float]]:
    """TP / (TP + FP) and TP / (TP + FN); ``None`` where a denominator is zero."""
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp > 0 else None
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn > 0 else None
    return precision, recall


def state_visitation(mdp: DiscountedMdp, policy: AnyPolicy, horizon: int) -> NDArray[np.float64]:
    """Expected visit counts per state over ``horizon`` steps from the start distribution."""
    policy = np.asarray(policy)
    probs = one_hot_policy(policy, mdp.num_actions) if policy.ndim == 1 else policy
    t_pi = np.einsum("sa,sat->st", probs, mdp.transitions)
    occupancy = mdp.initial_distribution.copy()
    visits = np.zeros(mdp.num_states)
    for _ in range(horizon):
        visits += occupancy
        occupancy = occupancy @ t_pi
    return visits


def policy_agreement(
    expert: DeterministicPolicy, learned: DeterministicPolicy, visits: Optional[NDArray[np.float64]] = None
) -> float:
    """Fraction of states (with positive ``visits`` when given) where both policies pick the same action."""
    expert, learned = np.asarray(expert), np.asarray(learned)
    mask = np.ones(expert.shape, dtype=bool) if visits is None else np.asarray(visits) > 0.0
    if not mask.any():
        raise ValidationError("no states to compare", field_name="visits")
    return float(np.mean(expert[mask] == learned[mask]))
