"""Exact solvers for finite discounted MDPs: policy iteration, policy evaluation, Boltzmann policies."""

import logging
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.special import softmax

from mmap_birl.models.domain import (
    DeterministicPolicy,
    DiscountedMdp,
    RewardTable,
    StochasticPolicy,
    ValueFunctions,
    check_deterministic_policy,
    check_reward_table,
    check_stochastic_policy,
)
from mmap_birl.utils.error_handling import NumericalError, SolverConvergenceError, ValidationError

logger = logging.getLogger(__name__)

BELLMAN_TOLERANCE = 1e-8
EVALUATION_TOLERANCE = 1e-10
MAX_POLICY_ITERATIONS = 10_000
# Actions whose Q is within this distance of the row maximum count as tied.
TIE_TOLERANCE = 1e-10


def _solve_linear(matrix: NDArray[np.float64], rhs: NDArray[np.float64], operation: str) -> NDArray[np.float64]:
    try:
        solution = np.linalg.solve(matrix, rhs)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"linear solve failed during {operation}: {e}", operation=operation) from e
    if not np.all(np.isfinite(solution)):
        raise NumericalError(f"non-finite solution during {operation}", operation=operation)
    return solution


def greedy_actions(q: NDArray[np.float64]) -> DeterministicPolicy:
    """Argmax per state with ties broken by the smallest action index."""
    best = q.max(axis=1, keepdims=True)
    scale = max(1.0, float(np.max(np.abs(q))))
    return np.argmax(q >= best - TIE_TOLERANCE * scale, axis=1).astype(np.int64)


def evaluate_policy(mdp: DiscountedMdp, reward: RewardTable, policy: Sequence[int]) -> NDArray[np.float64]:
    """Solve v = r^pi + gamma T^pi v directly.

    Args:
        mdp: Decision model.
        reward: Reward table of shape (S, A).
        policy: Deterministic policy, one action index per state.

    Returns:
        State values under ``policy``.
    """
    reward = check_reward_table(reward, mdp)
    policy = check_deterministic_policy(policy, mdp)
    states = np.arange(mdp.num_states)
    r_pi = reward[states, policy]
    t_pi = mdp.transitions[states, policy, :]
    system = np.eye(mdp.num_states) - mdp.discount * t_pi
    v = _solve_linear(system, r_pi, "policy evaluation")

    residual = float(np.max(np.abs(system @ v - r_pi)))
    if residual > EVALUATION_TOLERANCE * max(1.0, float(np.max(np.abs(v)))):
        raise NumericalError(
            f"policy evaluation residual {residual:.3e} exceeds tolerance", operation="policy evaluation"
        )
    return v


def policy_q_values(mdp: DiscountedMdp, reward: RewardTable, policy: StochasticPolicy) -> ValueFunctions:
    """Q and V of a stochastic policy, solved over state-action pairs."""
    reward = check_reward_table(reward, mdp)
    policy = check_stochastic_policy(policy, mdp)
    n = mdp.num_pairs
    pair_transitions = (mdp.transitions[:, :, :, None] * policy[None, None, :, :]).reshape(n, n)
    q = _solve_linear(np.eye(n) - mdp.discount * pair_transitions, reward.ravel(), "stochastic policy evaluation")
    q = q.reshape(mdp.num_states, mdp.num_actions)
    return ValueFunctions(q=q, v=(policy * q).sum(axis=1))


def evaluate_stochastic_policy(
    mdp: DiscountedMdp, reward: RewardTable, policy: StochasticPolicy
) -> NDArray[np.float64]:
    return policy_q_values(mdp, reward, policy).v


def q_from_values(mdp: DiscountedMdp, reward: RewardTable, v: NDArray[np.float64]) -> NDArray[np.float64]:
    return reward + mdp.discount * np.einsum("ijk,k->ij", mdp.transitions, v)


def solve_optimal(
    mdp: DiscountedMdp,
    reward: RewardTable,
    initial_policy: Optional[Sequence[int]] = None,
    max_iterations: int = MAX_POLICY_ITERATIONS,
) -> tuple[DeterministicPolicy, ValueFunctions]:
    """Policy iteration with exact evaluation.

    Args:
        mdp: Decision model.
        reward: Reward table of shape (S, A).
        initial_policy: Optional warm start.
        max_iterations: Cap on improvement sweeps.

    Returns:
        The optimal deterministic policy (ties broken by smallest action index)
        and its Q/V functions.

    Raises:
        SolverConvergenceError: the cap was hit before the Bellman residual
            dropped below tolerance.
    """
    reward = check_reward_table(reward, mdp)
    if initial_policy is None:
        policy = greedy_actions(reward)
    else:
        policy = check_deterministic_policy(initial_policy, mdp).copy()

    residual = np.inf
    states = np.arange(mdp.num_states)
    for iteration in range(1, max_iterations + 1):
        v = evaluate_policy(mdp, reward, policy)
        q = q_from_values(mdp, reward, v)
        best = q.max(axis=1)
        residual = float(np.max(np.abs(best - v)))
        scale = max(1.0, float(np.max(np.abs(q))))
        # Switch only on strict improvement; keeps the iteration from cycling on ties.
        improvable = best > q[states, policy] + TIE_TOLERANCE * scale
        if not np.any(improvable):
            final = greedy_actions(q)
            if not np.array_equal(final, policy):
                v = evaluate_policy(mdp, reward, final)
                q = q_from_values(mdp, reward, v)
            if residual > BELLMAN_TOLERANCE * scale:
                break
            logger.debug(f"Policy iteration converged in {iteration} sweeps (residual {residual:.2e})")
            return final, ValueFunctions(q=q, v=q[states, final])
        policy = np.where(improvable, np.argmax(q, axis=1), policy).astype(np.int64)

    raise SolverConvergenceError(
        f"policy iteration did not converge (last residual {residual:.3e})",
        residual=residual,
        iterations=max_iterations,
    )


def boltzmann(q: NDArray[np.float64], beta: float) -> StochasticPolicy:
    """Boltzmann policy pi(a|s) proportional to exp(beta * Q(s, a))."""
    if beta < 0.0 or not np.isfinite(beta):
        raise ValidationError("beta must be a finite non-negative number", field_name="beta", field_value=beta)
    q = np.asarray(q, dtype=np.float64)
    if not np.all(np.isfinite(q)):
        raise ValidationError("Q-values must be finite", field_name="q")
    return softmax(beta * q, axis=1)
