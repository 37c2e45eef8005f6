"""Analytic gradients of the Boltzmann policy and of the marginal log likelihood."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
from numpy.typing import NDArray

from mmap_birl.models.domain import (
    DeterministicPolicy,
    DiscountedMdp,
    FeatureMap,
    FeatureWeights,
    ObservationModel,
    ObservedTrajectory,
    StochasticPolicy,
    check_stochastic_policy,
    one_hot_policy,
)
from mmap_birl.utils.error_handling import NumericalError, ValidationError, ZeroLikelihoodError
from mmap_birl.utils.forward_backward import forward_backward, pair_transition_matrix
from mmap_birl.utils.mdp_solver import boltzmann, solve_optimal
from mmap_birl.utils.reward_model import reward_of

logger = logging.getLogger(__name__)

Q_GRADIENT_TOLERANCE = 1e-9

ItemT = TypeVar("ItemT")
ResultT = TypeVar("ResultT")


def ordered_map(fn: Callable[[ItemT], ResultT], items: Sequence[ItemT], jobs: int = 1) -> List[ResultT]:
    """Map ``fn`` over ``items`` on up to ``jobs`` threads, preserving input order."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(jobs, len(items))) as executor:
        return list(executor.map(fn, items))


def q_gradient(mdp: DiscountedMdp, policy: StochasticPolicy, features: FeatureMap) -> NDArray[np.float64]:
    """dQ/dtheta under a fixed policy, shape (S, A, K).

    Solves dQ = phi + gamma * M_pi dQ for all features at once, where M_pi is
    the pair transition matrix of ``policy``.
    """
    policy = check_stochastic_policy(policy, mdp)
    if features.phi.shape[:2] != (mdp.num_states, mdp.num_actions):
        raise ValidationError("feature map does not match the MDP", field_name="features")
    n, k = mdp.num_pairs, features.num_features
    system = np.eye(n) - mdp.discount * pair_transition_matrix(mdp, policy)
    rhs = features.phi.reshape(n, k)
    try:
        dq = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"Q-gradient solve failed: {e}", operation="q_gradient") from e
    residual = float(np.max(np.abs(system @ dq - rhs))) if dq.size else 0.0
    if not np.isfinite(residual) or residual > Q_GRADIENT_TOLERANCE * max(1.0, float(np.max(np.abs(dq)))):
        raise NumericalError(f"Q-gradient residual {residual:.3e} exceeds tolerance", operation="q_gradient")
    return dq.reshape(mdp.num_states, mdp.num_actions, k)


def policy_score(policy: StochasticPolicy, dq: NDArray[np.float64], beta: float) -> NDArray[np.float64]:
    """d log pi(a|s) / d theta = beta * (dQ(s, a) - sum_a' pi(a'|s) dQ(s, a'))."""
    if dq.shape[:2] != policy.shape:
        raise ValidationError("policy and Q-gradient shapes disagree", field_name="dq")
    expected = np.einsum("sa,sak->sk", policy, dq)
    return beta * (dq - expected[:, None, :])


@dataclass(frozen=True)
class PolicySnapshot:
    """Everything derived from one weight vector: optimal policy, Boltzmann policy and score."""

    weights: FeatureWeights
    greedy: DeterministicPolicy
    q: NDArray[np.float64]
    q_jacobian: NDArray[np.float64]
    policy: StochasticPolicy
    score: NDArray[np.float64]


def snapshot_from_jacobian(
    weights: FeatureWeights, greedy: DeterministicPolicy, q_jacobian: NDArray[np.float64], beta: float
) -> PolicySnapshot:
    """Rebuild a snapshot without policy iteration when ``greedy`` is known to stay optimal.

    Under a fixed optimal policy Q* is linear in theta, so Q* = (dQ/dtheta) theta.
    """
    q = q_jacobian @ weights
    policy = boltzmann(q, beta)
    return PolicySnapshot(
        weights=np.asarray(weights, dtype=np.float64),
        greedy=greedy,
        q=q,
        q_jacobian=q_jacobian,
        policy=policy,
        score=policy_score(policy, q_jacobian, beta),
    )


def policy_snapshot(
    mdp: DiscountedMdp,
    features: FeatureMap,
    weights: FeatureWeights,
    beta: float,
    initial_policy: Optional[DeterministicPolicy] = None,
) -> PolicySnapshot:
    """Solve the MDP for R_theta and differentiate the resulting Boltzmann policy."""
    reward = reward_of(weights, features)
    greedy, values = solve_optimal(mdp, reward, initial_policy=initial_policy)
    q_jacobian = q_gradient(mdp, one_hot_policy(greedy, mdp.num_actions), features)
    policy = boltzmann(values.q, beta)
    return PolicySnapshot(
        weights=np.asarray(weights, dtype=np.float64),
        greedy=greedy,
        q=values.q,
        q_jacobian=q_jacobian,
        policy=policy,
        score=policy_score(policy, q_jacobian, beta),
    )


def trajectory_log_likelihood_and_gradient(
    mdp: DiscountedMdp,
    snapshot: PolicySnapshot,
    obs_model: ObservationModel,
    trajectory: ObservedTrajectory,
    state_distribution: Optional[NDArray[np.float64]] = None,
) -> Tuple[float, NDArray[np.float64]]:
    """Log marginal likelihood of one trajectory and its gradient as an expected score."""
    log_likelihood, marginals = forward_backward(
        mdp, snapshot.policy, obs_model, trajectory, with_pairwise=False, state_distribution=state_distribution
    )
    flat_score = snapshot.score.reshape(mdp.num_pairs, -1)
    gradient = marginals.single.sum(axis=0) @ flat_score
    return log_likelihood, gradient


def batch_log_likelihood_and_gradient(
    mdp: DiscountedMdp,
    snapshot: PolicySnapshot,
    obs_model: ObservationModel,
    batch: Sequence[ObservedTrajectory],
    jobs: int = 1,
) -> Tuple[float, NDArray[np.float64]]:
    """Sum over the batch with a fixed reduction order, independent of ``jobs``."""

    def one(indexed: Tuple[int, ObservedTrajectory]) -> Tuple[float, NDArray[np.float64]]:
        index, trajectory = indexed
        try:
            return trajectory_log_likelihood_and_gradient(mdp, snapshot, obs_model, trajectory)
        except ZeroLikelihoodError as e:
            raise ZeroLikelihoodError(
                f"trajectory {index}: {e.message}", trajectory_index=index, timestep=e.timestep
            ) from e

    results = ordered_map(one, list(enumerate(batch)), jobs)
    total = 0.0
    gradient = np.zeros(snapshot.score.shape[2])
    for log_likelihood, trajectory_gradient in results:
        total += log_likelihood
        gradient = gradient + trajectory_gradient
    return total, gradient


def likelihood_gradient(
    mdp: DiscountedMdp,
    weights: FeatureWeights,
    batch: Sequence[ObservedTrajectory],
    obs_model: ObservationModel,
    features: FeatureMap,
    beta: float,
    jobs: int = 1,
) -> NDArray[np.float64]:
    """Gradient of the summed log marginal likelihood of ``batch`` at ``weights``."""
    snapshot = policy_snapshot(mdp, features, weights, beta)
    return batch_log_likelihood_and_gradient(mdp, snapshot, obs_model, batch, jobs)[1]


def log_marginal_likelihood(
    mdp: DiscountedMdp,
    weights: FeatureWeights,
    batch: Sequence[ObservedTrajectory],
    obs_model: ObservationModel,
    features: FeatureMap,
    beta: float,
) -> float:
    """Sum over the batch of log sum_{Z, tau} Pr(Y, Z, tau | R_theta)."""
    snapshot = policy_snapshot(mdp, features, weights, beta)
    return batch_log_likelihood_and_gradient(mdp, snapshot, obs_model, batch)[0]
