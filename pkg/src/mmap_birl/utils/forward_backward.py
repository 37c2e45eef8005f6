"""Exact marginalization over the hidden state-action chain of a demonstration.

The hidden variable at step t is the pair x^t = (s^t, a^t), flattened as
x = s * |A| + a. The chain has

* initial factor   Pr(s^1) pi(a^1 | s^1)
* transition factor T(s^t, a^t, s^{t+1}) pi(a^{t+1} | s^{t+1})
* emission factor  O_l(s^t, a^t, o^t) when observed, 1 when occluded.
"""

import itertools
import logging
from typing import Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from mmap_birl.models.domain import (
    DiscountedMdp,
    ObservationModel,
    ObservedTrajectory,
    PosteriorMarginals,
    StochasticPolicy,
)
from mmap_birl.utils.error_handling import EnumerationLimitError, NumericalError, ValidationError, ZeroLikelihoodError

logger = logging.getLogger(__name__)

ENUMERATION_LIMIT = 10**7


def pair_transition_matrix(mdp: DiscountedMdp, policy: StochasticPolicy) -> NDArray[np.float64]:
    """M[x, x'] = T(s, a, s') pi(a' | s')."""
    n = mdp.num_pairs
    return (mdp.transitions[:, :, :, None] * policy[None, None, :, :]).reshape(n, n)


def initial_pair_distribution(
    policy: StochasticPolicy, state_distribution: NDArray[np.float64]
) -> NDArray[np.float64]:
    return (state_distribution[:, None] * policy).ravel()


def emission_matrix(obs_model: ObservationModel, trajectory: ObservedTrajectory) -> NDArray[np.float64]:
    """Row t holds O_l(x, o^t) for every pair x, or ones when t is occluded."""
    trajectory.validate_against(obs_model.num_observations)
    flat = obs_model.prob.reshape(-1, obs_model.num_observations)
    emissions = np.ones((len(trajectory), flat.shape[0]))
    for t, record in enumerate(trajectory.records):
        if record is not None:
            emissions[t] = flat[:, record]
    return emissions


def state_action_occupancy(
    mdp: DiscountedMdp, policy: StochasticPolicy, horizon: int,
    state_distribution: Optional[NDArray[np.float64]] = None,
) -> NDArray[np.float64]:
    """Marginal distribution of x^t with no evidence, for t = 1..horizon."""
    start = mdp.initial_distribution if state_distribution is None else state_distribution
    transition = pair_transition_matrix(mdp, policy)
    occupancy = np.empty((horizon, mdp.num_pairs))
    occupancy[0] = initial_pair_distribution(policy, start)
    for t in range(1, horizon):
        occupancy[t] = occupancy[t - 1] @ transition
    return occupancy


def _support_is_empty(
    start: NDArray[np.float64], transition: NDArray[np.float64], emissions: NDArray[np.float64], upto: int
) -> bool:
    """Exact zero test using boolean reachability, immune to underflow."""
    reachable = (start > 0.0) & (emissions[0] > 0.0)
    edges = transition > 0.0
    for t in range(1, upto + 1):
        reachable = (reachable.astype(np.int64) @ edges > 0) & (emissions[t] > 0.0)
    return not reachable.any()


def forward_backward(
    mdp: DiscountedMdp,
    policy: StochasticPolicy,
    obs_model: ObservationModel,
    trajectory: ObservedTrajectory,
    with_pairwise: bool = True,
    state_distribution: Optional[NDArray[np.float64]] = None,
) -> Tuple[float, PosteriorMarginals]:
    """Scaled forward-backward over the (s, a) chain.

    Args:
        mdp: Decision model supplying T and Pr(s^1).
        policy: Stochastic policy pi(a | s).
        obs_model: Observation model O_l.
        trajectory: Observed records, with occluded slots marked.
        with_pairwise: Also return pairwise marginals of consecutive pairs.
        state_distribution: Overrides Pr(s^1), e.g. for a segment starting mid-trajectory.

    Returns:
        log of sum over Z and tau of Pr(Y, Z, tau | R), and the smoothed marginals.

    Raises:
        ZeroLikelihoodError: the observations have probability exactly zero.
        NumericalError: a scaling constant underflowed although the support is non-empty.
    """
    if len(trajectory) < 1:
        raise ValidationError("trajectory must have at least one timestep", field_name="trajectory")
    start_states = mdp.initial_distribution if state_distribution is None else state_distribution
    transition = pair_transition_matrix(mdp, policy)
    start = initial_pair_distribution(policy, start_states)
    emissions = emission_matrix(obs_model, trajectory)
    horizon, n = emissions.shape

    alpha = np.empty((horizon, n))
    scale = np.empty(horizon)
    for t in range(horizon):
        unnormalized = (start if t == 0 else alpha[t - 1] @ transition) * emissions[t]
        scale[t] = unnormalized.sum()
        if not scale[t] > 0.0:
            if _support_is_empty(start, transition, emissions, t):
                raise ZeroLikelihoodError(
                    f"observation at t={t} has zero probability under the model", timestep=t
                )
            raise NumericalError(f"forward pass underflowed at t={t}", operation="forward_backward")
        alpha[t] = unnormalized / scale[t]

    beta = np.empty((horizon, n))
    beta[-1] = 1.0
    for t in range(horizon - 2, -1, -1):
        beta[t] = transition @ (emissions[t + 1] * beta[t + 1]) / scale[t + 1]

    single = alpha * beta
    single /= single.sum(axis=1, keepdims=True)

    pairwise = None
    if with_pairwise and horizon > 1:
        pairwise = (
            alpha[:-1, :, None]
            * transition[None, :, :]
            * (emissions[1:] * beta[1:])[:, None, :]
            / scale[1:, None, None]
        )

    log_likelihood = float(np.sum(np.log(scale)))
    return log_likelihood, PosteriorMarginals(single=single, pairwise=pairwise)


def _enumerated_joint(
    mdp: DiscountedMdp,
    policy: StochasticPolicy,
    obs_model: ObservationModel,
    trajectory: ObservedTrajectory,
    limit: int,
) -> NDArray[np.float64]:
    """Joint probability of every completion tau, as a tensor with one axis per timestep."""
    horizon = len(trajectory)
    size = mdp.num_pairs**horizon
    if size > limit:
        raise EnumerationLimitError(
            f"enumerating {mdp.num_pairs}^{horizon} = {size} completions exceeds the limit {limit}",
            size=size,
            limit=limit,
        )
    transition = pair_transition_matrix(mdp, policy)
    emissions = emission_matrix(obs_model, trajectory)
    joint = initial_pair_distribution(policy, mdp.initial_distribution) * emissions[0]
    for t in range(1, horizon):
        joint = joint[..., :, None] * (transition * emissions[t][None, :])
    return joint


def brute_force_likelihood(
    mdp: DiscountedMdp,
    policy: StochasticPolicy,
    obs_model: ObservationModel,
    trajectory: ObservedTrajectory,
    limit: int = ENUMERATION_LIMIT,
) -> float:
    """Sum of Pr(Y, tau | R) over every hidden completion, by direct enumeration."""
    return float(_enumerated_joint(mdp, policy, obs_model, trajectory, limit).sum())


def brute_force_log_likelihood_gradient(
    mdp: DiscountedMdp,
    policy: StochasticPolicy,
    obs_model: ObservationModel,
    trajectory: ObservedTrajectory,
    score: NDArray[np.float64],
    limit: int = ENUMERATION_LIMIT,
) -> NDArray[np.float64]:
    """Gradient of the enumerated log likelihood, summed term by term over completions.

    ``score`` is d log pi(a|s) / d theta with shape (S, A, K).
    """
    joint = _enumerated_joint(mdp, policy, obs_model, trajectory, limit)
    total = joint.sum()
    if total <= 0.0:
        raise ZeroLikelihoodError("trajectory has zero probability under the model")
    flat_score = score.reshape(mdp.num_pairs, -1)
    horizon = len(trajectory)
    gradient = np.zeros(flat_score.shape[1])
    for completion in itertools.product(range(mdp.num_pairs), repeat=horizon):
        weight = joint[completion]
        if weight > 0.0:
            gradient += weight * flat_score[list(completion)].sum(axis=0)
    return gradient / total
