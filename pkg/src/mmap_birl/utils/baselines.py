"""Comparison learners: occlusion-ignoring MAP-BIRL and a hidden-data EM reconstruction.

The EM learner is rebuilt inside the MAP-BIRL framework (same solver, same
ascent engine, Gaussian prior) so that a comparison isolates marginalization
against expectation-maximization. It is a reconstruction, not a port of the
maximum-entropy HiddenDataEM program.
"""

import logging
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from mmap_birl.models.config import AscentConfig, EmConfig, Method, SegmentStart
from mmap_birl.models.domain import (
    DiscountedMdp,
    FeatureMap,
    FeatureWeights,
    GaussianPrior,
    ObservationModel,
    ObservedTrajectory,
)
from mmap_birl.models.records import AscentResult, EmResult, EmRoundRecord
from mmap_birl.utils.ascent import (
    ExpectedCompleteLikelihood,
    GradientAscent,
    LikelihoodObjective,
    initial_weights,
    maximize_posterior,
    mmap_birl,
)
from mmap_birl.utils.error_handling import ValidationError, ZeroLikelihoodError
from mmap_birl.utils.forward_backward import forward_backward, state_action_occupancy
from mmap_birl.utils.gradients import (
    PolicySnapshot,
    batch_log_likelihood_and_gradient,
    ordered_map,
    policy_snapshot,
    trajectory_log_likelihood_and_gradient,
)
from mmap_birl.utils.reward_model import log_prior

logger = logging.getLogger(__name__)

# E-step posteriors closer than this count as unchanged between rounds.
POSTERIOR_TOLERANCE = 1e-12


class VisibleSegmentLikelihood(LikelihoodObjective):
    """Each maximal visible run is scored as an independent trajectory.

    A segment starting at offset t > 0 begins from the state occupancy of the
    current Boltzmann policy at step t (held fixed when differentiating), or
    from a uniform distribution when ``segment_start`` is ``uniform``.
    """

    def __init__(
        self,
        mdp: DiscountedMdp,
        obs_model: ObservationModel,
        batch: Sequence[ObservedTrajectory],
        segment_start: SegmentStart = SegmentStart.OCCUPANCY,
        jobs: int = 1,
    ):
        self.mdp = mdp
        self.obs_model = obs_model
        self.segment_start = segment_start
        self.jobs = jobs
        self.segments: List[Tuple[int, int, ObservedTrajectory]] = [
            (index, offset, segment)
            for index, trajectory in enumerate(batch)
            for offset, segment in trajectory.visible_segments()
        ]
        self._latest_offset = max((offset for _, offset, _ in self.segments), default=0)

    def _start_distributions(self, snapshot: PolicySnapshot) -> List[Optional[NDArray[np.float64]]]:
        if self.segment_start == SegmentStart.UNIFORM:
            uniform = np.full(self.mdp.num_states, 1.0 / self.mdp.num_states)
            return [None if offset == 0 else uniform for _, offset, _ in self.segments]
        occupancy = state_action_occupancy(self.mdp, snapshot.policy, self._latest_offset + 1)
        states = occupancy.reshape(len(occupancy), self.mdp.num_states, self.mdp.num_actions).sum(axis=2)
        return [None if offset == 0 else states[offset] for _, offset, _ in self.segments]

    def evaluate(self, snapshot: PolicySnapshot) -> Tuple[float, NDArray[np.float64]]:
        starts = self._start_distributions(snapshot)

        def one(position: int) -> Tuple[float, NDArray[np.float64]]:
            index, offset, segment = self.segments[position]
            try:
                return trajectory_log_likelihood_and_gradient(
                    self.mdp, snapshot, self.obs_model, segment, state_distribution=starts[position]
                )
            except ZeroLikelihoodError as e:
                raise ZeroLikelihoodError(
                    f"trajectory {index}, segment at t={offset}: {e.message}",
                    trajectory_index=index,
                    timestep=offset + (e.timestep or 0),
                ) from e

        total = 0.0
        gradient = np.zeros(snapshot.score.shape[2])
        for log_likelihood, segment_gradient in ordered_map(one, list(range(len(self.segments))), self.jobs):
            total += log_likelihood
            gradient = gradient + segment_gradient
        return total, gradient


def ignore_occlusion_map_birl(
    mdp: DiscountedMdp,
    batch: Sequence[ObservedTrajectory],
    obs_model: ObservationModel,
    features: FeatureMap,
    prior: GaussianPrior,
    config: AscentConfig,
    segment_start: SegmentStart = SegmentStart.OCCUPANCY,
    restarts: int = 1,
    jobs: int = 1,
    record_timing: bool = True,
) -> AscentResult:
    """MAP-BIRL that uses only the observed portions of each demonstration."""
    if not batch:
        raise ValidationError("at least one demonstration is required", field_name="batch")
    mdp = mdp.with_discount(config.discount)
    objective = VisibleSegmentLikelihood(mdp, obs_model, batch, segment_start, jobs)
    logger.info(f"Occlusion-ignoring MAP-BIRL on {len(objective.segments)} visible segments")
    return maximize_posterior(mdp, features, prior, objective, config, restarts, record_timing)


def _e_step(
    mdp: DiscountedMdp,
    snapshot: PolicySnapshot,
    obs_model: ObservationModel,
    batch: Sequence[ObservedTrajectory],
    jobs: int,
) -> List[NDArray[np.float64]]:
    def one(trajectory: ObservedTrajectory) -> NDArray[np.float64]:
        return forward_backward(mdp, snapshot.policy, obs_model, trajectory, with_pairwise=False)[1].single

    return ordered_map(one, list(batch), jobs)


def _posteriors_unchanged(old: Optional[List[NDArray[np.float64]]], new: List[NDArray[np.float64]]) -> bool:
    if old is None:
        return False
    return all(float(np.max(np.abs(a - b))) < POSTERIOR_TOLERANCE for a, b in zip(old, new))


def _run_em(
    mdp: DiscountedMdp,
    batch: Sequence[ObservedTrajectory],
    obs_model: ObservationModel,
    features: FeatureMap,
    prior: GaussianPrior,
    config: EmConfig,
    start: FeatureWeights,
    jobs: int,
    record_timing: bool,
) -> Tuple[EmResult, float]:
    ascent = config.inner_ascent
    theta = np.asarray(start, dtype=np.float64)
    rounds: List[EmRoundRecord] = []
    previous: Optional[List[NDArray[np.float64]]] = None
    converged = False
    log_posterior = -np.inf

    for round_number in range(1, config.em_max_rounds + 1):
        snapshot = policy_snapshot(mdp, features, theta, ascent.beta)
        theta_prior = log_prior(theta, prior)
        log_posterior = batch_log_likelihood_and_gradient(mdp, snapshot, obs_model, batch, jobs)[0] + theta_prior
        posteriors = _e_step(mdp, snapshot, obs_model, batch, jobs)
        if _posteriors_unchanged(previous, posteriors):
            converged = True
            break
        previous = posteriors

        objective = ExpectedCompleteLikelihood(mdp, posteriors)
        surrogate_before = objective.evaluate(snapshot)[0] + theta_prior
        inner = GradientAscent(mdp, features, prior, objective, ascent, record_timing).run(theta)
        candidate = inner.theta
        surrogate_after = (
            objective.evaluate(policy_snapshot(mdp, features, candidate, ascent.beta))[0]
            + log_prior(candidate, prior)
        )
        # Generalized EM: a round may only keep weights that do not lower the surrogate.
        accepted = surrogate_after >= surrogate_before
        if not accepted:
            logger.warning(f"EM round {round_number}: M-step lowered the surrogate, stopping with the previous weights")
        new_theta = candidate if accepted else theta
        change = float(np.max(np.abs(new_theta - theta)))
        rounds.append(
            EmRoundRecord(
                round=round_number,
                log_posterior=log_posterior,
                surrogate_before=surrogate_before,
                surrogate_after=surrogate_after if accepted else surrogate_before,
                accepted=accepted,
                max_weight_change=change,
                inner_iterations=inner.iterations,
            )
        )
        logger.debug(
            f"EM round {round_number}: log posterior {log_posterior:.6f}, "
            f"surrogate {surrogate_before:.6f} -> {surrogate_after:.6f}, change {change:.2e}"
        )
        theta = new_theta
        if not accepted:
            break
        if change < config.em_tolerance:
            converged = True
            break

    snapshot = policy_snapshot(mdp, features, theta, ascent.beta)
    log_posterior = batch_log_likelihood_and_gradient(mdp, snapshot, obs_model, batch, jobs)[0]
    log_posterior += log_prior(theta, prior)
    return EmResult(weights=theta.tolist(), converged=converged, rounds=rounds), float(log_posterior)


def hidden_data_em(
    mdp: DiscountedMdp,
    batch: Sequence[ObservedTrajectory],
    obs_model: ObservationModel,
    features: FeatureMap,
    prior: GaussianPrior,
    config: EmConfig,
    restarts: int = 1,
    jobs: int = 1,
    record_timing: bool = True,
) -> EmResult:
    """Expectation-maximization over the hidden (s, a) pairs.

    The E-step computes single-step posteriors over (s, a) under the current
    weights. The M-step runs the shared ascent on the expected complete-data
    log posterior with those posteriors frozen. Rounds stop when the weights
    move by less than ``config.em_tolerance`` (max-norm), when the E-step no
    longer changes, or after ``config.em_max_rounds``. A round whose M-step
    lowers the surrogate is rejected and ends the run unconverged.
    """
    if not batch:
        raise ValidationError("at least one demonstration is required", field_name="batch")
    mdp = mdp.with_discount(config.inner_ascent.discount)
    logger.info(f"Hidden-data EM on {len(batch)} trajectories, up to {config.em_max_rounds} rounds")

    best: Optional[Tuple[EmResult, float]] = None
    for restart in range(restarts):
        start = initial_weights(prior, config.inner_ascent.seed, restart)
        outcome = _run_em(mdp, batch, obs_model, features, prior, config, start, jobs, record_timing)
        if best is None or outcome[1] > best[1]:
            best = outcome
    assert best is not None
    return best[0]


class LearnedReward(NamedTuple):
    weights: NDArray[np.float64]
    converged: bool
    diagnostics: List[Dict[str, Any]]


def run_learner(
    method: Method,
    mdp: DiscountedMdp,
    batch: Sequence[ObservedTrajectory],
    obs_model: ObservationModel,
    features: FeatureMap,
    prior: GaussianPrior,
    ascent: AscentConfig,
    em: Optional[EmConfig] = None,
    segment_start: SegmentStart = SegmentStart.OCCUPANCY,
    restarts: int = 1,
    jobs: int = 1,
    record_timing: bool = True,
) -> LearnedReward:
    """Dispatch to the learner selected by ``method``.

    Diagnostics are per-iteration records for the ascent learners and
    per-round records for EM.
    """
    if method == Method.MMAP:
        result = mmap_birl(mdp, batch, obs_model, features, prior, ascent, restarts, jobs, record_timing)
    elif method == Method.IGNORE:
        result = ignore_occlusion_map_birl(
            mdp, batch, obs_model, features, prior, ascent, segment_start, restarts, jobs, record_timing
        )
    else:
        em_config = (em or EmConfig()).with_ascent(ascent)
        em_result = hidden_data_em(mdp, batch, obs_model, features, prior, em_config, restarts, jobs, record_timing)
        return LearnedReward(em_result.theta, em_result.converged, [r.model_dump() for r in em_result.rounds])
    return LearnedReward(result.theta, result.converged, [r.model_dump() for r in result.records])
