"""Gradient ascent on the log posterior over feature weights, with optimality-region caching.

The loop is shared by the marginalizing learner and both baselines; what
differs is the likelihood objective plugged into :class:`GradientAscent`.
"""

import logging
import time
from abc import ABC, abstractmethod
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy.special import xlogy

from mmap_birl.models.config import AscentConfig
from mmap_birl.models.domain import (
    DiscountedMdp,
    FeatureMap,
    FeatureWeights,
    GaussianPrior,
    GradientCacheEntry,
    ObservationModel,
    ObservedTrajectory,
    RewardTable,
)
from mmap_birl.models.records import AscentResult, IterationRecord
from mmap_birl.utils.error_handling import DivergenceError, ValidationError
from mmap_birl.utils.gradients import (
    PolicySnapshot,
    batch_log_likelihood_and_gradient,
    policy_snapshot,
    snapshot_from_jacobian,
)
from mmap_birl.utils.observation_model import INITIALIZATION_STREAM, derived_rng
from mmap_birl.utils.optimality_region import gradient_reusable, reward_optimality_region
from mmap_birl.utils.reward_model import log_prior, prior_gradient, reward_of, sample_weights

logger = logging.getLogger(__name__)

# Records kept on a DivergenceError.
TRACE_TAIL = 10


class LikelihoodObjective(ABC):
    """Log likelihood of the demonstrations and its gradient at a policy snapshot."""

    @abstractmethod
    def evaluate(self, snapshot: PolicySnapshot) -> Tuple[float, NDArray[np.float64]]:
        ...


class MarginalLikelihood(LikelihoodObjective):
    """Sum over trajectories of log sum_{Z, tau} Pr(Y, Z, tau | R_theta)."""

    def __init__(
        self, mdp: DiscountedMdp, obs_model: ObservationModel, batch: Sequence[ObservedTrajectory], jobs: int = 1
    ):
        self.mdp = mdp
        self.obs_model = obs_model
        self.batch = list(batch)
        self.jobs = jobs

    def evaluate(self, snapshot: PolicySnapshot) -> Tuple[float, NDArray[np.float64]]:
        return batch_log_likelihood_and_gradient(self.mdp, snapshot, self.obs_model, self.batch, self.jobs)


class ExpectedCompleteLikelihood(LikelihoodObjective):
    """sum_t sum_x gamma_t(x) log pi_theta(x) for frozen posteriors gamma.

    Terms of the complete-data log likelihood that do not depend on theta
    (initial state, transitions, emissions) are dropped.
    """

    def __init__(self, mdp: DiscountedMdp, posteriors: Sequence[NDArray[np.float64]]):
        self.mdp = mdp
        self.posteriors = [np.asarray(p, dtype=np.float64) for p in posteriors]
        for p in self.posteriors:
            if p.ndim != 2 or p.shape[1] != mdp.num_pairs:
                raise ValidationError("posteriors must have shape (T, S*A)", field_name="posteriors")

    def evaluate(self, snapshot: PolicySnapshot) -> Tuple[float, NDArray[np.float64]]:
        flat_policy = snapshot.policy.ravel()
        flat_score = snapshot.score.reshape(self.mdp.num_pairs, -1)
        value = 0.0
        gradient = np.zeros(flat_score.shape[1])
        for posterior in self.posteriors:
            occupancy = posterior.sum(axis=0)
            value += float(np.sum(xlogy(occupancy, flat_policy)))
            gradient = gradient + occupancy @ flat_score
        return value, gradient


class GradientCache:
    """Cached (policy, region, Q-Jacobian) entries keyed by policy."""

    def __init__(self) -> None:
        self._entries: List[GradientCacheEntry] = []

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def entries(self) -> Tuple[GradientCacheEntry, ...]:
        return tuple(self._entries)

    def lookup(
        self, reward: RewardTable, current: Optional[GradientCacheEntry] = None
    ) -> Optional[GradientCacheEntry]:
        """First entry whose policy stays optimal for ``reward``; ``current`` is tried first."""
        candidates = ([current] if current is not None else []) + [e for e in self._entries if e is not current]
        for entry in candidates:
            if gradient_reusable(entry.region, reward):
                return entry
        return None

    def find(self, policy: NDArray[np.int64]) -> Optional[GradientCacheEntry]:
        for entry in self._entries:
            if np.array_equal(entry.policy, policy):
                return entry
        return None

    def insert(self, mdp: DiscountedMdp, snapshot: PolicySnapshot) -> GradientCacheEntry:
        """Add an entry for ``snapshot.greedy`` unless that policy is already cached."""
        existing = self.find(snapshot.greedy)
        if existing is not None:
            return existing
        entry = GradientCacheEntry(
            policy=snapshot.greedy,
            region=reward_optimality_region(mdp, snapshot.greedy),
            q_jacobian=snapshot.q_jacobian,
        )
        self._entries.append(entry)
        return entry


class GradientAscent:
    """Ascent on log Pr(theta) + objective(theta) with a decaying step size.

    Terminates when the max-norm change of the reward table between
    consecutive iterates drops to epsilon * (1 - gamma) / gamma, or at
    ``config.max_iterations``.
    """

    def __init__(
        self,
        mdp: DiscountedMdp,
        features: FeatureMap,
        prior: GaussianPrior,
        objective: LikelihoodObjective,
        config: AscentConfig,
        record_timing: bool = True,
    ):
        if prior.num_features != features.num_features:
            raise ValidationError("prior and feature map disagree on K", field_name="prior")
        self.mdp = mdp.with_discount(config.discount) if mdp.discount != config.discount else mdp
        self.features = features
        self.prior = prior
        self.objective = objective
        self.config = config
        self.record_timing = record_timing
        self.cache = GradientCache()
        self.logger = logging.getLogger(__name__)

    def _snapshot(
        self, weights: FeatureWeights, current: Optional[GradientCacheEntry], warm_start: Optional[NDArray[np.int64]]
    ) -> Tuple[PolicySnapshot, Optional[GradientCacheEntry]]:
        if self.config.use_cache:
            hit = self.cache.lookup(reward_of(weights, self.features), current)
            if hit is not None:
                return snapshot_from_jacobian(weights, hit.policy, hit.q_jacobian, self.config.beta), hit
        return policy_snapshot(self.mdp, self.features, weights, self.config.beta, warm_start), None

    def _posterior_terms(self, snapshot: PolicySnapshot) -> Tuple[float, float, NDArray[np.float64]]:
        log_likelihood, likelihood_grad = self.objective.evaluate(snapshot)
        gradient = likelihood_grad + prior_gradient(snapshot.weights, self.prior)
        return log_likelihood, log_prior(snapshot.weights, self.prior), gradient

    def run(self, initial_weights: FeatureWeights) -> AscentResult:
        config = self.config
        theta = np.asarray(initial_weights, dtype=np.float64)
        if theta.shape != (self.features.num_features,) or not np.all(np.isfinite(theta)):
            raise ValidationError("initial weights must be a finite K-vector", field_name="initial_weights")

        snapshot, _ = self._snapshot(theta, None, None)
        log_likelihood, log_prior_value, gradient = self._posterior_terms(snapshot)
        current = self.cache.insert(self.mdp, snapshot) if config.use_cache else None
        log_posterior = log_likelihood + log_prior_value

        records: List[IterationRecord] = []
        step = config.step_size
        threshold = config.termination_threshold
        converged = False
        cache_hits = 0
        self.logger.debug(f"Ascent start: theta={np.round(theta, 4).tolist()}, log posterior={log_posterior:.6f}")

        for iteration in range(1, config.max_iterations + 1):
            started = time.perf_counter()
            new_theta = theta + step * gradient
            if not np.all(np.isfinite(new_theta)):
                raise DivergenceError(
                    f"weights became non-finite at iteration {iteration}",
                    iteration_trace=[r.model_dump() for r in records[-TRACE_TAIL:]],
                )
            delta = float(np.max(np.abs(reward_of(new_theta, self.features) - reward_of(theta, self.features))))

            previous_policy = snapshot.greedy
            snapshot, hit = self._snapshot(new_theta, current, previous_policy)
            log_likelihood, log_prior_value, gradient = self._posterior_terms(snapshot)
            if not (np.isfinite(log_likelihood) and np.all(np.isfinite(gradient))):
                raise DivergenceError(
                    f"log posterior or gradient became non-finite at iteration {iteration}",
                    iteration_trace=[r.model_dump() for r in records[-TRACE_TAIL:]],
                )
            if hit is not None:
                cache_hits += 1
                current = hit
            elif config.use_cache:
                current = self.cache.insert(self.mdp, snapshot)

            log_posterior = log_likelihood + log_prior_value
            records.append(
                IterationRecord(
                    iteration=iteration,
                    log_posterior=log_posterior,
                    log_likelihood=log_likelihood,
                    log_prior=log_prior_value,
                    gradient_norm=float(np.linalg.norm(gradient)),
                    step_size=step,
                    delta=delta,
                    cache_hit=hit is not None,
                    policy_changed=not np.array_equal(previous_policy, snapshot.greedy),
                    wall_time_s=time.perf_counter() - started if self.record_timing else 0.0,
                )
            )
            theta = new_theta
            step *= config.decay
            if delta <= threshold:
                converged = True
                break

        summary = (
            f"after {len(records)} iterations (log posterior {log_posterior:.6f}, "
            f"{cache_hits} cache hits, {len(self.cache)} regions)"
        )
        if converged:
            self.logger.info(f"Ascent converged {summary}")
        else:
            self.logger.warning(f"Ascent stopped at the iteration cap {summary}")
        return AscentResult(
            weights=theta.tolist(),
            initial_weights=np.asarray(initial_weights, dtype=np.float64).tolist(),
            converged=converged,
            iterations=len(records),
            cache_hits=cache_hits,
            cache_size=len(self.cache),
            final_log_posterior=log_posterior,
            records=records,
        )


def initial_weights(prior: GaussianPrior, seed: int, restart: int = 0) -> FeatureWeights:
    """Prior sample used to start restart number ``restart``."""
    return sample_weights(prior, derived_rng(seed, INITIALIZATION_STREAM, restart))


def maximize_posterior(
    mdp: DiscountedMdp,
    features: FeatureMap,
    prior: GaussianPrior,
    objective: LikelihoodObjective,
    config: AscentConfig,
    restarts: int = 1,
    record_timing: bool = True,
) -> AscentResult:
    """Run the ascent from ``restarts`` prior samples and keep the best final log posterior."""
    if restarts < 1:
        raise ValidationError("restarts must be at least 1", field_name="restarts", field_value=restarts)
    best: Optional[AscentResult] = None
    for restart in range(restarts):
        engine = GradientAscent(mdp, features, prior, objective, config, record_timing)
        result = engine.run(initial_weights(prior, config.seed, restart))
        if best is None or result.final_log_posterior > best.final_log_posterior:
            best = result
    assert best is not None
    return best


def mmap_birl(
    mdp: DiscountedMdp,
    batch: Sequence[ObservedTrajectory],
    obs_model: ObservationModel,
    features: FeatureMap,
    prior: GaussianPrior,
    config: AscentConfig,
    restarts: int = 1,
    jobs: int = 1,
    record_timing: bool = True,
) -> AscentResult:
    """Marginal MAP estimate of the feature weights from occluded, noisy demonstrations.

    Args:
        mdp: Decision model; its discount is replaced by ``config.discount``.
        batch: Observed trajectories with occluded timesteps marked.
        obs_model: Learner's observation model.
        features: Reward basis functions.
        prior: Gaussian prior over the weights.
        config: Ascent hyperparameters.
        restarts: Number of prior samples to start from.
        jobs: Threads used for per-trajectory forward-backward passes.
        record_timing: Record wall time per iteration (zeros otherwise).

    Returns:
        The learned weights with per-iteration diagnostics.
    """
    if not batch:
        raise ValidationError("at least one demonstration is required", field_name="batch")
    mdp = mdp.with_discount(config.discount)
    objective = MarginalLikelihood(mdp, obs_model, batch, jobs)
    logger.info(
        f"MMAP-BIRL on {len(batch)} trajectories "
        f"({sum(t.num_occluded for t in batch)} occluded steps), {restarts} restart(s)"
    )
    return maximize_posterior(mdp, features, prior, objective, config, restarts, record_timing)
