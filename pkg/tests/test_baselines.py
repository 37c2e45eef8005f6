"""Tests for the occlusion-ignoring and expectation-maximization comparison learners."""

import numpy as np
import pytest

from mmap_birl.models.config import AscentConfig, EmConfig, Method, OcclusionSpec, SegmentStart
from mmap_birl.models.domain import GaussianPrior, ObservedTrajectory
from mmap_birl.models.records import AscentResult
from mmap_birl.utils import baselines
from mmap_birl.utils.ascent import initial_weights, mmap_birl
from mmap_birl.utils.baselines import (
    VisibleSegmentLikelihood,
    hidden_data_em,
    ignore_occlusion_map_birl,
    run_learner,
)
from mmap_birl.utils.environments import expert_policy
from mmap_birl.utils.gradients import policy_snapshot
from mmap_birl.utils.observation_model import simulate_demonstrations


def forest_batch(env, rate, count=4, horizon=6, seed=3):
    batch, _ = simulate_demonstrations(
        env.mdp, expert_policy(env), env.observation_model, horizon, OcclusionSpec(rate=rate), count, seed=seed
    )
    return batch


class TestIgnoreOcclusion:
    def test_equals_marginal_learner_without_occlusion(self, forestworld, forest_prior, fast_ascent):
        batch = forest_batch(forestworld, 0.0)
        args = (forestworld.mdp, batch, forestworld.observation_model, forestworld.features, forest_prior, fast_ascent)
        ignore = ignore_occlusion_map_birl(*args, record_timing=False)
        marginal = mmap_birl(*args, record_timing=False)
        np.testing.assert_allclose(ignore.theta, marginal.theta, rtol=1e-12, atol=1e-12)

    def test_segments_start_mid_trajectory(self, forestworld):
        batch = [ObservedTrajectory((1, None, None, 5, 6)), ObservedTrajectory((None, 2, 3, None, 9))]
        objective = VisibleSegmentLikelihood(forestworld.mdp, forestworld.observation_model, batch)
        assert [(index, offset, len(segment)) for index, offset, segment in objective.segments] == [
            (0, 0, 1),
            (0, 3, 2),
            (1, 1, 2),
            (1, 4, 1),
        ]

    def test_uniform_segment_start(self, forestworld):
        batch = [ObservedTrajectory((None, 2, 3))]
        objective = VisibleSegmentLikelihood(
            forestworld.mdp, forestworld.observation_model, batch, SegmentStart.UNIFORM
        )
        snapshot = policy_snapshot(forestworld.mdp, forestworld.features, forestworld.true_weights, 0.03)
        value, gradient = objective.evaluate(snapshot)
        assert np.isfinite(value)
        assert gradient.shape == (3,)

    def test_fully_occluded_batch_is_prior_only(self, forestworld):
        batch = [ObservedTrajectory((None,) * 4)] * 3
        prior = GaussianPrior.from_scalars(-1.0, 0.5, 3)
        config = AscentConfig(step_size=0.2, decay=1.0, discount=0.9, max_iterations=500, seed=4)
        result = ignore_occlusion_map_birl(
            forestworld.mdp, batch, forestworld.observation_model, forestworld.features, prior, config
        )
        assert result.converged
        np.testing.assert_allclose(result.theta, prior.mean, atol=0.02)


class TestHiddenDataEm:
    @pytest.mark.parametrize("seed", range(10))
    def test_accepted_rounds_never_lower_the_surrogate(self, seed, forestworld, forest_prior, fast_ascent):
        batch = forest_batch(forestworld, 0.3, seed=seed)
        config = EmConfig(ascent=fast_ascent.model_copy(update={"seed": seed}), em_max_rounds=4)
        result = hidden_data_em(
            forestworld.mdp, batch, forestworld.observation_model, forestworld.features, forest_prior, config,
            record_timing=False,
        )
        assert 1 <= len(result.rounds) <= 4
        for record in result.rounds:
            assert record.surrogate_after >= record.surrogate_before - 1e-8
            if not record.accepted:
                assert record.max_weight_change == 0.0

    def test_rejected_round_stops_unconverged(self, forestworld, forest_prior, fast_ascent, monkeypatch):
        class DriftingAscent:
            """M-step stand-in that moves the weights far from the prior."""

            def __init__(self, *args, **kwargs):
                pass

            def run(self, theta):
                start = np.asarray(theta, dtype=float)
                return AscentResult(
                    weights=(start + 50.0).tolist(), initial_weights=start.tolist(), converged=True, iterations=1,
                    cache_hits=0, cache_size=0, final_log_posterior=0.0,
                )

        monkeypatch.setattr(baselines, "GradientAscent", DriftingAscent)
        batch = forest_batch(forestworld, 0.3, count=2)
        config = EmConfig(ascent=fast_ascent, em_max_rounds=5)
        result = hidden_data_em(
            forestworld.mdp, batch, forestworld.observation_model, forestworld.features, forest_prior, config
        )
        assert not result.converged
        assert len(result.rounds) == 1
        assert not result.rounds[0].accepted and result.rounds[0].max_weight_change == 0.0
        np.testing.assert_array_equal(result.theta, initial_weights(forest_prior, fast_ascent.seed))

    def test_round_cap(self, forestworld, forest_prior, fast_ascent):
        batch = forest_batch(forestworld, 0.3, count=2)
        config = EmConfig(ascent=fast_ascent, em_max_rounds=1)
        result = hidden_data_em(
            forestworld.mdp, batch, forestworld.observation_model, forestworld.features, forest_prior, config
        )
        assert [r.round for r in result.rounds] == [1]
        assert result.rounds[0].inner_iterations >= 1
        assert result.theta.shape == (3,)


class TestRunLearner:
    @pytest.mark.parametrize("method", list(Method))
    def test_dispatch(self, method, forestworld, forest_prior, fast_ascent):
        batch = forest_batch(forestworld, 0.25, count=2)
        em = EmConfig(ascent=fast_ascent, em_max_rounds=2)
        learned = run_learner(
            method, forestworld.mdp, batch, forestworld.observation_model, forestworld.features, forest_prior,
            fast_ascent, em, record_timing=False,
        )
        assert learned.weights.shape == (3,)
        assert np.all(np.isfinite(learned.weights))
        assert learned.diagnostics
        key = "round" if method == Method.EM else "iteration"
        assert all(key in record for record in learned.diagnostics)
