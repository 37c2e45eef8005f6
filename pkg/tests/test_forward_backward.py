"""Tests for exact marginalization over hidden state-action chains."""

import itertools

import numpy as np
import pytest
from scipy.stats import binomtest

from mmap_birl.models.config import OcclusionSpec
from mmap_birl.models.domain import ObservationModel, ObservedTrajectory, one_hot_policy
from mmap_birl.utils.error_handling import EnumerationLimitError, NumericalError, ZeroLikelihoodError
from mmap_birl.utils.forward_backward import (
    _enumerated_joint,
    brute_force_likelihood,
    forward_backward,
    state_action_occupancy,
)
from mmap_birl.utils.mdp_solver import boltzmann, solve_optimal
from mmap_birl.utils.observation_model import identity_observation_model, simulate_demonstrations


def random_instance(seed, make_mdp, make_observation_model):
    rng = np.random.default_rng(seed)
    num_states, num_actions = int(rng.integers(2, 4)), 2
    horizon = int(rng.integers(1, 6))
    mdp = make_mdp(rng, num_states, num_actions)
    obs_model = make_observation_model(rng, num_states, num_actions, int(rng.integers(2, 5)))
    policy = rng.dirichlet(np.ones(num_actions), size=num_states)
    records = [
        None if rng.random() < 0.3 else int(rng.integers(obs_model.num_observations)) for _ in range(horizon)
    ]
    return mdp, policy, obs_model, ObservedTrajectory(tuple(records))


class TestAgainstEnumeration:
    @pytest.mark.parametrize("seed", range(50))
    def test_likelihood_matches_brute_force(self, seed, make_mdp, make_observation_model):
        mdp, policy, obs_model, trajectory = random_instance(seed, make_mdp, make_observation_model)
        assert mdp.num_pairs ** len(trajectory) <= 10**5
        log_likelihood, _ = forward_backward(mdp, policy, obs_model, trajectory)
        expected = brute_force_likelihood(mdp, policy, obs_model, trajectory)
        np.testing.assert_allclose(np.exp(log_likelihood), expected, rtol=1e-10)

    @pytest.mark.parametrize("seed", range(10))
    def test_marginals_match_brute_force(self, seed, make_mdp, make_observation_model):
        mdp, policy, obs_model, trajectory = random_instance(seed, make_mdp, make_observation_model)
        _, marginals = forward_backward(mdp, policy, obs_model, trajectory)
        joint = _enumerated_joint(mdp, policy, obs_model, trajectory, 10**7)
        joint = joint / joint.sum()
        horizon = len(trajectory)
        for t in range(horizon):
            others = tuple(axis for axis in range(horizon) if axis != t)
            np.testing.assert_allclose(marginals.single[t], joint.sum(axis=others), atol=1e-12)

    def test_forestworld_with_one_occlusion(self, forestworld):
        policy, values = solve_optimal(forestworld.mdp, forestworld.true_reward)
        stochastic = boltzmann(values.q, 0.03)
        observed, _ = simulate_demonstrations(
            forestworld.mdp, one_hot_policy(policy, 4), forestworld.observation_model, 3,
            OcclusionSpec(rate=0.34), 1, seed=3,
        )
        trajectory = observed[0]
        assert trajectory.num_occluded == 1
        log_likelihood, _ = forward_backward(forestworld.mdp, stochastic, forestworld.observation_model, trajectory)
        expected = brute_force_likelihood(forestworld.mdp, stochastic, forestworld.observation_model, trajectory)
        np.testing.assert_allclose(np.exp(log_likelihood), expected, rtol=1e-10)

    def test_enumeration_guard(self, two_state_mdp):
        policy = np.full((2, 2), 0.5)
        with pytest.raises(EnumerationLimitError) as info:
            brute_force_likelihood(
                two_state_mdp, policy, identity_observation_model(2, 2), ObservedTrajectory((None,) * 5), limit=100
            )
        assert info.value.size == 4**5


class TestMarginals:
    def test_single_step_identity_observation(self, make_mdp, rng):
        mdp = make_mdp(rng, 3, 2)
        policy = rng.dirichlet(np.ones(2), size=3)
        log_likelihood, marginals = forward_backward(
            mdp, policy, identity_observation_model(3, 2), ObservedTrajectory((3,))
        )
        assert log_likelihood == pytest.approx(np.log(mdp.initial_distribution[1] * policy[1, 1]))
        np.testing.assert_allclose(marginals.single[0], np.eye(6)[3], atol=1e-15)

    def test_fully_occluded_gives_occupancy(self, make_mdp, rng):
        mdp = make_mdp(rng, 3, 2)
        policy = rng.dirichlet(np.ones(2), size=3)
        log_likelihood, marginals = forward_backward(
            mdp, policy, identity_observation_model(3, 2), ObservedTrajectory((None,) * 4)
        )
        assert log_likelihood == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(marginals.single, state_action_occupancy(mdp, policy, 4), atol=1e-12)

    def test_pairwise_consistent_with_singles(self, make_mdp, make_observation_model, rng):
        mdp = make_mdp(rng, 3, 2)
        policy = rng.dirichlet(np.ones(2), size=3)
        obs_model = make_observation_model(rng, 3, 2, 3)
        _, marginals = forward_backward(mdp, policy, obs_model, ObservedTrajectory((0, None, 2, 1)))
        np.testing.assert_allclose(marginals.single.sum(axis=1), 1.0, atol=1e-9)
        assert marginals.pairwise is not None
        for t in range(3):
            np.testing.assert_allclose(marginals.pairwise[t].sum(axis=1), marginals.single[t], atol=1e-8)
            np.testing.assert_allclose(marginals.pairwise[t].sum(axis=0), marginals.single[t + 1], atol=1e-8)

    def test_observation_sequences_sum_to_one(self, make_mdp, make_observation_model, rng):
        mdp = make_mdp(rng, 2, 2)
        policy = rng.dirichlet(np.ones(2), size=2)
        obs_model = make_observation_model(rng, 2, 2, 3)
        total = sum(
            np.exp(forward_backward(mdp, policy, obs_model, ObservedTrajectory(records))[0])
            for records in itertools.product(range(3), repeat=2)
        )
        assert total == pytest.approx(1.0, abs=1e-9)


class TestSupport:
    def test_deterministic_rollout_has_probability_one(self, two_state_mdp):
        policy = one_hot_policy(np.array([1, 1]), 2)
        model = identity_observation_model(2, 2)
        # 0 -move-> 1 -move-> 0
        assert brute_force_likelihood(two_state_mdp, policy, model, ObservedTrajectory((1, 3, 1))) == 1.0
        assert brute_force_likelihood(two_state_mdp, policy, model, ObservedTrajectory((1, 1, 1))) == 0.0

    def test_zero_likelihood_is_reported(self, two_state_mdp):
        policy = np.full((2, 2), 0.5)
        with pytest.raises(ZeroLikelihoodError) as info:
            forward_backward(two_state_mdp, policy, identity_observation_model(2, 2), ObservedTrajectory((2,)))
        assert info.value.timestep == 0

    def test_underflow_is_not_zero_likelihood(self, two_state_mdp):
        tiny = 5e-324
        prob = np.empty((2, 2, 2))
        prob[..., 0], prob[..., 1] = 1.0, tiny
        with pytest.raises(NumericalError):
            forward_backward(two_state_mdp, np.full((2, 2), 0.5), ObservationModel(prob), ObservedTrajectory((1,)))


class TestInformation:
    def test_revealing_a_step_sharpens_the_true_pair(self, forestworld):
        mdp, obs_model = forestworld.mdp, forestworld.observation_model
        greedy, values = solve_optimal(mdp, forestworld.true_reward)
        learner = boltzmann(values.q, 0.03)
        differences = []
        for seed in range(200):
            observed, truth = simulate_demonstrations(
                mdp, one_hot_policy(greedy, 4), obs_model, 6, OcclusionSpec(), 1, seed=seed
            )
            revealed = observed[0]
            hidden = ObservedTrajectory(revealed.records[:3] + (None,) + revealed.records[4:])
            state, action = truth[0].steps[3]
            pair = state * 4 + action
            with_step = forward_backward(mdp, learner, obs_model, revealed, with_pairwise=False)[1].single[3, pair]
            without = forward_backward(mdp, learner, obs_model, hidden, with_pairwise=False)[1].single[3, pair]
            differences.append(np.log(with_step) - np.log(without))

        differences = np.asarray(differences)
        nonzero = differences[np.abs(differences) > 1e-12]
        assert differences.mean() > 0.0
        assert binomtest(int((nonzero > 0).sum()), len(nonzero), alternative="greater").pvalue < 0.01
