"""Tests for reward optimality regions against the policy iteration oracle."""

import numpy as np
import pytest

from mmap_birl.models.domain import DiscountedMdp
from mmap_birl.utils.error_handling import ValidationError
from mmap_birl.utils.mdp_solver import evaluate_policy, q_from_values, solve_optimal
from mmap_birl.utils.optimality_region import (
    gradient_reusable,
    policy_q_operator,
    region_slack,
    reward_optimality_region,
)


class TestRegion:
    def test_operator_reproduces_policy_q_values(self, make_mdp, rng):
        mdp = make_mdp(rng, 5, 3)
        reward = rng.normal(size=(5, 3))
        policy = np.array([0, 2, 1, 0, 1])
        expected = q_from_values(mdp, reward, evaluate_policy(mdp, reward, policy))
        np.testing.assert_allclose(
            (policy_q_operator(mdp, policy) @ reward.ravel()).reshape(5, 3), expected, atol=1e-10
        )

    def test_rows_cover_non_policy_actions(self, make_mdp, rng):
        mdp = make_mdp(rng, 3, 3)
        region = reward_optimality_region(mdp, [0, 1, 2])
        assert region.matrix.shape == (6, 9)
        assert (0, 0) not in region.rows and (0, 1) in region.rows

    def test_single_action_mdp_has_no_constraints(self):
        mdp = DiscountedMdp(np.ones((1, 1, 1)), 0.5, np.ones(1))
        region = reward_optimality_region(mdp, [0])
        assert region.matrix.shape == (0, 1)
        assert gradient_reusable(region, np.array([[-3.0]]))

    def test_slack_shape_check(self, make_mdp, rng):
        region = reward_optimality_region(make_mdp(rng, 2, 2), [0, 0])
        with pytest.raises(ValidationError):
            region_slack(region, np.zeros((3, 2)))


class TestGradientReusable:
    def test_solved_reward_and_its_scalings(self, make_mdp, rng):
        mdp = make_mdp(rng, 5, 2)
        reward = rng.normal(size=(5, 2))
        policy, _ = solve_optimal(mdp, reward)
        region = reward_optimality_region(mdp, policy)
        assert gradient_reusable(region, reward)
        assert gradient_reusable(region, 2.0 * reward)

    def test_negated_reward_leaves_region(self, make_mdp, rng):
        mdp = make_mdp(rng, 5, 2)
        reward = rng.normal(size=(5, 2))
        policy, _ = solve_optimal(mdp, reward)
        assert not gradient_reusable(reward_optimality_region(mdp, policy), -reward)

    @pytest.mark.parametrize("environment", ["forestworld", "onionworld"])
    def test_agrees_with_solver_on_random_perturbations(self, environment, request):
        env = request.getfixturevalue(environment)
        mdp = env.mdp
        rng = np.random.default_rng(17)
        shape = (mdp.num_states, mdp.num_actions)
        base = rng.normal(size=shape)
        policy, _ = solve_optimal(mdp, base)
        region = reward_optimality_region(mdp, policy)

        outcomes = []
        for scale in np.logspace(-3, 1, 100):
            perturbed = base + scale * rng.normal(size=shape)
            reusable = gradient_reusable(region, perturbed)
            still_optimal = np.array_equal(solve_optimal(mdp, perturbed)[0], policy)
            assert reusable == still_optimal
            outcomes.append(reusable)
        assert any(outcomes) and not all(outcomes)
