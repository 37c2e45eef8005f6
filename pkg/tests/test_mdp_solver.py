"""Tests for policy iteration, policy evaluation and Boltzmann policies."""

import numpy as np
import pytest

from mmap_birl.models.domain import DiscountedMdp, one_hot_policy
from mmap_birl.utils.environments import ForestworldSpec, build_forestworld
from mmap_birl.utils.error_handling import SolverConvergenceError, ValidationError
from mmap_birl.utils.mdp_solver import (
    boltzmann,
    evaluate_policy,
    evaluate_stochastic_policy,
    greedy_actions,
    policy_q_values,
    q_from_values,
    solve_optimal,
)


def value_iteration(mdp: DiscountedMdp, reward: np.ndarray, tolerance: float = 1e-11) -> np.ndarray:
    v = np.zeros(mdp.num_states)
    while True:
        q = q_from_values(mdp, reward, v)
        updated = q.max(axis=1)
        if np.max(np.abs(updated - v)) < tolerance:
            return updated
        v = updated


def single_state_mdp(num_actions: int, discount: float) -> DiscountedMdp:
    return DiscountedMdp(np.ones((1, num_actions, 1)), discount, np.ones(1))


class TestSolveOptimal:
    def test_single_state_geometric_series(self):
        policy, values = solve_optimal(single_state_mdp(2, 0.9), np.array([[1.0, 0.0]]))
        assert policy.tolist() == [0]
        np.testing.assert_allclose(values.v, [10.0], atol=1e-10)

    def test_constant_reward_gives_constant_values(self, make_mdp, rng):
        mdp = make_mdp(rng, 5, 3)
        _, values = solve_optimal(mdp, np.full((5, 3), 2.0))
        np.testing.assert_allclose(values.v, 2.0 / (1 - mdp.discount), atol=1e-8)

    def test_ties_break_to_lowest_action(self, make_mdp, rng):
        policy, _ = solve_optimal(make_mdp(rng, 4, 3), np.zeros((4, 3)))
        assert policy.tolist() == [0, 0, 0, 0]

    @pytest.mark.parametrize("draw", range(5))
    def test_bellman_residual_on_random_mdps(self, make_mdp, draw):
        rng = np.random.default_rng(draw)
        mdp = make_mdp(rng, 6, 3, discount=0.95)
        reward = rng.normal(size=(6, 3))
        policy, values = solve_optimal(mdp, reward)
        expected = reward + mdp.discount * mdp.transitions @ values.v
        assert np.max(np.abs(values.q - expected)) <= 1e-8
        np.testing.assert_allclose(values.v, values.q[np.arange(6), policy])
        np.testing.assert_allclose(values.v, value_iteration(mdp, reward), atol=1e-8)

    def test_warm_start_is_idempotent(self, make_mdp, rng):
        mdp = make_mdp(rng, 6, 3)
        reward = rng.normal(size=(6, 3))
        policy, _ = solve_optimal(mdp, reward)
        again, _ = solve_optimal(mdp, reward, initial_policy=policy)
        np.testing.assert_array_equal(policy, again)

    def test_policy_invariant_to_positive_scaling(self, make_mdp, rng):
        mdp = make_mdp(rng, 6, 3)
        reward = rng.normal(size=(6, 3))
        np.testing.assert_array_equal(solve_optimal(mdp, reward)[0], solve_optimal(mdp, 3.7 * reward)[0])

    def test_iteration_cap_raises_with_residual(self, make_mdp, rng):
        mdp = make_mdp(rng, 6, 3)
        reward = rng.normal(size=(6, 3))
        worst = np.argmin(reward, axis=1)
        with pytest.raises(SolverConvergenceError) as info:
            solve_optimal(mdp, reward, initial_policy=worst, max_iterations=1)
        assert info.value.iterations == 1

    def test_forestworld_matches_value_iteration(self, forestworld):
        policy, values = solve_optimal(forestworld.mdp, forestworld.true_reward)
        np.testing.assert_allclose(values.v, value_iteration(forestworld.mdp, forestworld.true_reward), atol=1e-7)

    def test_forestworld_expert_reaches_goal(self, forestworld):
        spec = ForestworldSpec()
        policy, _ = solve_optimal(forestworld.mdp, forestworld.true_reward)
        moves = ((0, 1), (0, -1), (1, 0), (-1, 0))
        for start in range(16):
            x, y = spec.cell_of(start)
            for _ in range(16):
                if (x, y) == spec.goal_cell:
                    break
                dx, dy = moves[policy[spec.state_of(x, y)]]
                if 0 <= x + dx < 4 and 0 <= y + dy < 4:
                    x, y = x + dx, y + dy
            assert (x, y) == spec.goal_cell


class TestEvaluatePolicy:
    def test_zero_reward(self, make_mdp, rng):
        mdp = make_mdp(rng, 4, 2)
        np.testing.assert_array_equal(evaluate_policy(mdp, np.zeros((4, 2)), [0, 1, 0, 1]), np.zeros(4))

    def test_single_state(self):
        np.testing.assert_allclose(evaluate_policy(single_state_mdp(1, 0.5), np.array([[2.0]]), [0]), [4.0])

    def test_stochastic_evaluation_agrees_on_one_hot(self, make_mdp, rng):
        mdp = make_mdp(rng, 5, 3)
        reward = rng.normal(size=(5, 3))
        policy = np.array([0, 2, 1, 1, 0])
        np.testing.assert_allclose(
            evaluate_stochastic_policy(mdp, reward, one_hot_policy(policy, 3)),
            evaluate_policy(mdp, reward, policy),
            atol=1e-10,
        )

    def test_stochastic_q_satisfies_bellman(self, make_mdp, rng):
        mdp = make_mdp(rng, 4, 2)
        reward = rng.normal(size=(4, 2))
        policy = rng.dirichlet(np.ones(2), size=4)
        values = policy_q_values(mdp, reward, policy)
        np.testing.assert_allclose(values.q, q_from_values(mdp, reward, values.v), atol=1e-10)

    @pytest.mark.slow
    def test_matches_monte_carlo_rollouts(self):
        env = build_forestworld(ForestworldSpec(discount=0.9))
        policy, _ = solve_optimal(env.mdp, env.true_reward)
        v = evaluate_policy(env.mdp, env.true_reward, policy)

        rng = np.random.default_rng(7)
        rollouts, horizon, start = 20_000, 200, 0
        cumulative = np.cumsum(env.mdp.transitions[np.arange(16), policy], axis=1)
        states = np.full(rollouts, start)
        returns = np.zeros(rollouts)
        for t in range(horizon):
            returns += env.mdp.discount**t * env.true_reward[states, policy[states]]
            draws = rng.random(rollouts)[:, None]
            states = np.minimum((cumulative[states] < draws).sum(axis=1), 15)
        standard_error = returns.std(ddof=1) / np.sqrt(rollouts)
        assert abs(returns.mean() - v[start]) <= 4 * standard_error + 1e-9


class TestBoltzmann:
    def test_zero_beta_is_uniform(self, rng):
        np.testing.assert_allclose(boltzmann(rng.normal(size=(3, 4)), 0.0), 0.25)

    def test_equal_q_values_give_uniform_rows(self):
        np.testing.assert_allclose(boltzmann(np.full((2, 3), 5.0), 100.0), 1 / 3)

    def test_rows_sum_to_one_and_match_formula(self, forestworld):
        _, values = solve_optimal(forestworld.mdp, forestworld.true_reward)
        probs = boltzmann(values.q, 0.03)
        expected = np.exp(0.03 * values.q) / np.exp(0.03 * values.q).sum(axis=1, keepdims=True)
        np.testing.assert_allclose(probs, expected, rtol=1e-12)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)

    def test_large_beta_approaches_greedy(self, rng):
        q = rng.normal(size=(20, 4))
        ordered = np.sort(q, axis=1)
        keep = ordered[:, -1] - ordered[:, -2] > 0.01
        probs = boltzmann(q[keep], 1e4)
        assert np.all(probs[np.arange(keep.sum()), greedy_actions(q[keep])] >= 1 - 1e-6)

    def test_large_q_values_do_not_overflow(self):
        probs = boltzmann(np.array([[1e6, 1e6 - 1.0]]), 10.0)
        assert np.all(np.isfinite(probs))

    def test_negative_beta_rejected(self):
        with pytest.raises(ValidationError):
            boltzmann(np.zeros((1, 2)), -1.0)
