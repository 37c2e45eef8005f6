"""Shared fixtures: small random MDPs plus the two benchmark domains."""

from typing import Callable, Optional

import numpy as np
import pytest

from mmap_birl.models.config import AscentConfig
from mmap_birl.models.domain import DiscountedMdp, FeatureMap, GaussianPrior, ObservationModel
from mmap_birl.utils.environments import Environment, build_forestworld, build_onionworld


def random_mdp(rng: np.random.Generator, num_states: int, num_actions: int, discount: float = 0.9) -> DiscountedMdp:
    transitions = rng.dirichlet(np.ones(num_states), size=(num_states, num_actions))
    initial = rng.dirichlet(np.ones(num_states))
    return DiscountedMdp(transitions, discount, initial)


def random_features(rng: np.random.Generator, num_states: int, num_actions: int, num_features: int) -> FeatureMap:
    return FeatureMap(rng.random((num_states, num_actions, num_features)))


def random_observation_model(
    rng: np.random.Generator, num_states: int, num_actions: int, num_observations: Optional[int] = None
) -> ObservationModel:
    num_observations = num_observations or num_states * num_actions
    return ObservationModel(rng.dirichlet(np.ones(num_observations), size=(num_states, num_actions)))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240517)


@pytest.fixture
def make_mdp() -> Callable[..., DiscountedMdp]:
    return random_mdp


@pytest.fixture
def make_features() -> Callable[..., FeatureMap]:
    return random_features


@pytest.fixture
def make_observation_model() -> Callable[..., ObservationModel]:
    return random_observation_model


@pytest.fixture
def two_state_mdp() -> DiscountedMdp:
    """Action 0 stays put, action 1 moves to the other state."""
    transitions = np.zeros((2, 2, 2))
    transitions[0, 0, 0] = transitions[1, 0, 1] = 1.0
    transitions[0, 1, 1] = transitions[1, 1, 0] = 1.0
    return DiscountedMdp(transitions, 0.9, np.array([1.0, 0.0]))


@pytest.fixture(scope="session")
def forestworld() -> Environment:
    return build_forestworld()


@pytest.fixture(scope="session")
def onionworld() -> Environment:
    return build_onionworld()


@pytest.fixture
def forest_prior(forestworld: Environment) -> GaussianPrior:
    return GaussianPrior.from_scalars(-1.0, 0.5, forestworld.features.num_features)


@pytest.fixture
def fast_ascent() -> AscentConfig:
    """Short, deterministic ascent settings for unit tests."""
    return AscentConfig(beta=0.5, step_size=0.05, decay=0.95, epsilon=0.01, discount=0.9, max_iterations=40, seed=3)
