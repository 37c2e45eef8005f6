"""Linear feature rewards and the Gaussian weight prior."""

from typing import Union

import numpy as np
from scipy.stats import norm

from mmap_birl.models.domain import FeatureMap, FeatureWeights, GaussianPrior, RewardTable
from mmap_birl.utils.error_handling import ValidationError

SeedLike = Union[int, np.random.Generator]


def _check_weights(weights: FeatureWeights, num_features: int) -> np.ndarray:
    theta = np.asarray(weights, dtype=np.float64)
    if theta.shape != (num_features,):
        raise ValidationError(
            f"expected {num_features} feature weights, got shape {theta.shape}",
            field_name="weights",
        )
    if not np.all(np.isfinite(theta)):
        raise ValidationError("feature weights must be finite", field_name="weights")
    return theta


def reward_of(weights: FeatureWeights, features: FeatureMap) -> RewardTable:
    """R_theta(s, a) = sum_k theta_k phi_k(s, a)."""
    theta = _check_weights(weights, features.num_features)
    return features.phi @ theta


def log_prior(weights: FeatureWeights, prior: GaussianPrior) -> float:
    theta = _check_weights(weights, prior.num_features)
    return float(np.sum(norm.logpdf(theta, loc=prior.mean, scale=prior.stddev)))


def prior_gradient(weights: FeatureWeights, prior: GaussianPrior) -> np.ndarray:
    """-(theta - mu) / sigma^2, times the prior's gradient_scale."""
    theta = _check_weights(weights, prior.num_features)
    return -prior.gradient_scale * (theta - prior.mean) / prior.stddev**2


def sample_weights(prior: GaussianPrior, seed: SeedLike) -> FeatureWeights:
    """Draw theta from the prior using an explicit seed or generator."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.normal(loc=prior.mean, scale=prior.stddev)
