"""
MMAP-BIRL

Marginal MAP Bayesian inverse reinforcement learning from demonstrations
with occluded timesteps and noisy observations, together with the
occlusion-ignoring and expectation-maximization baselines, the Forestworld
and Onionworld benchmark domains, and a reproducible sweep harness.
"""

__version__ = "1.0.0"
__author__ = "MMAP-BIRL Team"

from .cli import main

__all__ = ["main", "__version__"]
