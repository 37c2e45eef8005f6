"""Engines for MMAP-BIRL: solvers, inference, learners, environments and sweeps."""

__all__ = [
    # Errors
    "error_handling",

    # Decision model and reward
    "mdp_solver",
    "reward_model",
    "optimality_region",

    # Observations and data files
    "observation_model",
    "trajectory_io",

    # Inference and learning
    "forward_backward",
    "gradients",
    "ascent",
    "baselines",

    # Domains and evaluation
    "environments",
    "metrics",
    "sweep",
]
