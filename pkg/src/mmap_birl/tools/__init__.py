"""User-facing commands for MMAP-BIRL."""

__all__ = [
    # Command functions
    "generate_demonstrations",
    "learn_reward",
    "evaluate_weights",
    "run_sweep_command",
]

from .evaluate import evaluate_weights
from .generate import generate_demonstrations
from .learn import learn_reward
from .sweep import run_sweep_command
