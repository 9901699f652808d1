"""A self-optimizing agent for countable classes of value-stable environments."""

from .agent import (ClassSpec, HorizonSearchError, SelfOptimizingAgent, Trajectory, run_agent,
                    verify_horizons)
from .certify import CertificationReport, certify_value_stability, estimate_recovery_loss
from .core import (ConfigurationError, Environment, History, Percept, Policy, RandomSource,
                   make_percept, rollout)
from .mdp import FiniteMdp, check_ergodic, mixing_bound, solve_average_reward, stationary_distribution

__version__ = "0.1.0"

__all__ = [
    "CertificationReport", "ClassSpec", "ConfigurationError", "Environment", "FiniteMdp",
    "History", "HorizonSearchError", "Percept", "Policy", "RandomSource", "SelfOptimizingAgent",
    "Trajectory", "certify_value_stability", "check_ergodic", "estimate_recovery_loss",
    "make_percept", "mixing_bound", "rollout", "run_agent", "solve_average_reward",
    "stationary_distribution", "verify_horizons",
]
