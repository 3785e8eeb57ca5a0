"""Tabular Dyna with forward and backward planning.

Exact chain analysis lives in :mod:`bidyna.core`, environments in
:mod:`bidyna.envs`, model estimators in :mod:`bidyna.models`, the planning
loops in :mod:`bidyna.planning`, and the experiment harness (config, metrics,
CLI) in :mod:`bidyna.harness`.
"""

from .core import (
    Episode,
    Policy,
    StationaryDistribution,
    TabularChain,
    TabularMDP,
    Transition,
    bellman_residual,
    episode_offline_updates,
    exact_value,
    expected_rewards,
    induce_chain,
    make_ergodic,
    reverse_chain,
    sample_episode,
    stationary_distribution,
    uniform_policy,
)
from .errors import (
    ConfigError,
    DegenerateDistributionError,
    LayoutError,
    NumericalError,
    ValidationError,
)
from .planning import PlannerConfig, RateSchedules, run_dyna_control, run_dyna_prediction

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DegenerateDistributionError",
    "Episode",
    "LayoutError",
    "NumericalError",
    "PlannerConfig",
    "Policy",
    "RateSchedules",
    "StationaryDistribution",
    "TabularChain",
    "TabularMDP",
    "Transition",
    "ValidationError",
    "bellman_residual",
    "episode_offline_updates",
    "exact_value",
    "expected_rewards",
    "induce_chain",
    "make_ergodic",
    "reverse_chain",
    "run_dyna_control",
    "run_dyna_prediction",
    "sample_episode",
    "stationary_distribution",
    "uniform_policy",
]
