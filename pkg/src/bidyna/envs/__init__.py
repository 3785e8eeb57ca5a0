"""Seeded, reproducible tabular environments."""

from .chain import ChainEnv, LeveledChainSpec, build_leveled_chain, leveled_initial_distribution
from .maze import (
    Deterministic,
    MazeEnv,
    MazeSpec,
    StochasticDynamics,
    StochasticReward,
    build_maze,
    corridor_layout,
    default_layout,
    detour_layout,
    load_layout,
    parse_layout,
)
from .outcome import StepOutcome

__all__ = [
    "ChainEnv",
    "Deterministic",
    "LeveledChainSpec",
    "MazeEnv",
    "MazeSpec",
    "StepOutcome",
    "StochasticDynamics",
    "StochasticReward",
    "build_leveled_chain",
    "build_maze",
    "corridor_layout",
    "default_layout",
    "detour_layout",
    "leveled_initial_distribution",
    "load_layout",
    "parse_layout",
]
