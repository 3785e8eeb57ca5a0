"""Reproducible experiment harness: configs, runners, metrics, CLI."""

from .config import (
    ChainConfig,
    ExperimentConfig,
    MazeConfig,
    NoiseSettingConfig,
    ScheduleConfig,
    VariantConfig,
    config_hash,
    load_config,
)
from .metrics import MetricSummary, RunResult, aggregate, normalized_auc, rmsve
from .experiments import (
    default_config,
    greedy_path_length,
    run_control_experiment,
    run_experiment,
    run_prediction_experiment,
)

__all__ = [
    "ChainConfig",
    "ExperimentConfig",
    "MazeConfig",
    "MetricSummary",
    "NoiseSettingConfig",
    "RunResult",
    "ScheduleConfig",
    "VariantConfig",
    "aggregate",
    "config_hash",
    "default_config",
    "greedy_path_length",
    "load_config",
    "normalized_auc",
    "rmsve",
    "run_control_experiment",
    "run_experiment",
    "run_prediction_experiment",
]
