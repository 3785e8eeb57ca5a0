"""Experiment orchestration: seed fan-out, runners, defaults, file output.

A run is identified by (config, seed). Seeds fan out into per-component
random streams, every variant of a seed sees identical environment
randomness, and results are merged in seed order, so outputs are
byte-identical however the seed loop is scheduled.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .. import rng as streams
from ..core import exact_value, reverse_chain, stationary_distribution
from ..envs import (
    ChainEnv,
    LeveledChainSpec,
    MazeEnv,
    MazeSpec,
    build_leveled_chain,
    corridor_layout,
    detour_layout,
    leveled_initial_distribution,
)
from ..errors import ConfigError
from ..learn import LinearSchedule
from ..models import BackwardModel, ForwardModel
from ..planning import PlannerConfig, RateSchedules, run_dyna_control, run_dyna_prediction
from .config import (
    ChainConfig,
    ExperimentConfig,
    MazeConfig,
    NoiseSettingConfig,
    ScheduleConfig,
    VariantConfig,
    canonical_json,
    config_hash,
    config_to_dict,
)
from .metrics import MetricSummary, RunResult, aggregate, write_curves_csv, write_summary_csv
from .plotting import plot_summary

PREDICTION_COLUMNS = ("rmsve",)
CONTROL_COLUMNS = ("steps", "return")


def _schedule(cfg: ScheduleConfig, horizon: int) -> LinearSchedule:
    return LinearSchedule(cfg.start, cfg.end, horizon)


def _planner_config(variant: VariantConfig) -> PlannerConfig:
    return PlannerConfig(
        direction=variant.direction,
        reference=variant.reference,
        steps_per_interaction=variant.planning_steps,
        model_free_learning_enabled=variant.learning,
    )


def _maze_spec(cfg: MazeConfig) -> MazeSpec:
    return MazeSpec(
        layout=cfg.layout,
        stochasticity=cfg.stochasticity(),
        max_episode_steps=cfg.max_episode_steps,
        discount=cfg.discount,
    )


def _prediction_seed_runs(
    chain_cfg: ChainConfig,
    variants: tuple[VariantConfig, ...],
    alpha: ScheduleConfig,
    alpha_model: ScheduleConfig,
    T: int,
    seed: int,
    digest: str,
    name_suffix: str = "",
) -> list[RunResult]:
    """All variants of one seed on one freshly built chain."""
    spec = LeveledChainSpec(
        chain_cfg.level_sizes,
        chain_cfg.reward_mean,
        chain_cfg.reward_std,
        seed=streams.component_seed(seed, streams.ENV_BUILD),
    )
    chain = build_leveled_chain(spec)
    init = leveled_initial_distribution(spec)
    reference_values = exact_value(chain)
    reversed_chain = None
    results = []
    for variant in variants:
        model = None
        learn_model = False
        if variant.model == "learned":
            learn_model = True
            if variant.direction == "backward":
                model = BackwardModel(chain.n_states, 1, chain.discount)
            else:
                model = ForwardModel(chain.n_states, 1, chain.discount)
        elif variant.model == "true":
            if variant.direction == "backward":
                if reversed_chain is None:
                    reversed_chain = reverse_chain(chain, stationary_distribution(chain))
                model = BackwardModel.from_reversed_chain(reversed_chain)
            else:
                model = ForwardModel.from_chain(chain)
        env = ChainEnv(chain, init, streams.component_rng(seed, streams.ENV_STEP))
        started = time.perf_counter()
        run = run_dyna_prediction(
            env,
            _planner_config(variant),
            RateSchedules(_schedule(alpha, T), _schedule(alpha_model, T)),
            T,
            reference_values,
            model=model,
            model_learning_enabled=learn_model,
        )
        results.append(
            RunResult(
                variant.name + name_suffix,
                seed,
                {"rmsve": run.errors},
                digest,
                time.perf_counter() - started,
            )
        )
    return results


def _control_seed_runs(
    maze_cfg: MazeConfig,
    variants: tuple[VariantConfig, ...],
    alpha: ScheduleConfig,
    alpha_model: ScheduleConfig,
    epsilon: ScheduleConfig,
    T: int,
    schedule_unit: str,
    seed: int,
    digest: str,
) -> list[RunResult]:
    """All variants of one seed on the maze; identical streams per variant."""
    spec = _maze_spec(maze_cfg)
    results = []
    for variant in variants:
        env = MazeEnv(spec, streams.component_rng(seed, streams.ENV_STEP))
        agent_rng = streams.component_rng(seed, streams.AGENT)
        model = None
        learn_model = False
        if variant.model == "learned":
            learn_model = True
            if variant.direction == "backward":
                model = BackwardModel(env.n_states, env.n_actions, spec.discount)
            else:
                model = ForwardModel(env.n_states, env.n_actions, spec.discount)
        elif variant.model == "true":
            model = ForwardModel.from_mdp(env.mdp)
        horizon = T if schedule_unit == "episode" else T * spec.max_episode_steps
        schedules = RateSchedules(
            _schedule(alpha, horizon), _schedule(alpha_model, horizon), _schedule(epsilon, horizon)
        )
        started = time.perf_counter()
        run = run_dyna_control(
            env,
            _planner_config(variant),
            schedules,
            T,
            agent_rng,
            model=model,
            model_learning_enabled=learn_model,
            schedule_unit=schedule_unit,
        )
        results.append(
            RunResult(
                variant.name,
                seed,
                {"steps": run.steps, "return": run.returns},
                digest,
                time.perf_counter() - started,
            )
        )
    return results


def _expanded_variants(config: ExperimentConfig) -> tuple[str, ...]:
    if config.kind == "sweep_fan":
        return tuple(
            f"{v.name}@{pair[0]}x{pair[1]}" for pair in config.sweep_levels for v in config.variants
        )
    return tuple(v.name for v in config.variants)


def _seed_task(config: ExperimentConfig, seed: int) -> list[RunResult]:
    digest = config_hash(config)
    if config.kind in ("predict_chain", "sweep_fan"):
        if config.kind == "predict_chain":
            return _prediction_seed_runs(
                config.chain, config.variants, config.alpha, config.alpha_model, config.T, seed, digest
            )
        results = []
        for pair in config.sweep_levels:
            results.extend(
                _prediction_seed_runs(
                    ChainConfig(tuple(pair)),
                    config.variants,
                    config.alpha,
                    config.alpha_model,
                    config.T,
                    seed,
                    digest,
                    name_suffix=f"@{pair[0]}x{pair[1]}",
                )
            )
        return results
    return _control_seed_runs(
        config.maze,
        config.variants,
        config.alpha,
        config.alpha_model,
        config.epsilon,
        config.T,
        config.schedule_unit,
        seed,
        digest,
    )


def _seed_task_payload(payload: tuple[str, int]) -> list[RunResult]:
    raw, seed = payload
    return _seed_task(ExperimentConfig.from_dict(json.loads(raw)), seed)


def _run_seeds(config: ExperimentConfig) -> list[RunResult]:
    """Run every seed, serially or in a process pool, merged in seed order."""
    if config.parallel <= 1 or len(config.seeds) <= 1:
        grouped = [_seed_task(config, seed) for seed in config.seeds]
    else:
        raw = canonical_json(config)
        with ProcessPoolExecutor(max_workers=config.parallel) as pool:
            grouped = list(pool.map(_seed_task_payload, [(raw, seed) for seed in config.seeds]))
    return [r for group in grouped for r in group]


def _write_outputs(
    out_dir: str,
    config: ExperimentConfig,
    results: list[RunResult],
    metric: str,
    index_name: str,
    columns: tuple[str, ...],
    variant_order: tuple[str, ...],
) -> MetricSummary:
    os.makedirs(out_dir, exist_ok=True)
    summary = aggregate(results, metric, variant_order)
    for name in variant_order:
        rows = [r for r in results if r.variant == name]
        write_curves_csv(os.path.join(out_dir, f"curves_{name}.csv"), rows, index_name, columns)
    write_summary_csv(os.path.join(out_dir, "summary.csv"), summary)
    plot_summary(summary, os.path.join(out_dir, "curves.svg"), index_name, config_hash(config))
    meta = {
        "config": config_to_dict(config),
        "config_hash": config_hash(config),
        "wall_time_total": sum(r.wall_time for r in results),
    }
    with open(os.path.join(out_dir, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    return summary


def run_prediction_experiment(config: ExperimentConfig) -> MetricSummary:
    """Run a chain prediction experiment (plain or fan sweep) end to end."""
    if config.kind not in ("predict_chain", "sweep_fan"):
        raise ConfigError(f"not a prediction experiment: {config.kind}")
    results = _run_seeds(config)
    return _write_outputs(
        config.out_dir, config, results, "rmsve", "step", PREDICTION_COLUMNS, _expanded_variants(config)
    )


def run_control_experiment(config: ExperimentConfig) -> MetricSummary | dict[str, MetricSummary]:
    """Run a maze control experiment; the noise ablation returns one summary per setting."""
    if config.kind not in ("control_maze", "ablate_frames", "ablate_noise"):
        raise ConfigError(f"not a control experiment: {config.kind}")
    if config.kind != "ablate_noise":
        results = _run_seeds(config)
        return _write_outputs(
            config.out_dir, config, results, "steps", "episode", CONTROL_COLUMNS, _expanded_variants(config)
        )
    summaries: dict[str, MetricSummary] = {}
    for setting in config.noise_settings:
        sub = ExperimentConfig(
            kind="control_maze",
            seeds=config.seeds,
            T=setting.T,
            out_dir=os.path.join(config.out_dir, setting.name),
            variants=config.variants,
            alpha=setting.alpha,
            alpha_model=setting.alpha_model,
            epsilon=config.epsilon,
            maze=setting.maze,
            schedule_unit=config.schedule_unit,
            parallel=config.parallel,
        )
        summaries[setting.name] = run_control_experiment(sub)
    return summaries


def run_experiment(config: ExperimentConfig):
    """Dispatch on experiment kind."""
    if config.kind in ("predict_chain", "sweep_fan"):
        return run_prediction_experiment(config)
    return run_control_experiment(config)


def greedy_path_length(q: np.ndarray, env: MazeEnv, cap: int | None = None) -> int:
    """Steps the greedy policy needs from start to goal on the noiseless kernel.

    Rolls the argmax policy (first index on ties) through the deterministic
    move targets, so the answer is a property of the Q table and the layout,
    not of any sampling. Returns ``cap`` when the rollout does not reach the
    goal within that many steps (loops included).
    """
    if cap is None:
        cap = env.spec.max_episode_steps
    from ..envs.maze import _move_targets  # deterministic kernel, noise ignored

    targets = _move_targets(env.layout)
    state = env.layout.state_of(env.layout.start)
    goal = env.layout.state_of(env.layout.goal)
    for steps in range(1, cap + 1):
        state = int(targets[state, int(np.argmax(q[state]))])
        if state == goal:
            return steps
    return cap


def default_config(kind: str, scale: str = "desk", out_dir: str | None = None) -> ExperimentConfig:
    """Built-in experiment definitions at desk (minutes) or full (paper) scale."""
    if scale not in ("desk", "full"):
        raise ConfigError(f"scale must be 'desk' or 'full', got {scale!r}")
    desk = scale == "desk"
    out = out_dir or os.path.join("results", kind)
    seeds = tuple(range(20))
    decayed = ScheduleConfig(1.0, 0.0)
    epsilon = ScheduleConfig(0.5, 0.0)

    if kind == "predict_chain":
        return ExperimentConfig(
            kind=kind,
            seeds=seeds,
            T=500 if desk else 10000,
            out_dir=out,
            variants=_prediction_variants(),
            alpha=decayed,
            alpha_model=decayed,
            chain=ChainConfig((100, 20, 5) if desk else (500, 50, 5)),
        )
    if kind == "sweep_fan":
        pairs = ((100, 5), (20, 5), (5, 5), (5, 20), (5, 100)) if desk else (
            (500, 5), (50, 5), (5, 5), (5, 50), (5, 500))
        return ExperimentConfig(
            kind=kind,
            seeds=seeds,
            T=500 if desk else 6000,
            out_dir=out,
            variants=_prediction_variants(),
            alpha=decayed,
            alpha_model=decayed,
            sweep_levels=pairs,
        )
    if kind == "control_maze":
        return ExperimentConfig(
            kind=kind,
            seeds=seeds,
            T=100,
            out_dir=out,
            variants=(
                VariantConfig("baseline"),
                VariantConfig("fw-dyna", "forward", "learned", "current"),
                VariantConfig("bw-dyna", "backward", "learned", "previous"),
            ),
            alpha=decayed,
            alpha_model=decayed,
            epsilon=epsilon,
            maze=MazeConfig(),
        )
    if kind == "ablate_frames":
        variants = []
        for direction, short in (("forward", "fw"), ("backward", "bw")):
            for reference, ref_short in (("previous", "prev"), ("current", "curr")):
                for learning, mode in ((True, "learn"), (False, "pure")):
                    variants.append(
                        VariantConfig(
                            f"{short}-{ref_short}-{mode}", direction, "learned", reference, learning
                        )
                    )
        return ExperimentConfig(
            kind=kind,
            seeds=seeds,
            T=300,
            out_dir=out,
            variants=tuple(variants),
            alpha=decayed,
            alpha_model=decayed,
            epsilon=epsilon,
            maze=MazeConfig(layout=detour_layout()),
        )
    if kind == "ablate_noise":
        episodes = 100
        noisy_episodes = 300
        corridor = corridor_layout()
        settings = (
            NoiseSettingConfig(
                "deterministic",
                MazeConfig(layout=corridor),
                ScheduleConfig(1.0, 0.0),
                ScheduleConfig(1.0, 0.0),
                episodes,
            ),
            NoiseSettingConfig(
                "stoch-reward-05",
                MazeConfig(layout=corridor, stochasticity_kind="stochastic_reward", stochasticity_p=0.5),
                ScheduleConfig(0.1, 0.0),
                ScheduleConfig(0.5, 0.0),
                noisy_episodes,
            ),
            NoiseSettingConfig(
                "stoch-reward-01",
                MazeConfig(layout=corridor, stochasticity_kind="stochastic_reward", stochasticity_p=0.1),
                ScheduleConfig(0.05, 0.0),
                ScheduleConfig(0.05, 0.0),
                noisy_episodes,
            ),
            NoiseSettingConfig(
                "stoch-dynamics-05",
                MazeConfig(layout=corridor, stochasticity_kind="stochastic_dynamics", stochasticity_p=0.5),
                ScheduleConfig(0.1, 0.0),
                ScheduleConfig(0.5, 0.0),
                noisy_episodes,
            ),
        )
        return ExperimentConfig(
            kind=kind,
            seeds=seeds,
            T=episodes,
            out_dir=out,
            variants=(
                VariantConfig("baseline"),
                VariantConfig("fw-dyna", "forward", "learned", "current"),
                VariantConfig("bw-dyna", "backward", "learned", "previous"),
            ),
            alpha=decayed,
            alpha_model=decayed,
            epsilon=epsilon,
            noise_settings=settings,
        )
    raise ConfigError(f"unknown experiment kind {kind!r}")


def _prediction_variants() -> tuple[VariantConfig, ...]:
    # Backward planning starts at the fresh current state, forward at the
    # state it just left.
    return (
        VariantConfig("fw-true", "forward", "true", "previous"),
        VariantConfig("fw-learned", "forward", "learned", "previous"),
        VariantConfig("bw-true", "backward", "true", "current"),
        VariantConfig("bw-learned", "backward", "learned", "current"),
    )
