"""Experiment configuration: typed, strictly parsed, canonically hashable.

Config files are JSON objects whose keys mirror the dataclass fields below,
one to one. Unknown keys are errors, not warnings: a typo that silently
changes nothing is worse than a crash.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from ..envs import Deterministic, StochasticDynamics, StochasticReward
from ..errors import ConfigError

KINDS = ("predict_chain", "control_maze", "sweep_fan", "ablate_frames", "ablate_noise")
PREDICTION_KINDS = ("predict_chain", "sweep_fan")
CONTROL_KINDS = ("control_maze", "ablate_frames", "ablate_noise")


def _take(raw: dict, cls_name: str, fields: set[str]) -> None:
    unknown = set(raw) - fields
    if unknown:
        raise ConfigError(f"unknown {cls_name} keys: {sorted(unknown)}")


@dataclass(frozen=True)
class ScheduleConfig:
    """Endpoints of a linear schedule; the horizon comes from the run length."""

    start: float
    end: float

    @classmethod
    def from_dict(cls, raw: dict) -> "ScheduleConfig":
        _take(raw, "schedule", {"start", "end"})
        try:
            return cls(float(raw["start"]), float(raw["end"]))
        except KeyError as exc:
            raise ConfigError(f"schedule is missing key {exc}") from exc


@dataclass(frozen=True)
class ChainConfig:
    level_sizes: tuple[int, ...]
    reward_mean: float = 10.0
    reward_std: float = 10.0

    @classmethod
    def from_dict(cls, raw: dict) -> "ChainConfig":
        _take(raw, "chain", {"level_sizes", "reward_mean", "reward_std"})
        if "level_sizes" not in raw:
            raise ConfigError("chain config needs level_sizes")
        return cls(
            tuple(int(s) for s in raw["level_sizes"]),
            float(raw.get("reward_mean", 10.0)),
            float(raw.get("reward_std", 10.0)),
        )


@dataclass(frozen=True)
class MazeConfig:
    layout: str | None = None  # None means the packaged default layout
    stochasticity_kind: str = "deterministic"
    stochasticity_p: float = 0.0
    max_episode_steps: int = 400
    discount: float = 0.99

    @classmethod
    def from_dict(cls, raw: dict) -> "MazeConfig":
        _take(
            raw,
            "maze",
            {"layout", "stochasticity_kind", "stochasticity_p", "max_episode_steps", "discount"},
        )
        kind = raw.get("stochasticity_kind", "deterministic")
        if kind not in ("deterministic", "stochastic_dynamics", "stochastic_reward"):
            raise ConfigError(f"unknown stochasticity_kind {kind!r}")
        return cls(
            raw.get("layout"),
            kind,
            float(raw.get("stochasticity_p", 0.0)),
            int(raw.get("max_episode_steps", 400)),
            float(raw.get("discount", 0.99)),
        )

    def stochasticity(self):
        if self.stochasticity_kind == "deterministic":
            return Deterministic()
        if self.stochasticity_kind == "stochastic_dynamics":
            return StochasticDynamics(self.stochasticity_p)
        return StochasticReward(self.stochasticity_p)


@dataclass(frozen=True)
class VariantConfig:
    """One planner arrangement to run and compare.

    ``direction`` None is the model-free baseline; ``model`` picks between a
    live count model ("learned") and an exact prebuilt one ("true").
    """

    name: str
    direction: str | None = None
    model: str = "none"
    reference: str = "current"
    learning: bool = True
    planning_steps: int = 1

    def __post_init__(self):
        if not self.name or any(ch in self.name for ch in " /\\"):
            raise ConfigError(f"variant name {self.name!r} must be non-empty without spaces or slashes")
        if self.direction not in (None, "forward", "backward"):
            raise ConfigError(f"variant {self.name}: bad direction {self.direction!r}")
        if self.model not in ("none", "learned", "true"):
            raise ConfigError(f"variant {self.name}: bad model {self.model!r}")
        if self.reference not in ("previous", "current"):
            raise ConfigError(f"variant {self.name}: bad reference {self.reference!r}")
        if self.direction is not None and self.model == "none":
            raise ConfigError(f"variant {self.name}: planning needs a model")
        if self.planning_steps < 0:
            raise ConfigError(f"variant {self.name}: planning_steps must be non-negative")

    @classmethod
    def from_dict(cls, raw: dict) -> "VariantConfig":
        _take(raw, "variant", {"name", "direction", "model", "reference", "learning", "planning_steps"})
        if "name" not in raw:
            raise ConfigError("variant needs a name")
        return cls(
            str(raw["name"]),
            raw.get("direction"),
            raw.get("model", "none"),
            raw.get("reference", "current"),
            bool(raw.get("learning", True)),
            int(raw.get("planning_steps", 1)),
        )


@dataclass(frozen=True)
class NoiseSettingConfig:
    """One stochasticity setting of the noise ablation, with its own rates."""

    name: str
    maze: MazeConfig
    alpha: ScheduleConfig
    alpha_model: ScheduleConfig
    T: int

    @classmethod
    def from_dict(cls, raw: dict) -> "NoiseSettingConfig":
        _take(raw, "noise setting", {"name", "maze", "alpha", "alpha_model", "T"})
        for key in ("name", "maze", "alpha", "alpha_model", "T"):
            if key not in raw:
                raise ConfigError(f"noise setting needs {key}")
        return cls(
            str(raw["name"]),
            MazeConfig.from_dict(raw["maze"]),
            ScheduleConfig.from_dict(raw["alpha"]),
            ScheduleConfig.from_dict(raw["alpha_model"]),
            int(raw["T"]),
        )


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seeds: tuple[int, ...]
    T: int
    out_dir: str
    variants: tuple[VariantConfig, ...]
    alpha: ScheduleConfig
    alpha_model: ScheduleConfig
    epsilon: ScheduleConfig | None = None
    chain: ChainConfig | None = None
    maze: MazeConfig | None = None
    sweep_levels: tuple[tuple[int, int], ...] | None = None
    noise_settings: tuple[NoiseSettingConfig, ...] | None = None
    schedule_unit: str = "step"
    parallel: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}, expected one of {KINDS}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if self.T < 1:
            raise ConfigError("T must be positive")
        if not self.variants:
            raise ConfigError("at least one variant is required")
        names = [v.name for v in self.variants]
        if len(set(names)) != len(names):
            raise ConfigError("variant names must be distinct")
        if self.schedule_unit not in ("episode", "step"):
            raise ConfigError(f"schedule_unit must be 'episode' or 'step', got {self.schedule_unit!r}")
        if self.parallel < 1:
            raise ConfigError("parallel must be at least 1")
        if self.kind in PREDICTION_KINDS:
            if self.kind == "predict_chain" and self.chain is None:
                raise ConfigError("predict_chain needs a chain config")
            if self.kind == "sweep_fan" and not self.sweep_levels:
                raise ConfigError("sweep_fan needs sweep_levels")
        if self.kind in CONTROL_KINDS:
            if self.epsilon is None:
                raise ConfigError(f"{self.kind} needs an epsilon schedule")
            if self.kind == "ablate_noise":
                if not self.noise_settings:
                    raise ConfigError("ablate_noise needs noise_settings")
            elif self.maze is None:
                raise ConfigError(f"{self.kind} needs a maze config")
            for v in self.variants:
                if v.direction == "backward" and v.model == "true":
                    raise ConfigError(
                        f"variant {v.name}: an exact backward model is policy-dependent and not "
                        "available for control runs"
                    )

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        _take(
            raw,
            "experiment",
            {
                "kind", "seeds", "T", "out_dir", "variants", "alpha", "alpha_model", "epsilon",
                "chain", "maze", "sweep_levels", "noise_settings", "schedule_unit", "parallel",
            },
        )
        for key in ("kind", "seeds", "T", "out_dir", "variants", "alpha", "alpha_model"):
            if key not in raw:
                raise ConfigError(f"experiment config needs {key}")
        return cls(
            kind=str(raw["kind"]),
            seeds=tuple(int(s) for s in raw["seeds"]),
            T=int(raw["T"]),
            out_dir=str(raw["out_dir"]),
            variants=tuple(VariantConfig.from_dict(v) for v in raw["variants"]),
            alpha=ScheduleConfig.from_dict(raw["alpha"]),
            alpha_model=ScheduleConfig.from_dict(raw["alpha_model"]),
            epsilon=ScheduleConfig.from_dict(raw["epsilon"]) if raw.get("epsilon") is not None else None,
            chain=ChainConfig.from_dict(raw["chain"]) if raw.get("chain") is not None else None,
            maze=MazeConfig.from_dict(raw["maze"]) if raw.get("maze") is not None else None,
            sweep_levels=(
                tuple(tuple(int(x) for x in pair) for pair in raw["sweep_levels"])
                if raw.get("sweep_levels") is not None
                else None
            ),
            noise_settings=(
                tuple(NoiseSettingConfig.from_dict(s) for s in raw["noise_settings"])
                if raw.get("noise_settings") is not None
                else None
            ),
            schedule_unit=str(raw.get("schedule_unit", "step")),
            parallel=int(raw.get("parallel", 1)),
        )


def _to_plain(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: _to_plain(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {k: _to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (tuple, list)):
        return [_to_plain(v) for v in obj]
    return obj


def config_to_dict(config: ExperimentConfig) -> dict:
    return _to_plain(config)


def canonical_json(config: ExperimentConfig) -> str:
    return json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))


def config_hash(config: ExperimentConfig) -> str:
    """Stable 16-hex-digit digest of the configuration's scientific content.

    Where results are written and how the seed loop is scheduled change
    nothing about what was run, so ``out_dir`` and ``parallel`` are excluded.
    """
    plain = config_to_dict(config)
    del plain["out_dir"]
    del plain["parallel"]
    text = json.dumps(plain, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def load_config(path: str) -> ExperimentConfig:
    """Load and strictly validate a JSON config file.

    Raises:
        ConfigError: on malformed JSON, unknown keys, or invalid values.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return ExperimentConfig.from_dict(raw)
