"""Command-line front end.

One subcommand per built-in experiment, plus ``analyze`` to rebuild the
summary and plot from previously written curve files. Exit codes: 0 on
success, 2 for configuration problems, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys

import numpy as np

from ..errors import ConfigError, NumericalError
from .config import ExperimentConfig, load_config
from .experiments import _expanded_variants, default_config, run_experiment
from .metrics import RunResult, aggregate, write_summary_csv
from .plotting import plot_summary

_KIND_OF_COMMAND = {
    "predict-chain": "predict_chain",
    "control-maze": "control_maze",
    "sweep-fan": "sweep_fan",
    "ablate-frames": "ablate_frames",
    "ablate-noise": "ablate_noise",
}


def _parse_seeds(text: str) -> tuple[int, ...]:
    if "," in text:
        return tuple(int(part) for part in text.split(",") if part.strip())
    return tuple(range(int(text)))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bidyna", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for command in _KIND_OF_COMMAND:
        p = sub.add_parser(command, help=f"run the {command.replace('-', ' ')} experiment")
        p.add_argument("--config", help="JSON experiment config; overrides the built-in defaults")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seeds", help="seed count, or comma-separated explicit seeds")
        p.add_argument("--parallel", type=int, help="worker processes for the seed loop")
        p.add_argument("--scale", choices=("desk", "full"), default="desk",
                       help="built-in config size (ignored with --config)")
    p = sub.add_parser("analyze", help="rebuild summary.csv and curves.svg from curve files")
    p.add_argument("--out", required=True, help="experiment output directory to analyze")
    return parser


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    if args.config:
        config = load_config(args.config)
        expected = _KIND_OF_COMMAND[args.command]
        if config.kind != expected:
            raise ConfigError(f"config kind {config.kind!r} does not match subcommand {args.command!r}")
    else:
        config = default_config(_KIND_OF_COMMAND[args.command], args.scale, args.out)
    overrides = {}
    if args.out:
        overrides["out_dir"] = args.out
    if args.seeds:
        overrides["seeds"] = _parse_seeds(args.seeds)
    if args.parallel:
        overrides["parallel"] = args.parallel
    if overrides:
        config = dataclasses.replace(config, **overrides)
    return config


def _preferred_variant_order(out_dir: str) -> tuple[str, ...]:
    """The variant order of the original run, recovered from its metadata."""
    meta_path = os.path.join(out_dir, "meta.json")
    if not os.path.exists(meta_path):
        return ()
    with open(meta_path, encoding="utf-8") as fh:
        raw = json.load(fh).get("config")
    if raw is None:
        return ()
    try:
        return _expanded_variants(ExperimentConfig.from_dict(raw))
    except ConfigError:
        return ()


def _read_curves_dir(out_dir: str) -> tuple[list[RunResult], str, tuple[str, ...], tuple[str, ...]]:
    """Reload per-variant curve CSVs written by a previous run."""
    try:
        entries = os.listdir(out_dir)
    except OSError as exc:
        raise ConfigError(f"cannot read {out_dir}: {exc}") from exc
    names = sorted(n for n in entries if n.startswith("curves_") and n.endswith(".csv"))
    if not names:
        raise ConfigError(f"no curve files found under {out_dir}")
    results: list[RunResult] = []
    index_name = "step"
    columns: tuple[str, ...] = ()
    variant_order: list[str] = []
    digest = ""
    meta_path = os.path.join(out_dir, "meta.json")
    if os.path.exists(meta_path):
        with open(meta_path, encoding="utf-8") as fh:
            digest = json.load(fh).get("config_hash", "")
    for name in names:
        with open(os.path.join(out_dir, name), newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ConfigError(f"{name} is empty")
        header = list(rows[0].keys())
        index_name = header[1]
        columns = tuple(header[3:])
        per_seed: dict[int, dict[str, list[float]]] = {}
        variant = rows[0]["variant"]
        variant_order.append(variant)
        for row in rows:
            curves = per_seed.setdefault(int(row["seed"]), {c: [] for c in columns})
            for c in columns:
                curves[c].append(float(row[c]))
        for seed in sorted(per_seed):
            arrays = {c: np.asarray(v) for c, v in per_seed[seed].items()}
            results.append(RunResult(variant, seed, arrays, digest, 0.0))
    preferred = [v for v in _preferred_variant_order(out_dir) if v in variant_order]
    ordered = preferred + [v for v in variant_order if v not in preferred]
    return results, index_name, columns, tuple(ordered)


def _analyze(out_dir: str) -> None:
    results, index_name, columns, variant_order = _read_curves_dir(out_dir)
    summary = aggregate(results, columns[0], variant_order)
    write_summary_csv(os.path.join(out_dir, "summary.csv"), summary)
    plot_summary(summary, os.path.join(out_dir, "curves.svg"), index_name, results[0].config_hash)
    for name in variant_order:
        print(f"{name}: final {columns[0]} mean = {summary.final_mean(name):.4f}")


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "analyze":
            _analyze(args.out)
            return 0
        config = _resolve_config(args)
        run_experiment(config)
        print(f"results written to {config.out_dir}")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
