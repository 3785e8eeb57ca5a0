"""Run records, aggregation, and CSV output.

CSV files are the deterministic artifact of a run: fixed row order, full
``repr`` float formatting, no timestamps. The same config and seed list must
produce byte-identical files no matter how the work was scheduled.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError


def rmsve(values: np.ndarray, reference: np.ndarray) -> float:
    """Euclidean distance between a value table and its reference."""
    values = np.asarray(values, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if values.shape != reference.shape:
        raise ValidationError(f"shape mismatch: {values.shape} vs {reference.shape}")
    return float(np.linalg.norm(values - reference))


def normalized_auc(aucs: dict[str, float]) -> dict[str, float]:
    """Zero-center AUCs across compared variants and scale by their range.

    A degenerate comparison (all equal) maps everything to 0.
    """
    vals = np.array(list(aucs.values()), dtype=float)
    spread = float(vals.max() - vals.min())
    center = float(vals.mean())
    if spread == 0.0:
        return {k: 0.0 for k in aucs}
    return {k: (v - center) / spread for k, v in aucs.items()}


@dataclass
class RunResult:
    """One (variant, seed) run: metric curves plus provenance."""

    variant: str
    seed: int
    curves: dict[str, np.ndarray]
    config_hash: str
    wall_time: float


@dataclass
class MetricSummary:
    """Across-seed aggregate of one experiment's primary metric."""

    metric: str
    variants: tuple[str, ...]
    mean: dict[str, np.ndarray]
    stderr: dict[str, np.ndarray]
    auc: dict[str, float]
    auc_normalized: dict[str, float]

    def final_mean(self, variant: str) -> float:
        return float(self.mean[variant][-1])

    def final_stderr(self, variant: str) -> float:
        return float(self.stderr[variant][-1])


def aggregate(results: list[RunResult], metric: str, variant_order: tuple[str, ...]) -> MetricSummary:
    """Mean, standard error, and normalized AUC per variant.

    Standard error uses the sample standard deviation over seeds and is zero
    for a single seed. The per-variant AUC is the mean over seeds of the
    summed curve.

    Raises:
        ValidationError: on missing variants or inconsistent curve lengths.
    """
    by_variant: dict[str, list[RunResult]] = {name: [] for name in variant_order}
    for r in results:
        if r.variant not in by_variant:
            raise ValidationError(f"unexpected variant {r.variant!r} in results")
        by_variant[r.variant].append(r)
    mean: dict[str, np.ndarray] = {}
    stderr: dict[str, np.ndarray] = {}
    auc: dict[str, float] = {}
    for name, runs in by_variant.items():
        if not runs:
            raise ValidationError(f"no runs for variant {name!r}")
        try:
            curves = np.stack(
                [np.asarray(r.curves[metric], dtype=float) for r in sorted(runs, key=lambda r: r.seed)]
            )
        except ValueError as exc:
            raise ValidationError(f"variant {name!r}: curves must be equal-length") from exc
        if curves.ndim != 2:
            raise ValidationError("curves must be one-dimensional and equal-length")
        mean[name] = curves.mean(axis=0)
        if curves.shape[0] >= 2:
            stderr[name] = curves.std(axis=0, ddof=1) / np.sqrt(curves.shape[0])
        else:
            stderr[name] = np.zeros(curves.shape[1])
        auc[name] = float(curves.sum(axis=1).mean())
    return MetricSummary(metric, tuple(variant_order), mean, stderr, auc, normalized_auc(auc))


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_curves_csv(path: str, results: list[RunResult], index_name: str, columns: tuple[str, ...]) -> None:
    """Write one variant's per-seed curves: seed, index, variant, curve columns.

    Rows are ordered by (seed, index); every (seed, index) pair appears once.
    """
    runs = sorted(results, key=lambda r: r.seed)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("seed", index_name, "variant") + columns)
        for run in runs:
            length = len(run.curves[columns[0]])
            for i in range(length):
                writer.writerow(
                    [run.seed, i, run.variant] + [_fmt(run.curves[c][i]) for c in columns]
                )


def write_summary_csv(path: str, summary: MetricSummary) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("variant", "auc_normalized", "final_mean", "final_stderr"))
        for name in summary.variants:
            writer.writerow(
                (name, _fmt(summary.auc_normalized[name]), _fmt(summary.final_mean(name)),
                 _fmt(summary.final_stderr(name)))
            )
