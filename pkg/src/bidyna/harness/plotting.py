"""Static SVG learning-curve plots.

Rendering is forced through the Agg backend and stripped of timestamps and
hash randomness so that identical summaries produce identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import MetricSummary


def plot_summary(summary: MetricSummary, path: str, index_name: str, hashsalt: str) -> None:
    """Write a mean curve with a stderr band per variant to ``path`` as SVG."""
    with plt.rc_context({"svg.hashsalt": hashsalt}):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for name in summary.variants:
            mean = summary.mean[name]
            err = summary.stderr[name]
            x = np.arange(1, len(mean) + 1)
            (line,) = ax.plot(x, mean, label=name, linewidth=1.2)
            ax.fill_between(x, mean - err, mean + err, alpha=0.25, color=line.get_color(), linewidth=0)
        ax.set_xlabel(index_name)
        ax.set_ylabel(summary.metric)
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
