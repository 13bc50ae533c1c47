"""Figure rendering for the CLI report paths.

Each function writes one PNG next to the delimited output it illustrates.
Rendering is file-only (Agg backend); nothing here is interactive.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def spectrum_figure(table: np.ndarray, path) -> None:
    """Magnitudes of the sensitive and label spectra across graph frequencies."""
    fig, ax = plt.subplots(figsize=(7, 3.2))
    ax.plot(table[:, 1], table[:, 2], ".", markersize=4, label="|sensitive spectrum|")
    ax.plot(table[:, 1], table[:, 3], ".", markersize=4, label="|label spectrum|",
            alpha=0.7)
    ax.set_xlabel("graph frequency")
    ax.set_ylabel("magnitude")
    ax.legend(frameon=False)
    _finish(fig, path)


def response_figure(eigenvalues: np.ndarray, response: np.ndarray, path) -> None:
    """Designed frequency response over the graph spectrum."""
    fig, ax = plt.subplots(figsize=(7, 3.2))
    ax.plot(eigenvalues, response, ".", markersize=4)
    ax.set_ylim(-0.05, 1.05)
    ax.set_xlabel("graph frequency")
    ax.set_ylabel("frequency response")
    _finish(fig, path)


def sweep_figure(rows: list[dict], param_name: str, path) -> None:
    """Mean metrics with one-sigma bars across a hyperparameter grid."""
    values = [row["value"] for row in rows]
    fig, ax = plt.subplots(figsize=(7, 3.6))
    for metric, label in (("accuracy", "accuracy"), ("delta_sp", "parity gap"),
                          ("delta_eo", "opportunity gap")):
        means = [row[f"{metric}_mean"] for row in rows]
        stds = [row[f"{metric}_std"] for row in rows]
        ax.errorbar(values, means, yerr=stds, marker="o", capsize=3, label=label)
    ax.set_xlabel(param_name)
    ax.set_ylabel("metric")
    ax.legend(frameon=False)
    _finish(fig, path)


def effective_figure(before: dict, after: dict, path) -> None:
    """Intra/inter weight totals of the aggregation operator, before vs after."""
    fig, ax = plt.subplots(figsize=(5, 3.2))
    positions = np.arange(2)
    width = 0.35
    ax.bar(positions - width / 2, [before["intra_weight"], before["inter_weight"]],
           width, label="all-pass")
    ax.bar(positions + width / 2, [after["intra_weight"], after["inter_weight"]],
           width, label="designed filter")
    ax.set_xticks(positions, ["intra-group", "inter-group"])
    ax.set_ylabel("total |weight|")
    ax.legend(frameon=False)
    _finish(fig, path)
