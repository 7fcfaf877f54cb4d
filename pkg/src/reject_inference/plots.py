"""SVG figures for the experiment outputs. Needs the ``plots`` extra (matplotlib)."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:  # pragma: no cover - depends on the environment
        raise RuntimeError("plotting needs matplotlib: install the plots extra") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def score_densities(scores: dict, edges: np.ndarray, path: Path):
    """Overlaid score histograms, one per model, as densities."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, s in scores.items():
        ax.hist(s, bins=edges, density=True, histtype="step", linewidth=1.5, label=name)
    ax.set_xlabel("predicted PD on the unbiased sample")
    ax.set_ylabel("density")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def auc_scatter(variants: list, rho: float, path: Path):
    """Accepts AUC against unbiased AUC for each scorer variant."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.scatter([v["accepts_auc"] for v in variants], [v["unbiased_auc"] for v in variants])
    ax.set_xlabel("AUC on accepts (cross-validated)")
    ax.set_ylabel("AUC on unbiased sample")
    ax.set_title(f"Spearman {rho:.2f}")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def selection_figure(boot_rows: list, path: Path):
    """Bootstrap distributions of unbiased metrics, grouped by selecting criterion."""
    plt = _pyplot()
    metrics = ("unbiased_auc", "unbiased_brier", "unbiased_rp")
    criteria = sorted({r[0] for r in boot_rows})
    fig, axes = plt.subplots(1, len(metrics), figsize=(4 * len(metrics), 4))
    for ax, metric in zip(np.atleast_1d(axes), metrics):
        data = [[r[5] for r in boot_rows if r[0] == c and r[4] == metric] for c in criteria]
        ax.boxplot(data)
        ax.set_xticks(range(1, len(criteria) + 1), criteria)
        ax.set_title(metric)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
