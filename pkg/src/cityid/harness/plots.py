"""Report figures: EER per system, per-city sound weights, EER vs basis count."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FEATURE_LABELS = {
    "statistical": "Statistical",
    "weights": "Weights Matrix",
    "linear_combination": "Linear Combination",
}

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)
    return path


def plot_eer_by_system(reports, path) -> Path:
    """Grouped bars: one group per feature kind, one bar per classifier."""
    kinds = [k for k in FEATURE_LABELS if any(r["feature_kind"] == k for r in reports)]
    clfs = sorted({r["classifier"] for r in reports})
    lookup = {(r["feature_kind"], r["classifier"]): r["mean_eer"] for r in reports}
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.0))
        width = 0.8 / max(1, len(clfs))
        x = np.arange(len(kinds))
        for i, clf in enumerate(clfs):
            vals = [100 * lookup.get((k, clf), np.nan) for k in kinds]
            bars = ax.bar(x + (i - (len(clfs) - 1) / 2) * width, vals, width, label=clf.upper())
            for b, v in zip(bars, vals):
                if np.isfinite(v):
                    ax.annotate(f"{v:.1f}", (b.get_x() + b.get_width() / 2, v), ha="center", va="bottom", fontsize=7)
        ax.axhline(50, color="0.5", ls=":", lw=0.8)
        ax.set_xticks(x)
        ax.set_xticklabels([FEATURE_LABELS[k] for k in kinds])
        ax.set_ylabel("EER (%)")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_city_weights(city_weights: dict, path, key: str = "raw_mean") -> Path:
    """Heat map of mean per-class weight for each city."""
    table = city_weights[key]
    cities = list(table)
    classes = list(next(iter(table.values())))
    m = np.array([[table[c][k] for k in classes] for c in cities])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6.0, 0.3 * len(cities) + 1.5))
        lim = np.abs(m).max() or 1.0
        im = ax.imshow(m, cmap="RdBu_r", vmin=-lim, vmax=lim, aspect="auto")
        ax.set_xticks(range(len(classes)))
        ax.set_xticklabels([c.replace("_", " ") for c in classes], rotation=40, ha="right")
        ax.set_yticks(range(len(cities)))
        ax.set_yticklabels(cities)
        label = "mean weight" if key == "raw_mean" else "mean peak z-score"
        fig.colorbar(im, ax=ax, label=label)
        return _save(fig, path)


def plot_ablation(ablation: dict, path) -> Path:
    """Mean EER against number of bases, with each group's EER as a dot."""
    sizes = sorted(int(k) for k in ablation["mean_eer_by_size"])
    means = [100 * ablation["mean_eer_by_size"][str(s)] for s in sizes]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 2.5))
        for g in ablation["groups"]:
            ax.plot(g["size"], 100 * g["eer"], "o", color="0.7", ms=3)
        ax.plot(sizes, means, "-o", color="C0")
        for s, v in zip(sizes, means):
            ax.annotate(f"{v:.1f}", (s, v), textcoords="offset points", xytext=(0, 5), ha="center", fontsize=7)
        ax.set_xticks(sizes)
        ax.set_xlabel("number of sound bases")
        ax.set_ylabel("mean EER (%)")
        return _save(fig, path)
