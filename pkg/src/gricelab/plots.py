"""Figure rendering for experiment results.

Each renderer takes a runner result and writes a PNG next to the CSV.  The
CSV remains the canonical output; figures are a convenience view.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

GROUP_STYLE = {"entailed": "-o", "non_entailed": "--s"}


def plot_sweep(result, path) -> None:
    """Mean |g_hat| vs corpus size, entailed vs non-entailed, per estimator."""
    estimators = sorted({key[0] for key in result.aggregates})
    fig, axes = plt.subplots(1, max(len(estimators), 1), figsize=(5.2 * max(len(estimators), 1), 4.0), squeeze=False)
    for ax, estimator in zip(axes[0], estimators):
        for group in ("entailed", "non_entailed"):
            points = sorted(
                (key[1], value)
                for key, value in result.aggregates.items()
                if key[0] == estimator and key[2] == group
            )
            if not points:
                continue
            xs, ys = zip(*points)
            ax.plot(xs, ys, GROUP_STYLE[group], label=group.replace("_", " "), markersize=4)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("training texts")
        ax.set_ylabel("mean |g|")
        ax.set_title(f"{estimator} estimator")
        ax.legend()
        ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_counterexample(result, path) -> None:
    """g score vs number of worlds where x is true but y is false."""
    finite = [(p.removed, p.g) for p in result.points if math.isfinite(p.g)]
    flagged = [p.removed for p in result.points if not math.isfinite(p.g)]
    fig, ax = plt.subplots(figsize=(5.6, 4.0))
    if finite:
        xs, ys = zip(*finite)
        ax.plot(xs, ys, "-o", markersize=4, label="g score")
    for k in flagged:
        ax.axvline(k, color="tab:red", linestyle=":", alpha=0.7)
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xlabel("worlds where x is true but y is false")
    ax.set_ylabel("g score")
    ax.set_title("entailment test score across the overlap sweep")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_complexity(result, path) -> None:
    xs = [row[0] for row in result.rows]
    ys = [float(row[1]) for row in result.rows]
    fig, ax = plt.subplots(figsize=(5.6, 4.0))
    ax.plot(xs, ys, "-o", markersize=4)
    ax.set_yscale("log")
    ax.set_xlabel("sentence length (words)")
    ax.set_ylabel("training sentences required")
    ax.set_title("sample complexity of frequency-based extraction")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_stats(result, path) -> None:
    utt = [(row[1], float(row[2])) for row in result.rows if row[0] == "utterance_frequency"]
    lengths = [(int(row[1]), float(row[2])) for row in result.rows if row[0] == "text_length_frequency"]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10.4, 4.0))
    ax1.bar(range(len(utt)), [v for _, v in utt])
    ax1.set_xticks(range(len(utt)))
    ax1.set_xticklabels([k for k, _ in utt], rotation=45, ha="right")
    ax1.set_ylabel("frequency")
    ax1.set_title("utterance usage")
    ax2.bar([k for k, _ in lengths], [v for _, v in lengths])
    ax2.set_xlabel("text length (tokens)")
    ax2.set_ylabel("frequency")
    ax2.set_title("text lengths")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
