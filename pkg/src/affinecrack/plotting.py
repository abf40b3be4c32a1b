"""Figures written next to the CSV outputs: learning curves and accuracy vs. length."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 3.8),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 10,
    "legend.frameon": False,
}


def _save(fig, path: Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    # fixed metadata keeps repeated renders identical
    metadata = {"Software": None} if path.suffix == ".png" else {"Date": None}
    fig.savefig(path, dpi=120, metadata=metadata)
    plt.close(fig)
    return path


def plot_learning_curves(epochs: Sequence, path, title: str | None = None) -> Path:
    """Train/validation accuracy per epoch, with loss on a twin axis."""
    x = [r.epoch for r in epochs]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(x, [r.train_acc for r in epochs], "o-", ms=3, label="train accuracy")
        ax.plot(x, [r.val_acc for r in epochs], "s-", ms=3, label="validation accuracy")
        ax.set_xlabel("epoch")
        ax.set_ylabel("accuracy")
        ax.set_ylim(-0.02, 1.02)
        loss_ax = ax.twinx()
        loss_ax.plot(x, [r.train_loss for r in epochs], ":", color="0.4", label="train loss")
        loss_ax.plot(x, [r.val_loss for r in epochs], "--", color="0.6", label="validation loss")
        loss_ax.set_ylabel("cross-entropy")
        loss_ax.grid(False)
        h1, l1 = ax.get_legend_handles_labels()
        h2, l2 = loss_ax.get_legend_handles_labels()
        ax.legend(h1 + h2, l1 + l2, loc="center right", fontsize=8)
        if title:
            ax.set_title(title)
        return _save(fig, path)


def plot_accuracy_vs_length(rows: Sequence[dict], path) -> Path:
    ok = [r for r in rows if r.get("status") == "ok"]
    lengths = [r["length"] for r in ok]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(lengths, [r["test_accuracy"] for r in ok], "o-", label="hybrid network")
        ax.plot(lengths, [r["classical_accuracy"] for r in ok], "s--", label="chi-square brute force")
        ax.axhline(1 / 312, color="0.5", lw=0.8, ls=":", label="chance (1/312)")
        ax.set_xscale("log")
        ax.set_xlabel("ciphertext length L")
        ax.set_ylabel("test accuracy")
        ax.set_ylim(-0.02, 1.02)
        ax.legend(fontsize=8)
        return _save(fig, path)
