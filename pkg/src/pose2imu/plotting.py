"""Figure rendering for reports. Output is SVG with fixed ids and no timestamps."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "svg.hashsalt": "pose2imu",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.0,
}
REAL_COLOR = "tab:red"
SIM_COLOR = "tab:blue"


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def signal_overlay(real, simulated, path, rate=50.0, title=None, ylabel="value"):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(7.0, 2.6))
        t = np.arange(len(real)) / rate
        ax.plot(t, real, color=REAL_COLOR, label="real")
        ax.plot(t, simulated, color=SIM_COLOR, label="simulated")
        ax.set_xlabel("time (s)")
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend(loc="upper right", frameon=False)
        fig.tight_layout()
        _save(fig, path)


def f1_vs_users(rows, path, title=None):
    """Macro F1 against training-user count, one line per (mix, channel set, preprocessing)."""
    groups: dict[str, list[tuple[int, float]]] = {}
    for r in rows:
        if r.get("status") != "ok":
            continue
        key = f"{r['mix']} | {r['channel_set']} | {r['preprocessing']}"
        groups.setdefault(key, []).append((int(r["k"]), float(r["macro_f1"])))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        for key in sorted(groups):
            pts = sorted(groups[key])
            ks = sorted({k for k, _ in pts})
            means = [np.mean([f for kk, f in pts if kk == k]) for k in ks]
            ax.plot(ks, means, marker="o", markersize=3, label=key)
            ax.scatter([k for k, _ in pts], [f for _, f in pts], s=6, alpha=0.4)
        ax.set_xlabel("users in training set")
        ax.set_ylabel("macro F1")
        ax.set_ylim(0, 1.02)
        if title:
            ax.set_title(title)
        if groups:
            ax.legend(loc="lower right", frameon=False, fontsize=6)
        fig.tight_layout()
        _save(fig, path)


def confusion(cm, class_names, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.6, 3.2))
        ax.imshow(cm, cmap="Blues")
        ax.set_xticks(range(len(class_names)), class_names, rotation=45, ha="right")
        ax.set_yticks(range(len(class_names)), class_names)
        for i in range(cm.shape[0]):
            for j in range(cm.shape[1]):
                ax.text(j, i, int(cm[i, j]), ha="center", va="center", fontsize=7)
        ax.set_xlabel("predicted")
        ax.set_ylabel("true")
        fig.tight_layout()
        _save(fig, path)
