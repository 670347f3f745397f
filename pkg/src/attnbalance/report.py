"""Figure rendering for sweep tables, evaluation reports, and correlation cells.

All functions write PNG files next to the delimited tables they visualize.
The manifest hash travels in the PNG metadata so figures stay traceable, and
rendering is deterministic for fixed inputs.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

from .errors import DataError

_METRIC_COLORS = {
    "accuracy": "#1f77b4",
    "precision": "#2ca02c",
    "recall": "#9467bd",
    "f1": "#d62728",
    "yes_ratio": "#7f7f7f",
}


def _png_metadata(manifest_hash: str) -> dict:
    meta = {"Software": "attnbalance"}
    if manifest_hash:
        meta["Description"] = f"manifest_hash={manifest_hash}"
    return meta


def read_sweep_csv(path) -> list[dict]:
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            lines = [line for line in handle if not line.startswith("#")]
    except OSError as exc:
        raise DataError(f"cannot read sweep csv {path}: {exc}") from exc
    return list(csv.DictReader(lines))


def plot_sweep(csv_path, out_png, manifest_hash: str = "") -> Path:
    """Line chart of accuracy and F1 over the sweep points."""
    rows = [row for row in read_sweep_csv(csv_path) if row.get("status") == "ok"]
    if not rows:
        raise DataError(f"{csv_path}: no completed sweep points to plot")
    kind = rows[0].get("sweep_kind", "sweep")
    points = [row["point"] for row in rows]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for metric in ("accuracy", "f1"):
        values = [float(row[metric]) for row in rows]
        ax.plot(points, values, marker="o", label=metric.upper(),
                color=_METRIC_COLORS[metric])
    ax.set_xlabel(kind.replace("-", " "))
    ax.set_ylabel("percent")
    ax.set_ylim(0, 105)
    ax.grid(True, alpha=0.3)
    ax.legend()
    ax.set_title(f"{kind} sweep")
    fig.tight_layout()
    out = Path(out_png)
    fig.savefig(out, dpi=120, metadata=_png_metadata(manifest_hash))
    plt.close(fig)
    return out


def plot_eval_rows(named_rows: list[tuple[str, list[dict]]], out_png, manifest_hash: str = "") -> Path:
    """Grouped bars of the five metrics, one group per report row.

    ``named_rows`` pairs a source label (e.g. baseline vs rebalanced) with
    that report's rows; rows are keyed "<source>:<row name>".
    """
    metrics = ("accuracy", "precision", "recall", "f1", "yes_ratio")
    groups: list[tuple[str, dict]] = []
    for source, rows in named_rows:
        for row in rows:
            label = f"{source}:{row['name']}" if source else row["name"]
            groups.append((label, row))
    if not groups:
        raise DataError("no evaluation rows to plot")
    width = 0.8 / len(metrics)
    fig, ax = plt.subplots(figsize=(max(6.0, 1.6 * len(groups)), 4.2))
    for j, metric in enumerate(metrics):
        xs = [i + j * width for i in range(len(groups))]
        ys = [float(row[metric]) for _, row in groups]
        ax.bar(xs, ys, width=width, label=metric.upper(), color=_METRIC_COLORS[metric])
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(groups))])
    ax.set_xticklabels([label for label, _ in groups], rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("percent")
    ax.set_ylim(0, 105)
    ax.grid(True, axis="y", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    out = Path(out_png)
    fig.savefig(out, dpi=120, metadata=_png_metadata(manifest_hash))
    plt.close(fig)
    return out


def plot_correlation_cells(proportions: dict, pearson: float, out_png, manifest_hash: str = "") -> Path:
    """2x2 cell chart of the (X, Y) hallucination joint distribution."""
    fig, ax = plt.subplots(figsize=(4.6, 4.2))
    for (x, y), share in proportions.items():
        ax.add_patch(
            plt.Rectangle((x, y), 0.92, 0.92, color="#1f77b4", alpha=0.15 + 0.75 * share)
        )
        ax.text(x + 0.46, y + 0.46, f"({x},{y})\n{100 * share:.2f}%",
                ha="center", va="center", fontsize=11)
    ax.set_xlim(-0.2, 2.2)
    ax.set_ylim(-0.2, 2.2)
    ax.set_xticks([0.46, 1.46], labels=["X=0", "X=1"])
    ax.set_yticks([0.46, 1.46], labels=["Y=0", "Y=1"])
    title = "single vs multi hallucination"
    if pearson == pearson:  # not NaN
        title += f" (r = {pearson:.4f})"
    ax.set_title(title)
    fig.tight_layout()
    out = Path(out_png)
    fig.savefig(out, dpi=120, metadata=_png_metadata(manifest_hash))
    plt.close(fig)
    return out
