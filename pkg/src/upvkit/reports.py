"""CSV/JSON report writers and their companion matplotlib figures.

Every CLI command that produces delimited output also renders the matching
figure next to it, and everything written lands in a manifest with content
digests so a rerun can be diffed file by file.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict
from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .corpus import CorpusStats
from .evaluate import MetricsReport, RocCurve, SweepRow
from .taxonomy import Taxonomy
from .train import TrainHistory
from .util import file_digest

# one colour per T1 pillar, assigned in taxonomy order
_PILLAR_CYCLE = ("#c0392b", "#2980b9", "#27ae60", "#8e44ad", "#d68910", "#16a085")


def pillar_colors(tax: Taxonomy) -> dict[str, str]:
    return {t1: _PILLAR_CYCLE[i % len(_PILLAR_CYCLE)] for i, t1 in enumerate(tax.t1_ids)}


def write_manifest(out_dir: Path, command: str, seed: int | None, files: Sequence[Path]) -> Path:
    manifest = {
        "command": command,
        "seed": seed,
        "generated_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "files": [
            {
                "path": str(p.relative_to(out_dir)),
                "sha256": file_digest(p),
                "bytes": p.stat().st_size,
            }
            for p in sorted(files)
        ],
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


# -- corpus statistics --------------------------------------------------------


def write_support_csv(stats: CorpusStats, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "support", "percent"])
        for label in stats.labels:
            writer.writerow([label, stats.support[label], f"{stats.percent[label]:.4f}"])


def write_cooccurrence_csv(stats: CorpusStats, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", *stats.labels])
        for i, label in enumerate(stats.labels):
            writer.writerow([label, *stats.cooccurrence[i].tolist()])


def render_support_figure(stats: CorpusStats, tax: Taxonomy, path: Path) -> None:
    colors = pillar_colors(tax)
    labels = list(stats.labels)
    values = [stats.support[l] for l in labels]
    bar_colors = [colors[tax.node(l).t1] for l in labels]
    fig, ax = plt.subplots(figsize=(max(6, 0.22 * len(labels)), 4.5))
    ax.bar(range(len(labels)), values, color=bar_colors)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=90, fontsize=6)
    ax.set_ylabel("support")
    ax.set_title("label support")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_cooccurrence_figure(stats: CorpusStats, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 6))
    im = ax.imshow(stats.cooccurrence, cmap="viridis")
    ax.set_xticks(range(len(stats.labels)))
    ax.set_yticks(range(len(stats.labels)))
    ax.set_xticklabels(stats.labels, rotation=90, fontsize=5)
    ax.set_yticklabels(stats.labels, fontsize=5)
    fig.colorbar(im, ax=ax, label="samples")
    ax.set_title("label co-occurrence")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


# -- metrics ------------------------------------------------------------------


def metrics_to_dict(report: MetricsReport) -> dict:
    return {
        "protocol": report.protocol,
        "notices": report.notices,
        "levels": {
            level: {
                "micro": dict(zip(("precision", "recall", "f1"), lr.micro)),
                "macro": dict(zip(("precision", "recall", "f1"), lr.macro)),
                "per_label": {lab: asdict(m) for lab, m in lr.per_label.items()},
            }
            for level, lr in report.levels.items()
        },
    }


def write_metrics_json(reports: Iterable[MetricsReport], path: Path) -> None:
    payload = {r.protocol: metrics_to_dict(r) for r in reports}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_per_label_csv(report: MetricsReport, tax: Taxonomy, path: Path) -> None:
    level = report.levels["t3"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "t1", "precision", "recall", "f1", "support", "auc", "threshold"])
        for label, m in level.per_label.items():
            writer.writerow(
                [
                    label,
                    tax.node(label).t1,
                    f"{m.precision:.4f}",
                    f"{m.recall:.4f}",
                    f"{m.f1:.4f}",
                    m.support,
                    "" if m.auc is None else f"{m.auc:.4f}",
                    "" if m.threshold is None else f"{m.threshold:.2f}",
                ]
            )
        for name, agg in (("macro", level.macro), ("micro", level.micro)):
            writer.writerow([f"__{name}__", "", f"{agg[0]:.4f}", f"{agg[1]:.4f}", f"{agg[2]:.4f}", "", "", ""])


def write_roc_csv(curve: RocCurve, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fpr", "tpr"])
        for fpr, tpr in curve.points:
            writer.writerow([f"{fpr:.6f}", f"{tpr:.6f}"])


def render_roc_figure(curves: dict[str, RocCurve], tax: Taxonomy, path: Path) -> None:
    """One panel per T1 pillar, its labels' curves colour-grouped."""
    colors = pillar_colors(tax)
    pillars = [t1 for t1 in tax.t1_ids if any(tax.node(l).t1 == t1 for l in curves)]
    n = max(1, len(pillars))
    cols = min(3, n)
    rows = -(-n // cols)
    fig, axes = plt.subplots(rows, cols, figsize=(4.2 * cols, 3.6 * rows), squeeze=False)
    for k, t1 in enumerate(pillars):
        ax = axes[k // cols][k % cols]
        for label, curve in curves.items():
            if tax.node(label).t1 != t1:
                continue
            xs, ys = zip(*curve.points)
            ax.plot(xs, ys, lw=1.0, color=colors[t1], alpha=0.7)
            ax.annotate(
                f"{label} ({curve.auc:.2f})",
                xy=curve.points[len(curve.points) // 2],
                fontsize=5,
                alpha=0.8,
            )
        ax.plot([0, 1], [0, 1], ls="--", lw=0.8, color="grey")
        ax.set_title(t1, fontsize=9)
        ax.set_xlabel("fpr", fontsize=7)
        ax.set_ylabel("tpr", fontsize=7)
    for k in range(len(pillars), rows * cols):
        axes[k // cols][k % cols].axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


# -- training history ---------------------------------------------------------


def write_history_csv(history: TrainHistory, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "dev_loss", "dev_f1"])
        for epoch, train_loss, dev_loss, dev_f1 in history.rows():
            writer.writerow([epoch, f"{train_loss:.6f}", f"{dev_loss:.6f}", f"{dev_f1:.4f}"])


def render_history_figure(history: TrainHistory, path: Path) -> None:
    epochs = [e.epoch for e in history.epochs]
    fig, ax1 = plt.subplots(figsize=(6, 4))
    ax1.plot(epochs, [e.train_loss for e in history.epochs], label="train loss", color="#2980b9")
    ax1.plot(epochs, [e.dev_loss for e in history.epochs], label="dev loss", color="#c0392b")
    ax1.axvline(history.best_epoch, ls="--", lw=0.8, color="grey")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("loss")
    ax2 = ax1.twinx()
    ax2.plot(epochs, [e.dev_f1 for e in history.epochs], label="dev F1", color="#27ae60")
    ax2.set_ylabel("dev F1")
    lines1, labels1 = ax1.get_legend_handles_labels()
    lines2, labels2 = ax2.get_legend_handles_labels()
    ax1.legend(lines1 + lines2, labels1 + labels2, fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


# -- ratio sweep --------------------------------------------------------------


def write_sweep_csv(rows: Sequence[SweepRow], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "total", "mildly", "negative", "strictly", "epochs_run",
                "test_f1_t3", "test_f1_t2", "test_f1_t1",
                "real_f1_t3", "real_precision_t3", "real_recall_t3",
            ]
        )
        for row in rows:
            ts = row.test_set.levels
            rs = row.real_simulation.levels["t3"]
            writer.writerow(
                [
                    row.total,
                    row.ratios.mildly,
                    row.ratios.negative,
                    row.ratios.strictly,
                    row.epochs_run,
                    f"{ts['t3'].micro[2]:.4f}",
                    f"{ts['t2'].micro[2]:.4f}" if "t2" in ts else "",
                    f"{ts['t1'].micro[2]:.4f}" if "t1" in ts else "",
                    f"{rs.micro[2]:.4f}",
                    f"{rs.micro[0]:.4f}",
                    f"{rs.micro[1]:.4f}",
                ]
            )


def render_sweep_figure(rows: Sequence[SweepRow], path: Path) -> None:
    totals = [r.total for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    for level, color in (("t3", "#2980b9"), ("t2", "#27ae60"), ("t1", "#c0392b")):
        ys = [r.test_set.levels[level].micro[2] for r in rows if level in r.test_set.levels]
        if len(ys) == len(totals):
            ax.plot(totals, ys, marker="o", label=f"{level} F1", color=color)
    ax.plot(
        totals,
        [r.real_simulation.levels["t3"].micro[0] for r in rows],
        marker="s",
        ls="--",
        label="real-sim precision",
        color="#8e44ad",
    )
    ax.set_xlabel("negatives per positive")
    ax.set_ylabel("score")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
