"""Figure rendering for evaluation reports.

Given a report payload, writes matplotlib figures next to the delimited
output: per-class bar charts for single-point metrics and threshold-grid
heatmaps for sweep reports.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_report_figures(payload: dict, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metric = payload["metric"]
    written: list[Path] = []
    if metric in ("pq", "upq"):
        written += _per_class_bars(payload, out_dir, metric)
    elif metric == "aupq":
        written += _sweep_heatmaps(payload, out_dir)
    elif metric == "miou":
        written += _miou_bars(payload, out_dir)
    return written


def _per_class_bars(payload: dict, out_dir: Path, metric: str) -> list[Path]:
    per_class = payload["overall"].get("per_class", {})
    if not per_class:
        return []
    names = list(per_class)
    values = [per_class[n][metric] for n in names]
    fig, ax = plt.subplots(figsize=(max(6, 0.45 * len(names)), 4))
    ax.bar(range(len(names)), values, color="tab:blue")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=45, ha="right")
    ax.set_ylabel(metric.upper())
    ax.set_ylim(0, 1)
    ax.set_title(f"Per-class {metric.upper()}")
    fig.tight_layout()
    path = out_dir / f"{metric}_per_class.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]


def _miou_bars(payload: dict, out_dir: Path) -> list[Path]:
    per_class = payload["overall"].get("per_class_iou", {})
    if not per_class:
        return []
    names = list(per_class)
    values = [per_class[n] for n in names]
    fig, ax = plt.subplots(figsize=(max(6, 0.45 * len(names)), 4))
    ax.bar(range(len(names)), values, color="tab:green")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=45, ha="right")
    ax.set_ylabel("IoU")
    ax.set_ylim(0, 1)
    ax.set_title(f"Per-class IoU (mIoU = {payload['overall']['miou']:.3f})")
    fig.tight_layout()
    path = out_dir / "miou_per_class.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]


def _sweep_heatmaps(payload: dict, out_dir: Path) -> list[Path]:
    matrices = payload["overall"]["matrices"]
    written = []
    for name in ("upq_all", "usq_all", "urq_all"):
        mat = np.asarray(matrices[name])
        fig, ax = plt.subplots(figsize=(5.5, 4.5))
        im = ax.imshow(mat, origin="lower", vmin=0, vmax=1, cmap="viridis")
        ax.set_xlabel("instance threshold index")
        ax.set_ylabel("class threshold index")
        scalar = payload["overall"]["a" + name.split("_")[0]]["all"]
        ax.set_title(f"{name.split('_')[0].upper()} grid (mean = {scalar:.4f})")
        fig.colorbar(im, ax=ax)
        fig.tight_layout()
        path = out_dir / f"{name}_heatmap.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written


def write_report_csv(payload: dict, path) -> Path:
    """Delimited summary: per-class rows for point metrics, cell rows for sweeps."""
    path = Path(path)
    metric = payload["metric"]
    lines = []
    if metric in ("pq", "upq"):
        lines.append(f"class,{metric},sq,rq,tp,fp,fn")
        for name, row in payload["overall"].get("per_class", {}).items():
            sq = "" if row["sq"] is None else f"{row['sq']:.6f}"
            lines.append(
                f"{name},{row[metric]:.6f},{sq},{row['rq']:.6f},"
                f"{row['tp']},{row['fp']},{row['fn']}"
            )
        for split, agg in payload["overall"].get("aggregates", {}).items():
            sq = agg.get("sq")
            sq_s = "" if sq is None else f"{sq:.6f}"
            lines.append(f"[{split}],{agg[metric]:.6f},{sq_s},{agg['rq']:.6f},,,")
    elif metric == "aupq":
        lines.append("class_index,inst_index,upq_all,usq_all,urq_all")
        upq = payload["overall"]["matrices"]["upq_all"]
        usq = payload["overall"]["matrices"]["usq_all"]
        urq = payload["overall"]["matrices"]["urq_all"]
        for k, row in enumerate(upq):
            for l in range(len(row)):
                lines.append(
                    f"{k},{l},{upq[k][l]:.6f},{usq[k][l]:.6f},{urq[k][l]:.6f}"
                )
        lines.append(f"[aupq_all],,{payload['overall']['aupq']['all']:.6f},"
                     f"{payload['overall']['ausq']['all']:.6f},"
                     f"{payload['overall']['aurq']['all']:.6f}")
    else:
        lines.append("class,iou")
        for name, iou in payload["overall"].get("per_class_iou", {}).items():
            lines.append(f"{name},{iou:.6f}")
        lines.append(f"[mean],{payload['overall']['miou']:.6f}")
    path.write_text("\n".join(lines) + "\n")
    return path
