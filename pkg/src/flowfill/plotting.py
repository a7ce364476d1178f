"""Figure rendering for run reports and benchmark tables."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)


def render_fill_report(report, path: str | Path) -> None:
    """Stacked per-frame counts of filled / unreliable / residual pixels."""
    frames = np.arange(report.frames)
    filled = np.asarray(report.filled)
    invalid = np.asarray(report.invalid)
    residual = np.asarray(report.residual_final)
    fig, ax = plt.subplots(figsize=(max(6.0, report.frames * 0.12), 3.2))
    ax.bar(frames, filled, label="filled", color="#4878cf")
    ax.bar(frames, invalid, bottom=filled, label="unreliable", color="#d65f5f")
    ax.bar(frames, residual, bottom=filled + invalid, label="residual", color="#b8b8b8")
    ax.set_xlabel("frame")
    ax.set_ylabel("pixels")
    ax.set_title("hole pixels by outcome")
    ax.legend(frameon=False, fontsize=8)
    _save(fig, Path(path))


def render_bench(rows, out_dir: str | Path) -> None:
    """Grouped bars of PSNR and SSIM per scene and strategy."""
    out_dir = Path(out_dir)
    scenes = sorted({r.scene for r in rows})
    combos = []
    for r in rows:
        combo = f"{r.internal}/{r.reference}"
        if combo not in combos:
            combos.append(combo)

    for metric, fname, label in (
        ("psnr_db", "bench_psnr.png", "PSNR (dB)"),
        ("ssim", "bench_ssim.png", "SSIM"),
    ):
        fig, ax = plt.subplots(figsize=(1.6 + 1.4 * len(scenes), 3.4))
        width = 0.8 / max(len(combos), 1)
        for ci, combo in enumerate(combos):
            xs, ys = [], []
            for si, scene in enumerate(scenes):
                for r in rows:
                    if r.scene == scene and f"{r.internal}/{r.reference}" == combo:
                        xs.append(si + ci * width)
                        ys.append(getattr(r, metric))
            ax.bar(xs, ys, width=width * 0.92, label=combo)
        ax.set_xticks(
            [si + width * (len(combos) - 1) / 2 for si in range(len(scenes))]
        )
        ax.set_xticklabels(scenes, fontsize=8)
        ax.set_ylabel(label)
        ax.set_title("propagation strategies (internal/reference)")
        ax.legend(frameon=False, fontsize=7)
        _save(fig, out_dir / fname)


def render_flowcheck(errors: np.ndarray, path: str | Path) -> None:
    """Histogram of chained-map vs. traced position errors (pixels)."""
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    if errors.size:
        ax.hist(np.clip(errors, 1e-12, None), bins=50, color="#4878cf")
        ax.set_yscale("log")
    ax.set_xlabel("|chained - traced| (px)")
    ax.set_ylabel("pixel count")
    ax.set_title("correspondence agreement")
    _save(fig, Path(path))
