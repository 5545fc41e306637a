"""Figure rendering: comparison panels and metric charts, written to files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def metric_caption(psnr_db: float, ssim_value: float,
                   pi: float | None = None, niqe_value: float | None = None) -> str:
    """Panel caption like '(22.17 dB/0.59/6.38)'; NIQE fills in when PI is absent."""
    third = pi if pi is not None else niqe_value
    third_text = "–" if third is None else f"{third:.2f}"
    return f"({psnr_db:.2f} dB/{ssim_value:.2f}/{third_text})"


def save_panels(images, titles, path, suptitle: str | None = None) -> None:
    """Write a single row of image panels with per-panel titles."""
    n = len(images)
    fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 3.6))
    if n == 1:
        axes = [axes]
    for ax, img, title in zip(axes, images, titles):
        img = np.asarray(img)
        if img.ndim == 3 and img.shape[2] == 1:
            img = img[:, :, 0]
        ax.imshow(np.clip(img, 0, 1), cmap=None if img.ndim == 3 else "gray",
                  interpolation="nearest")
        ax.set_title(title, fontsize=9)
        ax.set_axis_off()
    if suptitle:
        fig.suptitle(suptitle)
    fig.tight_layout()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110)
    plt.close(fig)


def save_metric_bars(reports, path) -> None:
    """Grouped bar chart of aggregate PSNR / SSIM / NIQE (and PI if present)."""
    methods = [r.method for r in reports]
    metrics = [("PSNR (dB)", "psnr_db"), ("SSIM", "ssim"), ("NIQE", "niqe")]
    if any(r.aggregate["pi"] is not None for r in reports):
        metrics.append(("PI", "pi"))
    fig, axes = plt.subplots(1, len(metrics), figsize=(3.0 * len(metrics), 3.4))
    if len(metrics) == 1:
        axes = [axes]
    x = np.arange(len(methods))
    for ax, (label, key) in zip(axes, metrics):
        values = [r.aggregate[key] if r.aggregate[key] is not None else np.nan
                  for r in reports]
        ax.bar(x, values, color="#4878a8")
        ax.set_xticks(x)
        ax.set_xticklabels(methods, rotation=30, ha="right", fontsize=8)
        ax.set_title(label, fontsize=10)
        ax.grid(axis="y", alpha=0.3)
    dataset = reports[0].dataset if reports else ""
    scale = reports[0].area_scale if reports else ""
    fig.suptitle(f"{dataset} at {scale}x area scale")
    fig.tight_layout()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110)
    plt.close(fig)
