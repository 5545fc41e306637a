"""Evaluation protocol: degrade, reconstruct, score, tabulate.

Reports carry per-image and aggregate PSNR/SSIM/NIQE plus the perceptual
index when an external learned scorer is plugged in; without one the PI
column stays empty and NIQE is reported on its own.  Scale factors are
area factors in all user-facing tables (16x area = 4x per side).
"""

from __future__ import annotations

import csv
import importlib
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..data.degrade import synthesize_lr, upsample_bicubic, upsample_nearest
from ..data.images import load_image
from ..data.manifest import DatasetIndex
from .niqe import NiqeError, NiqeModel, niqe
from .quality import psnr, ssim

AREA_TO_LINEAR = {4: 2, 9: 3, 16: 4, 64: 8}

CSV_COLUMNS = ("method", "dataset", "area_scale", "id", "psnr_db", "ssim", "niqe", "pi")
AGGREGATE_ID = "__aggregate__"


@dataclass
class MetricReport:
    method: str
    dataset: str
    area_scale: int
    per_image: list[dict] = field(default_factory=list)

    @property
    def aggregate(self) -> dict:
        out = {}
        for key in ("psnr_db", "ssim", "niqe", "pi"):
            values = [row[key] for row in self.per_image if row[key] is not None]
            out[key] = float(np.mean(values)) if values else None
        return out


def combine_pi(ma_score: float, niqe_score: float) -> float:
    """Perceptual index: 0.5 * ((10 - Ma) + NIQE); lower is better."""
    return 0.5 * ((10.0 - ma_score) + niqe_score)


def perceptual_index(img: np.ndarray, ma_scorer=None,
                     niqe_model: NiqeModel | None = None) -> float | None:
    """PI of one image, or None when no Ma scorer is available or it fails."""
    if ma_scorer is None:
        return None
    try:
        ma = float(ma_scorer(img))
    except Exception as exc:  # external plugin: degrade, don't crash
        warnings.warn(f"Ma scorer failed ({exc}); reporting PI as unavailable")
        return None
    return combine_pi(ma, niqe(img, niqe_model))


def load_ma_scorer(spec: str):
    """Import an external scorer given as 'package.module:callable'."""
    module_name, _, attr = spec.partition(":")
    if not attr:
        raise ValueError(f"Ma scorer spec {spec!r} must look like 'module:callable'")
    module = importlib.import_module(module_name)
    return getattr(module, attr)


def reconstruct(method: str, hr: np.ndarray, linear_scale: int,
                generator=None) -> np.ndarray:
    """Degrade the HR image and bring it back with the chosen method."""
    h, w = hr.shape[:2]
    if method == "identity":
        return hr
    lr = synthesize_lr(hr, linear_scale)
    if method == "nearest":
        return upsample_nearest(lr, h, w)
    if method == "bicubic":
        return upsample_bicubic(lr, h, w)
    if method == "checkpoint":
        if generator is None:
            raise ValueError("checkpoint method requires a generator")
        from ..models.generator import generator_forward
        if generator.spec.linear_scale != linear_scale:
            raise ValueError(
                f"checkpoint trained for scale {generator.spec.linear_scale}, "
                f"evaluation requested {linear_scale}"
            )
        sr = generator_forward(generator, lr)
        return sr[:h, :w]
    raise ValueError(f"unknown reconstruction method {method!r}")


def evaluate_model(method: str, index: DatasetIndex, area_scale: int,
                   generator=None, niqe_model: NiqeModel | None = None,
                   ma_scorer=None, method_label: str | None = None,
                   dataset_label: str | None = None) -> MetricReport:
    """Score one method over the test split; returns the per-image report."""
    if area_scale not in AREA_TO_LINEAR:
        raise ValueError(f"area scale {area_scale} not in {sorted(AREA_TO_LINEAR)}")
    linear = AREA_TO_LINEAR[area_scale]
    test_records = index.split("test")
    if not test_records:
        raise ValueError("no test records in dataset")
    dataset_label = dataset_label or (
        index.manifest_path.parent.name if index.manifest_path else "dataset"
    )
    report = MetricReport(method=method_label or method,
                          dataset=dataset_label, area_scale=area_scale)
    for record in test_records:
        hr = load_image(record.hr_path)
        sr = np.clip(reconstruct(method, hr, linear, generator), 0.0, 1.0)
        try:
            niqe_value = niqe(sr, niqe_model)
        except NiqeError as exc:
            warnings.warn(f"record {record.id!r}: {exc}; NIQE unavailable")
            niqe_value = None
        pi = perceptual_index(sr, ma_scorer, niqe_model) if niqe_value is not None else None
        report.per_image.append({
            "id": record.id,
            "psnr_db": psnr(sr, hr),
            "ssim": ssim(sr, hr),
            "niqe": niqe_value,
            "pi": pi,
        })
    return report


def _fmt(value, digits=6) -> str:
    if value is None:
        return ""
    return f"{value:.{digits}g}"


def report_to_csv(report: MetricReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in report.per_image:
            writer.writerow([report.method, report.dataset, report.area_scale,
                             row["id"], _fmt(row["psnr_db"]), _fmt(row["ssim"]),
                             _fmt(row["niqe"]), _fmt(row["pi"])])
        agg = report.aggregate
        writer.writerow([report.method, report.dataset, report.area_scale,
                         AGGREGATE_ID, _fmt(agg["psnr_db"]), _fmt(agg["ssim"]),
                         _fmt(agg["niqe"]), _fmt(agg["pi"])])


def load_report_csv(path) -> MetricReport:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: empty report")
    first = rows[0]
    report = MetricReport(method=first["method"], dataset=first["dataset"],
                          area_scale=int(first["area_scale"]))
    for row in rows:
        if row["id"] == AGGREGATE_ID:
            continue
        report.per_image.append({
            "id": row["id"],
            "psnr_db": float(row["psnr_db"]) if row["psnr_db"] else None,
            "ssim": float(row["ssim"]) if row["ssim"] else None,
            "niqe": float(row["niqe"]) if row["niqe"] else None,
            "pi": float(row["pi"]) if row["pi"] else None,
        })
    return report


def merged_markdown_table(reports: list[MetricReport]) -> str:
    """One table per dataset: methods as columns, metrics as rows."""
    by_dataset: dict[tuple[str, int], list[MetricReport]] = {}
    for rep in reports:
        by_dataset.setdefault((rep.dataset, rep.area_scale), []).append(rep)
    blocks = []
    for (dataset, area_scale), reps in by_dataset.items():
        methods = [r.method for r in reps]
        lines = [
            f"| {dataset} ({area_scale}x) | " + " | ".join(methods) + " |",
            "|" + "---|" * (len(methods) + 1),
        ]
        rows = [("PSNR", "psnr_db", 2), ("SSIM", "ssim", 2),
                ("NIQE", "niqe", 2), ("PI", "pi", 2)]
        for label, key, digits in rows:
            cells = []
            for rep in reps:
                value = rep.aggregate[key]
                cells.append("–" if value is None else f"{value:.{digits}f}")
            lines.append(f"| {label} | " + " | ".join(cells) + " |")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"
