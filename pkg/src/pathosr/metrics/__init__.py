from .quality import psnr, ssim, PSNR_CAP_DB
from .niqe import niqe, NiqeModel, fit_niqe_model, default_niqe_model
from .report import (
    MetricReport, perceptual_index, combine_pi, evaluate_model,
    report_to_csv, merged_markdown_table, load_ma_scorer,
)

__all__ = [
    "psnr", "ssim", "PSNR_CAP_DB",
    "niqe", "NiqeModel", "fit_niqe_model", "default_niqe_model",
    "MetricReport", "perceptual_index", "combine_pi", "evaluate_model",
    "report_to_csv", "merged_markdown_table", "load_ma_scorer",
]
