import numpy as np
import pytest

from pathosr.data.manifest import load_manifest
from pathosr.figures import metric_caption, save_metric_bars, save_panels
from pathosr.metrics.report import (
    MetricReport, evaluate_model, load_report_csv, merged_markdown_table,
    report_to_csv,
)


@pytest.fixture(scope="module")
def toy_index(toy_corpus):
    return load_manifest(toy_corpus, scale=2)


def test_identity_method_caps_metrics(toy_index):
    with pytest.warns(UserWarning):  # 64x64 images are below the NIQE patch size
        report = evaluate_model("identity", toy_index, area_scale=4)
    assert len(report.per_image) == 2
    for row in report.per_image:
        assert row["psnr_db"] == 99.0
        assert abs(row["ssim"] - 1.0) < 1e-9
        assert row["niqe"] is None and row["pi"] is None


def test_baselines_ranked_sensibly(toy_index):
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        nearest = evaluate_model("nearest", toy_index, area_scale=4)
        bicubic = evaluate_model("bicubic", toy_index, area_scale=4)
    assert bicubic.aggregate["psnr_db"] > nearest.aggregate["psnr_db"]
    assert bicubic.aggregate["ssim"] > nearest.aggregate["ssim"]


def test_aggregate_is_arithmetic_mean(toy_index):
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report = evaluate_model("nearest", toy_index, area_scale=4)
    psnrs = [r["psnr_db"] for r in report.per_image]
    assert abs(report.aggregate["psnr_db"] - np.mean(psnrs)) < 1e-12


def test_evaluation_is_deterministic(toy_index):
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = evaluate_model("bicubic", toy_index, area_scale=4)
        b = evaluate_model("bicubic", toy_index, area_scale=4)
    assert a.per_image == b.per_image


def test_area_scale_validation(toy_index):
    with pytest.raises(ValueError):
        evaluate_model("nearest", toy_index, area_scale=5)


def test_missing_test_split_rejected(tmp_path):
    from pathosr.data.images import save_image
    from pathosr.data.manifest import write_manifest
    save_image(np.full((16, 16, 3), 0.5), tmp_path / "a.png")
    write_manifest([{"id": "a", "hr": "a.png", "mask": None, "split": "train"}],
                   tmp_path / "m.jsonl")
    index = load_manifest(tmp_path / "m.jsonl")
    with pytest.raises(ValueError, match="no test records"):
        evaluate_model("nearest", index, area_scale=4)


def test_csv_round_trip(tmp_path, toy_index):
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report = evaluate_model("nearest", toy_index, area_scale=4)
    path = tmp_path / "report.csv"
    report_to_csv(report, path)
    loaded = load_report_csv(path)
    assert loaded.method == report.method
    assert loaded.area_scale == report.area_scale
    assert len(loaded.per_image) == len(report.per_image)
    for a, b in zip(loaded.per_image, report.per_image):
        assert a["id"] == b["id"]
        assert abs(a["psnr_db"] - b["psnr_db"]) < 1e-4
        assert a["niqe"] is None and b["niqe"] is None


def test_markdown_table_layout():
    rep_a = MetricReport(method="nearest", dataset="demo", area_scale=16)
    rep_a.per_image.append({"id": "x", "psnr_db": 32.8, "ssim": 0.88,
                            "niqe": 7.3, "pi": None})
    rep_b = MetricReport(method="bicubic", dataset="demo", area_scale=16)
    rep_b.per_image.append({"id": "x", "psnr_db": 37.7, "ssim": 0.94,
                            "niqe": 8.1, "pi": None})
    table = merged_markdown_table([rep_a, rep_b])
    lines = table.strip().splitlines()
    assert lines[0].startswith("| demo (16x) | nearest | bicubic |")
    assert any(line.startswith("| PSNR | 32.80 | 37.70 |") for line in lines)
    assert any(line.startswith("| SSIM | 0.88 | 0.94 |") for line in lines)
    assert any(line.startswith("| NIQE | 7.30 | 8.10 |") for line in lines)
    # PI column shows a dash without an external scorer
    assert any(line.startswith("| PI | – | – |") for line in lines)


def test_metric_caption_format():
    assert metric_caption(22.17, 0.59, pi=6.38) == "(22.17 dB/0.59/6.38)"
    assert metric_caption(22.17, 0.59, niqe_value=5.0) == "(22.17 dB/0.59/5.00)"
    assert metric_caption(22.17, 0.59) == "(22.17 dB/0.59/–)"


def test_figures_written(tmp_path, toy_index, rng):
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        reports = [evaluate_model(m, toy_index, area_scale=4)
                   for m in ("nearest", "bicubic")]
    fig_path = tmp_path / "bars.png"
    save_metric_bars(reports, fig_path)
    assert fig_path.stat().st_size > 0
    panel_path = tmp_path / "panels.png"
    save_panels([rng.random((32, 32, 3))] * 3,
                ["input", "output", "reference"], panel_path)
    assert panel_path.stat().st_size > 0
