import json

import numpy as np
import pytest

from pathosr.cli import main
from pathosr.data.images import load_image, save_image
from pathosr.data.manifest import load_manifest

TINY_TRAIN = {
    "total_iters": 4, "base_lr": 1e-3, "batch_size": 2, "linear_scale": 2,
    "checkpoint_interval": 2, "variant": "t1_t2", "roi_patch_size": 24,
    "roi_max_patches": 2, "roi_coverage_tau": 0.05, "seed": 0,
}
TINY_NETS = {
    "generator": {"n_rrdb_blocks": 1, "base_channels": 8, "growth_channels": 4},
    "critics": {
        "t1": {"conv_stages": [[8, 1], [8, 2]], "head_width": 8},
        "t2": {"conv_stages": [[8, 1], [8, 2]], "head_width": 8},
    },
}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Synthetic corpus + run config shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli_ws")
    assert main(["prepare", "--synthetic", "toy_smear", "--count", "10",
                 "--seed", "100", "--test-fraction", "0.2",
                 "--out", str(root / "corpus")]) == 0
    doc = {
        "schema_version": 1,
        "manifest": "corpus/manifest.jsonl",
        "out_dir": "run",
        "dataset_label": "toy",
        "train": TINY_TRAIN,
        "losses": {"eta": 1.0, "perceptual": {"enabled": False}},
        **TINY_NETS,
        "metrics": {"area_scale": 4},
    }
    config = root / "run.json"
    config.write_text(json.dumps(doc))
    return root, config


def test_prepare_writes_loadable_manifest(workspace):
    root, _ = workspace
    index = load_manifest(root / "corpus" / "manifest.jsonl", scale=2)
    assert len(index) == 10
    assert len(index.split("test")) == 2


def test_prepare_requires_exactly_one_mode(tmp_path):
    assert main(["prepare", "--out", str(tmp_path)]) == 1


def test_prepare_scan_mode(tmp_path, rng):
    src = tmp_path / "imgs"
    src.mkdir()
    for i in range(4):
        save_image(rng.random((16, 16, 3)), src / f"i{i}.png")
    out = tmp_path / "manifest.jsonl"
    assert main(["prepare", "--scan", str(src), "--test-fraction", "0.25",
                 "--out", str(out)]) == 0
    index = load_manifest(out)
    assert len(index) == 4
    assert len(index.split("test")) == 1


def test_train_emits_expected_artifacts(workspace):
    root, config = workspace
    assert main(["train", "--config", str(config)]) == 0
    run = root / "run"
    checkpoints = list((run / "checkpoints").glob("ckpt_*.ckpt"))
    assert len(checkpoints) == 2  # iterations 2 and 4
    assert (run / "train_log.csv").exists()
    samples = list((run / "samples").glob("sample_iter*.png"))
    assert len(samples) == 2


def test_train_resume_continues_iterations(workspace):
    root, config = workspace
    doc = json.loads(config.read_text())
    doc["train"] = {**TINY_TRAIN, "total_iters": 6}
    extended = root / "run_extended.json"
    extended.write_text(json.dumps(doc))
    assert main(["train", "--config", str(extended), "--resume"]) == 0
    log = (root / "run" / "train_log.csv").read_text().strip().splitlines()
    iters = [int(line.split(",")[0]) for line in log[1:]]
    assert iters == [1, 2, 3, 4, 5, 6]


def test_train_resume_without_checkpoint_fails(workspace, tmp_path):
    root, config = workspace
    doc = json.loads(config.read_text())
    doc["out_dir"] = str(tmp_path / "fresh")
    other = tmp_path / "other.json"
    other.write_text(json.dumps(doc))
    assert main(["train", "--config", str(other), "--resume"]) == 2


def test_train_invalid_config_exits_2(workspace, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": 1, "manifest": "m",
                               "out_dir": "o", "bogus_key": True}))
    assert main(["train", "--config", str(bad)]) == 2


def test_evaluate_baselines_and_reports(workspace):
    root, config = workspace
    out = root / "eval1"
    assert main(["evaluate", "--config", str(config),
                 "--methods", "nearest,bicubic", "--out", str(out)]) == 0
    assert (out / "report_nearest.csv").exists()
    assert (out / "report_bicubic.csv").exists()
    md = (out / "report.md").read_text()
    assert "| toy (4x) | nearest | bicubic |" in md
    assert (out / "report.png").stat().st_size > 0


def test_evaluate_idempotent_byte_identical(workspace):
    root, config = workspace
    out_a = root / "eval_a"
    out_b = root / "eval_b"
    for out in (out_a, out_b):
        assert main(["evaluate", "--config", str(config),
                     "--methods", "nearest", "--out", str(out)]) == 0
    assert (out_a / "report_nearest.csv").read_bytes() == \
        (out_b / "report_nearest.csv").read_bytes()
    assert (out_a / "report.md").read_bytes() == (out_b / "report.md").read_bytes()


def test_evaluate_checkpoint_method(workspace):
    root, config = workspace
    ckpt = sorted((root / "run" / "checkpoints").glob("ckpt_*.ckpt"))[-1]
    out = root / "eval_ckpt"
    assert main(["evaluate", "--config", str(config),
                 "--methods", f"nearest,ckpt:{ckpt}", "--out", str(out)]) == 0
    assert (out / f"report_{ckpt.stem}.csv").exists()


def test_evaluate_partial_failure_exit_3(workspace):
    root, config = workspace
    out = root / "eval_partial"
    code = main(["evaluate", "--config", str(config),
                 "--methods", "nearest,ckpt:/nonexistent.ckpt", "--out", str(out)])
    assert code == 3
    assert (out / "report_nearest.csv").exists()


def test_evaluate_all_failed_exit_2(workspace):
    root, config = workspace
    code = main(["evaluate", "--config", str(config),
                 "--methods", "ckpt:/nonexistent.ckpt",
                 "--out", str(root / "eval_none")])
    assert code == 2


def test_infer_outputs_scaled_images(workspace, tmp_path):
    root, _ = workspace
    ckpt = sorted((root / "run" / "checkpoints").glob("ckpt_*.ckpt"))[-1]
    inputs = tmp_path / "lr_inputs"
    inputs.mkdir()
    rng = np.random.default_rng(0)
    for i in range(3):
        save_image(rng.random((20, 24, 3)), inputs / f"in{i}.png")
    out = tmp_path / "sr_out"
    assert main(["infer", "--checkpoint", str(ckpt), "--input", str(inputs),
                 "--out", str(out), "--scale", "2"]) == 0
    outputs = sorted(out.glob("*.png"))
    assert len(outputs) == 3
    assert load_image(outputs[0]).shape == (40, 48, 3)


def test_infer_scale_mismatch_fails_before_processing(workspace, tmp_path):
    root, _ = workspace
    ckpt = sorted((root / "run" / "checkpoints").glob("ckpt_*.ckpt"))[-1]
    inputs = tmp_path / "ins"
    inputs.mkdir()
    save_image(np.full((16, 16, 3), 0.5), inputs / "a.png")
    out = tmp_path / "outs"
    assert main(["infer", "--checkpoint", str(ckpt), "--input", str(inputs),
                 "--out", str(out), "--scale", "4"]) == 2
    assert not (out / "a.png").exists()


def test_infer_compare_panels_with_captions(workspace, tmp_path):
    root, _ = workspace
    ckpt = sorted((root / "run" / "checkpoints").glob("ckpt_*.ckpt"))[-1]
    corpus = load_manifest(root / "corpus" / "manifest.jsonl", scale=2)
    record = corpus.split("test")[0]
    hr = load_image(record.hr_path)
    from pathosr.data.degrade import synthesize_lr
    inputs = tmp_path / "cmp_in"
    refs = tmp_path / "cmp_ref"
    inputs.mkdir()
    refs.mkdir()
    save_image(synthesize_lr(hr, 2), inputs / "sample.png")
    save_image(hr, refs / "sample.png")
    out = tmp_path / "cmp_out"
    assert main(["infer", "--checkpoint", str(ckpt), "--input", str(inputs),
                 "--out", str(out), "--scale", "2", "--compare", str(refs)]) == 0
    assert (out / "sample.png").exists()
    assert (out / "sample_compare.png").stat().st_size > 0


def test_infer_corrupt_input_partial_failure(workspace, tmp_path):
    root, _ = workspace
    ckpt = sorted((root / "run" / "checkpoints").glob("ckpt_*.ckpt"))[-1]
    inputs = tmp_path / "mixed"
    inputs.mkdir()
    save_image(np.full((12, 12, 3), 0.4), inputs / "good.png")
    (inputs / "bad.png").write_bytes(b"this is not a png")
    out = tmp_path / "mixed_out"
    assert main(["infer", "--checkpoint", str(ckpt), "--input", str(inputs),
                 "--out", str(out), "--scale", "2"]) == 3
    assert (out / "good.png").exists()
    assert not (out / "bad.png").exists()


def test_report_merges_csvs(workspace, tmp_path):
    root, _ = workspace
    eval_dir = root / "eval1"
    out = tmp_path / "merged"
    assert main(["report", str(eval_dir / "report_nearest.csv"),
                 str(eval_dir / "report_bicubic.csv"), "--out", str(out)]) == 0
    assert "nearest | bicubic" in (out / "report.md").read_text()
    assert (out / "report.png").stat().st_size > 0


def test_fit_niqe_subcommand(tmp_path):
    assert main(["prepare", "--synthetic", "histology", "--count", "3",
                 "--test-fraction", "0.34", "--out", str(tmp_path / "h")]) == 0
    model_path = tmp_path / "custom_niqe.npz"
    assert main(["fit-niqe", "--manifest", str(tmp_path / "h" / "manifest.jsonl"),
                 "--out", str(model_path)]) == 0
    from pathosr.metrics.niqe import NiqeModel
    model = NiqeModel.load(model_path)
    assert model.mu.shape == (36,)


def test_usage_error_exit_1():
    assert main(["train"]) == 1  # missing required --config
    assert main(["definitely-not-a-command"]) == 1
