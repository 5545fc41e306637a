"""Command line entry points: prepare, train, infer, evaluate, report, fit-niqe.

Exit codes: 0 success, 1 usage error, 2 runtime failure, 3 partial failure.
"""

from __future__ import annotations

import dataclasses
import sys
import warnings
from pathlib import Path

import click
import numpy as np

from . import __version__
from .config import ConfigError, load_run_config
from .data.degrade import upsample_nearest
from .data.images import ImageIOError, load_image, save_image
from .data.manifest import ManifestError, load_manifest, write_manifest
from .data.synthetic import PRESETS, generate_corpus
from .figures import metric_caption, save_metric_bars, save_panels
from .metrics.niqe import NiqeModel, fit_niqe_model
from .metrics.quality import psnr, ssim
from .metrics.report import (
    evaluate_model, load_ma_scorer, load_report_csv, merged_markdown_table,
    perceptual_index, report_to_csv,
)
from .training.checkpoint import CheckpointError, find_latest_checkpoint, load_checkpoint
from .training.loop import TrainingAborted, fit

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".tif", ".tiff")


class PartialFailure(Exception):
    """Some inputs were processed, some failed."""


@click.group()
@click.version_option(version=__version__, prog_name="pathosr")
def cli():
    """Microscopy super-resolution: training, inference and evaluation."""


@cli.command()
@click.option("--synthetic", type=click.Choice(sorted(PRESETS)), default=None,
              help="Generate a synthetic corpus with this preset.")
@click.option("--scan", "scan_dir", type=click.Path(exists=True, file_okay=False),
              default=None, help="Build a manifest from an existing image directory.")
@click.option("--masks", "mask_dir", type=click.Path(exists=True, file_okay=False),
              default=None, help="Mask directory for --scan (matched by filename stem).")
@click.option("--count", type=int, default=33, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--test-fraction", type=float, default=0.1, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
def prepare(synthetic, scan_dir, mask_dir, count, seed, test_fraction, out_path):
    """Write a dataset manifest (and optionally the synthetic images)."""
    if (synthetic is None) == (scan_dir is None):
        raise click.UsageError("pass exactly one of --synthetic or --scan")
    if synthetic:
        manifest = generate_corpus(synthetic, count, out_path, base_seed=seed,
                                   test_fraction=test_fraction)
        click.echo(f"wrote {count} images and {manifest}")
        return 0
    scan_dir = Path(scan_dir)
    files = sorted(p for p in scan_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        raise ManifestError(f"no images found under {scan_dir}")
    n_test = int(np.ceil(len(files) * test_fraction))
    records = []
    for i, f in enumerate(files):
        mask = None
        if mask_dir:
            for suffix in IMAGE_SUFFIXES:
                candidate = Path(mask_dir) / (f.stem + suffix)
                if candidate.exists():
                    mask = str(candidate.resolve())
                    break
        records.append({
            "id": f.stem,
            "hr": str(f.resolve()),
            "mask": mask,
            "split": "test" if i >= len(files) - n_test else "train",
        })
    out_path = Path(out_path)
    if out_path.is_dir():
        out_path = out_path / "manifest.jsonl"
    write_manifest(records, out_path)
    click.echo(f"wrote {out_path} ({len(records)} records, {n_test} test)")
    return 0


def _render_sample(state, out_dir, index):
    from .models.generator import generator_forward
    records = index.split("train")
    if not records:
        return
    from .data.batches import materialize
    pair = materialize(records[0], index.scale)
    sr = generator_forward(state.generator, pair.lr)
    h, w = pair.hr.shape[:2]
    sr = np.clip(sr[:h, :w], 0, 1)
    ups = upsample_nearest(pair.lr, h, w)
    save_panels(
        [ups, sr, pair.hr],
        ["input (nearest view)", f"output {metric_caption(psnr(sr, pair.hr), ssim(sr, pair.hr))}", "reference"],
        Path(out_dir) / "samples" / f"sample_iter{state.iteration:08d}.png",
    )


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--resume", is_flag=True, default=False,
              help="Continue from the latest checkpoint in the output directory.")
@click.option("--seed", type=int, default=None, help="Override the data-order seed.")
def train(config_path, resume, seed):
    """Run the staged training loop from a JSON run config."""
    cfg = load_run_config(config_path)
    train_cfg = cfg.train
    if seed is not None:
        train_cfg = dataclasses.replace(train_cfg, seed=seed)
    index = load_manifest(cfg.manifest, scale=train_cfg.linear_scale,
                          patch_size=train_cfg.roi_patch_size)
    phi = cfg.build_feature_extractor()
    resume_from = None
    if resume:
        resume_from = find_latest_checkpoint(Path(cfg.out_dir) / "checkpoints")
        if resume_from is None:
            raise CheckpointError(f"--resume given but no checkpoint under {cfg.out_dir}")
    result = fit(
        train_cfg, index, cfg.out_dir,
        gen_spec=cfg.generator, t1_spec=cfg.t1_spec, t2_spec=cfg.t2_spec,
        phi=phi, resume_from=resume_from,
        sample_callback=lambda state, out: _render_sample(state, out, index),
    )
    state = result.state
    click.echo(f"parameters: generator {state.generator.num_parameters()}, "
               f"critics {state.t1.num_parameters()}/{state.t2.num_parameters()}")
    click.echo(f"finished at iteration {state.iteration}; "
               f"checkpoint {result.checkpoint_path}")
    return 0


def _generator_from_checkpoint(path):
    state = load_checkpoint(path)
    state.generator.eval()
    return state.generator


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--methods", default="nearest,bicubic", show_default=True,
              help="Comma-separated: nearest, bicubic, identity, ckpt:PATH.")
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="Defaults to <config out_dir>/eval.")
def evaluate(config_path, methods, out_dir):
    """Score reconstruction methods on the test split; emit CSV, Markdown, figure."""
    cfg = load_run_config(config_path)
    index = load_manifest(cfg.manifest, scale=cfg.train.linear_scale,
                          patch_size=cfg.train.roi_patch_size)
    out_dir = Path(out_dir) if out_dir else Path(cfg.out_dir) / "eval"
    out_dir.mkdir(parents=True, exist_ok=True)
    niqe_model = NiqeModel.load(cfg.niqe_model) if cfg.niqe_model else None
    ma_scorer = load_ma_scorer(cfg.ma_scorer) if cfg.ma_scorer else None
    area_scale = cfg.effective_area_scale

    reports, failures = [], []
    for token in [m.strip() for m in methods.split(",") if m.strip()]:
        try:
            if token.startswith("ckpt:"):
                generator = _generator_from_checkpoint(token[5:])
                report = evaluate_model(
                    "checkpoint", index, area_scale, generator=generator,
                    niqe_model=niqe_model, ma_scorer=ma_scorer,
                    method_label=Path(token[5:]).stem,
                    dataset_label=cfg.dataset_label)
            else:
                report = evaluate_model(
                    token, index, area_scale, niqe_model=niqe_model,
                    ma_scorer=ma_scorer, dataset_label=cfg.dataset_label)
        except (CheckpointError, OSError, ValueError) as exc:
            click.echo(f"method {token!r} failed: {exc}", err=True)
            failures.append(token)
            continue
        safe = report.method.replace("/", "_")
        report_to_csv(report, out_dir / f"report_{safe}.csv")
        reports.append(report)
    if reports:
        (out_dir / "report.md").write_text(merged_markdown_table(reports), encoding="utf-8")
        save_metric_bars(reports, out_dir / "report.png")
        click.echo(f"wrote {len(reports)} reports under {out_dir}")
    if failures and reports:
        return 3
    if failures:
        raise RuntimeError(f"all methods failed: {', '.join(failures)}")
    return 0


@cli.command()
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--input", "input_dir", type=click.Path(exists=True, file_okay=False),
              required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--scale", type=click.Choice(["2", "3", "4", "8"]), required=True,
              help="Linear upscaling factor; must match the checkpoint.")
@click.option("--compare", "compare_dir", type=click.Path(exists=True, file_okay=False),
              default=None, help="Directory of reference images for captioned panels.")
def infer(checkpoint, input_dir, out_dir, scale, compare_dir):
    """Super-resolve every image in a directory."""
    from .models.generator import generator_forward

    generator = _generator_from_checkpoint(checkpoint)
    scale = int(scale)
    if generator.spec.linear_scale != scale:
        raise RuntimeError(
            f"checkpoint is trained for scale {generator.spec.linear_scale}, "
            f"--scale says {scale}"
        )
    inputs = sorted(p for p in Path(input_dir).iterdir()
                    if p.suffix.lower() in IMAGE_SUFFIXES)
    if not inputs:
        raise RuntimeError(f"no input images under {input_dir}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    skipped = 0
    for path in inputs:
        try:
            lr = load_image(path)
        except ImageIOError as exc:
            click.echo(f"skipping {path.name}: {exc}", err=True)
            skipped += 1
            continue
        sr = np.clip(generator_forward(generator, lr), 0, 1)
        save_image(sr, out_dir / (path.stem + ".png"))
        if compare_dir:
            ref = _find_reference(Path(compare_dir), path.stem)
            if ref is not None:
                hr = load_image(ref)
                h, w = min(hr.shape[0], sr.shape[0]), min(hr.shape[1], sr.shape[1])
                sr_c, hr_c = sr[:h, :w], hr[:h, :w]
                caption = metric_caption(psnr(sr_c, hr_c), ssim(sr_c, hr_c),
                                         pi=perceptual_index(sr_c),
                                         niqe_value=_safe_niqe(sr_c))
                save_panels(
                    [upsample_nearest(lr, h, w), sr_c, hr_c],
                    ["input (nearest view)", f"output {caption}", "reference"],
                    out_dir / (path.stem + "_compare.png"),
                )
    click.echo(f"super-resolved {len(inputs) - skipped}/{len(inputs)} images into {out_dir}")
    return 3 if skipped else 0


def _safe_niqe(img):
    from .metrics.niqe import NiqeError, niqe
    try:
        return niqe(img)
    except NiqeError:
        return None


def _find_reference(directory: Path, stem: str):
    for suffix in IMAGE_SUFFIXES:
        candidate = directory / (stem + suffix)
        if candidate.exists():
            return candidate
    return None


@cli.command()
@click.argument("csvs", nargs=-1, type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def report(csvs, out_dir):
    """Merge evaluation CSVs into a Markdown table plus a metric figure."""
    reports = [load_report_csv(p) for p in csvs]
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.md").write_text(merged_markdown_table(reports), encoding="utf-8")
    save_metric_bars(reports, out_dir / "report.png")
    click.echo(f"merged {len(reports)} reports into {out_dir}")
    return 0


@cli.command("fit-niqe")
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--patch-size", type=int, default=96, show_default=True)
@click.option("--split", type=click.Choice(["train", "test", "all"]), default="train",
              show_default=True)
def fit_niqe(manifest_path, out_path, patch_size, split):
    """Refit the pristine NIQE model from a manifest of (sharp) images."""
    index = load_manifest(manifest_path)
    records = index.records if split == "all" else index.split(split)
    if not records:
        raise RuntimeError(f"manifest has no {split} records")
    images = [load_image(r.hr_path) for r in records]
    model = fit_niqe_model(images, patch_size=patch_size)
    model.save(out_path)
    click.echo(f"fitted NIQE model over {len(images)} images -> {out_path}")
    return 0


def main(argv=None) -> int:
    warnings.filterwarnings("default")
    try:
        result = cli.main(args=argv, standalone_mode=False)
        return int(result) if isinstance(result, int) else 0
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return 2
    except click.exceptions.Abort:
        return 1
    except (ConfigError, ManifestError, CheckpointError, TrainingAborted,
            ImageIOError, RuntimeError, ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
