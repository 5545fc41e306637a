"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines.  Criterion 2 (full 500k-iteration trained reproduction) is out of
desk-scale reach by definition and is substituted by criteria 3-8; it prints
its substitution note and passes vacuously.
"""

import csv
import math
import time
import warnings

import numpy as np
import pytest
import torch

from pathosr.data.batches import Batcher, materialize
from pathosr.data.degrade import upsample_nearest
from pathosr.data.manifest import load_manifest
from pathosr.data.roi import RoiPatchPair
from pathosr.data.synthetic import HistologyParams, generate_corpus, histology
from pathosr.losses import (
    FeatureExtractor, LossWeights, critic_loss, generator_adv_loss, recon_loss,
)
from pathosr.metrics import default_niqe_model, niqe, psnr, ssim
from pathosr.models.critic import build_critic
from pathosr.models.generator import build_generator, generator_forward
from pathosr.models.specs import CriticSpec, GeneratorSpec
from pathosr.training import (
    TrainConfig, fit, init_state, load_checkpoint, param_hash, train_step,
)

TWO_LN_2 = 2.0 * math.log(2.0)

SMOKE_GEN = GeneratorSpec(n_rrdb_blocks=2, base_channels=16, growth_channels=8,
                          linear_scale=2)
SMOKE_T1 = CriticSpec(input_size=(64, 64),
                      conv_stages=((32, 1), (32, 2), (64, 1), (64, 2)), head_width=64)
SMOKE_T2 = CriticSpec(input_size=(24, 24),
                      conv_stages=((32, 1), (32, 2), (64, 1), (64, 2)), head_width=64)


def _report(criterion: int, passed: bool, detail: str) -> None:
    print(f"\nACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'} — {detail}")
    assert passed, f"criterion {criterion}: {detail}"


def smoke_config(**overrides):
    defaults = dict(
        total_iters=500, base_lr=2e-4, decay_factor=0.5, decay_interval=100_000,
        batch_size=4, linear_scale=2, checkpoint_interval=250, variant="t1_t2",
        roi_patch_size=24, roi_max_patches=2, roi_coverage_tau=0.05,
        weights=LossWeights(eta=1.0),
    )
    defaults.update(overrides)
    return TrainConfig(**defaults)


@pytest.fixture(scope="module")
def smoke_index(tmp_path_factory):
    root = tmp_path_factory.mktemp("smoke_corpus")
    manifest = generate_corpus("toy_smear", count=10, out_dir=root,
                               base_seed=100, test_fraction=0.2)
    return load_manifest(manifest, scale=2, patch_size=24)


# --------------------------------------------------------------- criterion 1

def test_criterion_1_baseline_reproduction(tmp_path):
    started = time.time()
    manifest = generate_corpus("blood_smear", count=33, out_dir=tmp_path,
                               base_seed=0, test_fraction=3 / 33)
    index = load_manifest(manifest, scale=4)
    assert len(index.split("train")) == 30 and len(index.split("test")) == 3
    from pathosr.metrics.report import evaluate_model
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        nearest = evaluate_model("nearest", index, area_scale=16).aggregate
        bicubic = evaluate_model("bicubic", index, area_scale=16).aggregate
    elapsed = time.time() - started
    checks = [
        abs(nearest["psnr_db"] - 32.83) <= 1.5,
        abs(nearest["ssim"] - 0.88) <= 0.03,
        abs(bicubic["psnr_db"] - 37.65) <= 1.5,
        abs(bicubic["ssim"] - 0.94) <= 0.03,
        elapsed < 300.0,
    ]
    _report(1, all(checks),
            f"nearest {nearest['psnr_db']:.2f} dB/{nearest['ssim']:.3f} "
            f"(32.83±1.5 / 0.88±0.03), bicubic {bicubic['psnr_db']:.2f} dB/"
            f"{bicubic['ssim']:.3f} (37.65±1.5 / 0.94±0.03), {elapsed:.0f}s")


# --------------------------------------------------------------- criterion 2

def test_criterion_2_trained_cells_substituted():
    _report(2, True,
            "500k-iteration trained columns are not desk-scale reproducible; "
            "substituted by criteria 3-8 per the acceptance contract")


# --------------------------------------------------------------- criterion 3

def test_criterion_3_loss_identities():
    def constant_critic(value):
        return lambda images: torch.full((images.shape[0],), value,
                                         dtype=images.dtype)

    real = torch.rand(4, 3, 8, 8)
    fake = torch.rand(4, 3, 8, 8)
    c_loss = critic_loss(constant_critic(1.23), real, fake).item()

    pairs = [RoiPatchPair(x_hr=real[0, :, :4, :4], x_sr=fake[0, :, :4, :4],
                          origin=(0, 0))]
    w = LossWeights(lambda_t1=5e-3, lambda_t2=5e-3)
    g_loss = generator_adv_loss(constant_critic(0.5), constant_critic(-3.0),
                                real, fake, pairs, w).item()

    hr = torch.rand(2, 3, 8, 8)
    phi = FeatureExtractor.default(seed=0)
    r_loss = recon_loss(hr.clone(), hr, LossWeights(), phi=phi).item()

    checks = [
        abs(c_loss - TWO_LN_2) < 1e-6,
        abs(g_loss - (5e-3 + 5e-3) * TWO_LN_2) < 1e-6,
        r_loss == 0.0,
    ]
    _report(3, all(checks),
            f"critic {c_loss:.8f} vs 2ln2={TWO_LN_2:.8f}; adversarial "
            f"{g_loss:.8f} vs {(1e-2) * TWO_LN_2:.8f}; recon(sr=hr)={r_loss}")


# --------------------------------------------------------------- criterion 4

def test_criterion_4_gradient_checks():
    def finite_difference(fn, x, h=1e-6):
        grad = torch.zeros_like(x)
        flat, gflat = x.view(-1), grad.view(-1)
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + h
            up = fn().item()
            flat[i] = orig - h
            down = fn().item()
            flat[i] = orig
            gflat[i] = (up - down) / (2 * h)
        return grad

    def rel_err(a, n):
        return (a - n).norm().item() / max(a.norm().item(), n.norm().item(), 1e-6)

    spec = CriticSpec(input_size=(4, 4), conv_stages=((4, 1), (4, 2)), head_width=8)
    t1 = build_critic(spec, rng_seed=5).double()
    t2 = build_critic(spec, rng_seed=6).double()
    phi = FeatureExtractor.default(seed=0).double()
    torch.manual_seed(0)
    hr = torch.rand(2, 3, 4, 4, dtype=torch.float64)
    sr0 = (hr + 0.3 * torch.rand_like(hr)).clamp(0.05, 0.95)
    w = LossWeights(eta=0.7, lambda_t1=1.0, lambda_t2=1.0, alpha_edge=1.2)
    errors = {}

    for name, edge in (("j_recon", False), ("j_recon_w", True)):
        sr = sr0.clone().requires_grad_(True)
        analytic, = torch.autograd.grad(
            recon_loss(sr, hr, w, phi=phi, edge_weighted=edge), sr)
        sr_d = sr0.clone()
        numeric = finite_difference(
            lambda: recon_loss(sr_d, hr, w, phi=phi, edge_weighted=edge), sr_d)
        errors[name] = rel_err(analytic, numeric)

    for name, critic in (("j_t1", t1), ("j_t2", t2)):
        fake = sr0.clone().requires_grad_(True)
        analytic, = torch.autograd.grad(critic_loss(critic, hr, fake), fake)
        fake_d = sr0.clone()
        numeric = finite_difference(lambda: critic_loss(critic, hr, fake_d), fake_d)
        errors[name] = rel_err(analytic, numeric)

    windows = [(0, 0), (2, 1)]

    def adv(tensor):
        pairs = [RoiPatchPair(x_hr=hr[0, :, r:r + 2, c:c + 2],
                              x_sr=tensor[0, :, r:r + 2, c:c + 2], origin=(r, c))
                 for r, c in windows]
        return generator_adv_loss(t1, t2, tensor, hr, pairs, w)

    sr = sr0.clone().requires_grad_(True)
    analytic, = torch.autograd.grad(adv(sr), sr)
    sr_d = sr0.clone()
    numeric = finite_difference(lambda: adv(sr_d), sr_d)
    errors["j_adv"] = rel_err(analytic, numeric)

    worst = max(errors.values())
    _report(4, worst < 1e-3,
            "max relative error "
            + ", ".join(f"{k}={v:.2e}" for k, v in errors.items()))


# --------------------------------------------------------------- criterion 5

def test_criterion_5_stage_isolation(smoke_index):
    cfg = smoke_config(total_iters=50, debug_isolation=True)
    state = init_state(cfg, SMOKE_GEN, SMOKE_T1, SMOKE_T2)
    batcher = Batcher(smoke_index, cfg.batch_size, cfg.seed)
    violations = []
    for _ in range(50):
        batcher.iteration = state.iteration
        row = train_step(batcher.next_batch(), state)
        violations.extend(row["isolation_violations"])
    _report(5, not violations,
            f"{len(violations)} violations over 50 instrumented steps "
            f"(critics static in stages 1/4, generator static in stages 2/3)")


# --------------------------------------------------------------- criterion 6

def test_criterion_6_training_smoke(smoke_index, tmp_path):
    started = time.time()
    cfg = smoke_config(total_iters=500)
    result = fit(cfg, smoke_index, tmp_path / "smoke_run",
                 gen_spec=SMOKE_GEN, t1_spec=SMOKE_T1, t2_spec=SMOKE_T2)
    with open(result.log_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    recon = [float(r["j_recon"]) for r in rows]
    all_finite = all(
        math.isfinite(float(r[c]))
        for r in rows for c in ("j_recon", "j_t1", "j_t2", "j_adv")
    )
    initial = float(np.mean(recon[:10]))
    final = float(np.mean(recon[-10:]))
    drop = 1.0 - final / initial

    generator = result.state.generator
    sr_better = []
    for record in smoke_index.split("test"):
        pair = materialize(record, 2)
        h, w = pair.hr.shape[:2]
        sr = np.clip(generator_forward(generator, pair.lr), 0, 1)[:h, :w]
        baseline = upsample_nearest(pair.lr, h, w)
        sr_better.append((psnr(sr, pair.hr), psnr(baseline, pair.hr)))
    elapsed = time.time() - started
    checks = [
        all_finite,
        drop >= 0.30,
        all(s > b for s, b in sr_better),
        elapsed < 600.0,
    ]
    detail = (f"losses finite={all_finite}, j_recon drop {drop * 100:.0f}% "
              f"(>=30%), held-out SR vs nearest "
              + ", ".join(f"{s:.2f}>{b:.2f}" for s, b in sr_better)
              + f", {elapsed:.0f}s")
    _report(6, all(checks), detail)


# --------------------------------------------------------------- criterion 7

def test_criterion_7_metric_oracles(rng):
    from test_metrics import brute_force_psnr, brute_force_ssim

    agree = True
    for _ in range(20):
        a = rng.random((20, 20, 3))
        b = np.clip(a + rng.normal(0, rng.uniform(0.01, 0.3), a.shape), 0, 1)
        agree &= abs(psnr(a, b) - brute_force_psnr(a, b)) < 1e-6
        agree &= abs(ssim(a, b) - brute_force_ssim(a, b)) < 1e-6

    x = rng.random((24, 24, 3))
    identity_one = abs(ssim(x, x.copy()) - 1.0) < 1e-9

    base = rng.random((32, 32, 3)) * 0.5 + 0.25
    noise_psnrs = [
        psnr(base, np.clip(base + rng.normal(0, amp, base.shape), 0, 1))
        for amp in (0.01, 0.05, 0.1)
    ]
    monotone = noise_psnrs[0] > noise_psnrs[1] > noise_psnrs[2]

    model = default_niqe_model()
    orderings = all(
        niqe(rng.random((128, 128, 3)), model)
        > niqe(histology(700 + i, HistologyParams(height=128, width=128))[0], model)
        for i in range(10)
    )
    _report(7, agree and identity_one and monotone and orderings,
            f"oracle agreement={agree}, ssim(x,x)=1: {identity_one}, "
            f"psnr monotone {['%.1f' % p for p in noise_psnrs]}, "
            f"niqe(noise)>niqe(natural) on 10 pairs: {orderings}")


# --------------------------------------------------------------- criterion 8

def _loss_rows(log_path):
    with open(log_path, newline="") as fh:
        return [(r["iter"], r["lr"], r["j_recon"], r["j_t1"], r["j_t2"], r["j_adv"])
                for r in csv.DictReader(fh)]


def test_criterion_8_determinism(smoke_index, tmp_path):
    cfg = smoke_config(total_iters=30, checkpoint_interval=15)
    logs = []
    for name in ("one", "two"):
        result = fit(cfg, smoke_index, tmp_path / name, gen_spec=SMOKE_GEN,
                     t1_spec=SMOKE_T1, t2_spec=SMOKE_T2)
        logs.append(_loss_rows(result.log_path))
    identical = logs[0] == logs[1]

    half = fit(smoke_config(total_iters=15, checkpoint_interval=15), smoke_index,
               tmp_path / "half", gen_spec=SMOKE_GEN, t1_spec=SMOKE_T1,
               t2_spec=SMOKE_T2)
    resumed = fit(cfg, smoke_index, tmp_path / "resumed",
                  resume_from=half.checkpoint_path)
    tail_match = _loss_rows(resumed.log_path) == logs[0][15:]
    full_state = load_checkpoint(tmp_path / "one" / "checkpoints" / "ckpt_00000030.ckpt")
    hash_match = all(
        param_hash(getattr(resumed.state, n)) == param_hash(getattr(full_state, n))
        for n in ("generator", "t1", "t2")
    )
    _report(8, identical and tail_match and hash_match,
            f"seeded runs identical (wall_ms excluded)={identical}, resume rows "
            f"16-30 bit-exact={tail_match}, resumed parameter hashes equal={hash_match}")


# --------------------------------------------------------------- criterion 9

def test_criterion_9_shape_contracts(rng):
    failures = 0
    trials = 0
    tiny = dict(n_rrdb_blocks=1, base_channels=8, growth_channels=4)
    sizes_per_scale = (13, 13, 12, 12)
    for s, n_sizes in zip((2, 3, 4, 8), sizes_per_scale):
        g = build_generator(GeneratorSpec(linear_scale=s, **tiny), rng_seed=s)
        for _ in range(n_sizes):
            h = int(rng.integers(4, 24))
            w = int(rng.integers(4, 24))
            out = generator_forward(g, rng.random((h, w, 3)))
            trials += 1
            if out.shape != (s * h, s * w, 3):
                failures += 1
    _report(9, failures == 0 and trials == 50,
            f"{trials} random sizes across scales 2/3/4/8, {failures} failures")
