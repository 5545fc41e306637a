"""The four-stage per-mini-batch training loop.

Per batch: (1) generator step on the reconstruction objective, (2) whole-image
critic step against detached SR, (3) ROI critic step on mask-proposed patch
pairs, (4) generator step on the adversarial objective with critics frozen.
Which stages run is gated by the config variant.  Batch composition and crop
choices are pure functions of (seed, iteration), so a resumed run replays an
uninterrupted one bit for bit.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import math
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..data.batches import Batcher, SamplePair
from ..data.degrade import synthesize_lr
from ..data.manifest import DatasetIndex
from ..data.roi import propose_windows
from ..losses import FeatureExtractor, critic_loss, generator_adv_loss, recon_loss
from ..models.critic import Critic, build_critic
from ..models.generator import Generator, build_generator
from ..models.specs import CriticSpec, GeneratorSpec, small_critic_spec
from .checkpoint import save_checkpoint
from .config import TrainConfig, lr_at_iteration

LOG_COLUMNS = ("iter", "lr", "j_recon", "j_t1", "j_t2", "j_adv", "wall_ms")


class TrainingAborted(RuntimeError):
    """Raised when a loss goes non-finite; fit() drops a diagnostic checkpoint."""


@dataclass
class TrainState:
    cfg: TrainConfig
    generator: Generator
    t1: Critic
    t2: Critic
    opt_g: torch.optim.Adam
    opt_t1: torch.optim.Adam
    opt_t2: torch.optim.Adam
    iteration: int = 0
    loss_history: deque = field(default_factory=lambda: deque(maxlen=1000))


def make_optimizer(module, cfg: TrainConfig) -> torch.optim.Adam:
    return torch.optim.Adam(module.parameters(), lr=cfg.base_lr,
                            betas=cfg.adam_betas, eps=cfg.adam_eps)


def init_state(cfg: TrainConfig, gen_spec: GeneratorSpec | None = None,
               t1_spec: CriticSpec | None = None,
               t2_spec: CriticSpec | None = None) -> TrainState:
    gen_spec = gen_spec or GeneratorSpec(linear_scale=cfg.linear_scale)
    if gen_spec.linear_scale != cfg.linear_scale:
        raise ValueError("generator spec scale differs from training scale")
    p = cfg.roi_patch_size
    t1_spec = t1_spec or CriticSpec(input_size=(p, p))
    t2_spec = t2_spec or small_critic_spec((p, p))
    generator = build_generator(gen_spec, rng_seed=cfg.init_seed)
    t1 = build_critic(t1_spec, rng_seed=cfg.init_seed + 1)
    t2 = build_critic(t2_spec, rng_seed=cfg.init_seed + 2)
    return TrainState(
        cfg=cfg, generator=generator, t1=t1, t2=t2,
        opt_g=make_optimizer(generator, cfg),
        opt_t1=make_optimizer(t1, cfg),
        opt_t2=make_optimizer(t2, cfg),
    )


def param_hash(module: torch.nn.Module) -> str:
    h = hashlib.sha256()
    for name, t in sorted(module.state_dict().items()):
        h.update(name.encode())
        h.update(t.detach().cpu().numpy().tobytes())
    return h.hexdigest()


def _hwc_to_nchw(arrs, dtype=torch.float32) -> torch.Tensor:
    return torch.stack([
        torch.from_numpy(np.ascontiguousarray(a.transpose(2, 0, 1))).to(dtype)
        for a in arrs
    ])


def _prepare_batch(batch: list[SamplePair], cfg: TrainConfig, iteration: int):
    """Stack the batch into HR/LR tensors plus per-sample ROI windows.

    With crop_size set, each sample gets a deterministic random crop (the LR
    side is re-degraded from the crop so the pair stays exactly aligned).
    """
    s = cfg.linear_scale
    hrs, lrs, masks = [], [], []
    if cfg.crop_size is not None:
        c = cfg.crop_size
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 7, iteration]))
        for pair in batch:
            h, w = pair.hr.shape[:2]
            if h < c or w < c:
                raise ValueError(f"record {pair.id!r} smaller than crop_size {c}")
            r0 = int(rng.integers(0, (h - c) // s + 1)) * s
            c0 = int(rng.integers(0, (w - c) // s + 1)) * s
            hr = pair.hr[r0:r0 + c, c0:c0 + c]
            hrs.append(hr)
            lrs.append(synthesize_lr(hr, s))
            masks.append(pair.mask[r0:r0 + c, c0:c0 + c])
    else:
        shapes = {pair.hr.shape for pair in batch}
        if len(shapes) > 1:
            raise ValueError(
                f"batch mixes image shapes {sorted(shapes)}; set crop_size to train on crops"
            )
        for pair in batch:
            hrs.append(pair.hr)
            lrs.append(pair.lr)
            masks.append(pair.mask)
    windows = []
    p = cfg.roi_patch_size
    for mask in masks:
        if p <= min(mask.shape):
            windows.append(propose_windows(mask, p, cfg.roi_max_patches,
                                           cfg.roi_coverage_tau))
        else:
            windows.append([])
    return _hwc_to_nchw(hrs), _hwc_to_nchw(lrs), windows


@dataclass
class _RoiSlice:
    x_hr: torch.Tensor
    x_sr: torch.Tensor
    origin: tuple[int, int]


def _slice_pairs(hr_t, sr_t, windows, p):
    pairs = []
    for i, wins in enumerate(windows):
        for (r0, c0) in wins:
            pairs.append(_RoiSlice(
                x_hr=hr_t[i, :, r0:r0 + p, c0:c0 + p],
                x_sr=sr_t[i, :, r0:r0 + p, c0:c0 + p],
                origin=(r0, c0),
            ))
    return pairs


def _step(optimizer, loss):
    optimizer.zero_grad(set_to_none=True)
    loss.backward()
    optimizer.step()


def train_step(batch: list[SamplePair], state: TrainState,
               phi: FeatureExtractor | None = None) -> dict:
    """Run one mini-batch through the staged schedule; returns the log row."""
    cfg = state.cfg
    lr_value = lr_at_iteration(cfg, state.iteration)
    for opt in (state.opt_g, state.opt_t1, state.opt_t2):
        for group in opt.param_groups:
            group["lr"] = lr_value

    hr_t, lr_t, windows = _prepare_batch(batch, cfg, state.iteration)
    stages = cfg.stages
    adversarial_on = state.iteration >= cfg.pretrain_iters
    w = cfg.effective_weights
    p = cfg.roi_patch_size
    losses = {"j_recon": 0.0, "j_t1": 0.0, "j_t2": 0.0, "j_adv": 0.0}
    violations: list[str] = []

    def guarded(stage_name, loss_tensor):
        value = float(loss_tensor.detach())
        if not math.isfinite(value):
            raise TrainingAborted(f"non-finite loss in {stage_name} "
                                  f"at iteration {state.iteration}: {value}")
        return value

    hashes = None
    if cfg.debug_isolation:
        hashes = {"g": param_hash(state.generator),
                  "t1": param_hash(state.t1), "t2": param_hash(state.t2)}

    def check_isolation(stage, expect_static):
        if hashes is None:
            return
        current = {"g": param_hash(state.generator),
                   "t1": param_hash(state.t1), "t2": param_hash(state.t2)}
        for key in expect_static:
            if current[key] != hashes[key]:
                violations.append(f"stage {stage}: {key} parameters changed")
        hashes.update(current)

    if 1 in stages:
        sr = state.generator(lr_t)
        j = recon_loss(sr, hr_t, w, phi, edge_weighted=cfg.edge_weighted)
        _step(state.opt_g, j)
        losses["j_recon"] = guarded("stage 1 (reconstruction)", j)
        check_isolation(1, ("t1", "t2"))

    sr_detached = None
    if adversarial_on and (stages & {2, 3}):
        with torch.no_grad():
            sr_detached = state.generator(lr_t)

    if 2 in stages and adversarial_on:
        j = critic_loss(state.t1, hr_t, sr_detached)
        _step(state.opt_t1, j)
        losses["j_t1"] = guarded("stage 2 (whole-image critic)", j)
        check_isolation(2, ("g", "t2"))

    roi_counts = sum(len(wins) for wins in windows)
    if 3 in stages and adversarial_on and roi_counts > 0:
        pairs = _slice_pairs(hr_t, sr_detached, windows, p)
        x_hr = torch.stack([q.x_hr for q in pairs])
        x_sr = torch.stack([q.x_sr for q in pairs])
        j = critic_loss(state.t2, x_hr, x_sr)
        _step(state.opt_t2, j)
        losses["j_t2"] = guarded("stage 3 (ROI critic)", j)
        check_isolation(3, ("g", "t1"))

    if 4 in stages and adversarial_on:
        sr_live = state.generator(lr_t)
        live_pairs = _slice_pairs(hr_t, sr_live, windows, p) if roi_counts else []
        j = generator_adv_loss(state.t1, state.t2, sr_live, hr_t, live_pairs, w)
        if j.requires_grad:
            _step(state.opt_g, j)
        losses["j_adv"] = guarded("stage 4 (adversarial)", j)
        check_isolation(4, ("t1", "t2"))

    state.iteration += 1
    row = {"iter": state.iteration, "lr": lr_value, **losses}
    if cfg.debug_isolation:
        row["isolation_violations"] = violations
    state.loss_history.append({k: row[k] for k in ("iter", "lr", "j_recon",
                                                   "j_t1", "j_t2", "j_adv")})
    return row


@dataclass
class FitResult:
    checkpoint_path: Path
    log_path: Path
    state: TrainState


def fit(cfg: TrainConfig, index: DatasetIndex, out_dir,
        gen_spec: GeneratorSpec | None = None,
        t1_spec: CriticSpec | None = None,
        t2_spec: CriticSpec | None = None,
        phi: FeatureExtractor | None = None,
        resume_from=None,
        sample_callback=None) -> FitResult:
    """Train to cfg.total_iters, checkpointing and logging along the way.

    ``sample_callback(state, out_dir)`` runs at every checkpoint, letting the
    CLI render preview panels without the loop knowing about rendering.
    """
    out_dir = Path(out_dir)
    ckpt_dir = out_dir / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "train_log.csv"

    if resume_from is not None:
        import dataclasses

        from .checkpoint import load_checkpoint
        state = load_checkpoint(resume_from)
        # extending total_iters is allowed; anything else must match
        if dataclasses.replace(state.cfg, total_iters=cfg.total_iters) != cfg:
            raise ValueError("resume config differs from checkpoint config")
        state.cfg = cfg
        log_mode = "a" if log_path.exists() else "w"
    else:
        state = init_state(cfg, gen_spec, t1_spec, t2_spec)
        log_mode = "w"

    if not index.split("train"):
        raise ValueError("dataset has no train split")
    logging.getLogger(__name__).info(
        "parameters: generator %d, image critic %d, roi critic %d",
        state.generator.num_parameters(), state.t1.num_parameters(),
        state.t2.num_parameters())
    batcher = Batcher(index, cfg.batch_size, cfg.seed, split="train")

    with open(log_path, log_mode, newline="") as fh:
        writer = csv.writer(fh)
        if log_mode == "w":
            writer.writerow(LOG_COLUMNS)
        while state.iteration < cfg.total_iters:
            batcher.iteration = state.iteration
            batch = batcher.next_batch()
            started = time.perf_counter()
            try:
                row = train_step(batch, state, phi)
            except TrainingAborted:
                diag = ckpt_dir / f"diagnostic_nan_iter{state.iteration:08d}.ckpt"
                save_checkpoint(state, diag)
                raise
            wall_ms = (time.perf_counter() - started) * 1000.0
            writer.writerow([
                row["iter"], f"{row['lr']:.9g}",
                f"{row['j_recon']:.9g}", f"{row['j_t1']:.9g}",
                f"{row['j_t2']:.9g}", f"{row['j_adv']:.9g}",
                f"{wall_ms:.3f}",
            ])
            if cfg.debug_isolation and row.get("isolation_violations"):
                raise TrainingAborted(
                    "stage isolation violated: " + "; ".join(row["isolation_violations"])
                )
            if state.iteration % cfg.checkpoint_interval == 0 \
                    or state.iteration == cfg.total_iters:
                save_checkpoint(state, ckpt_dir / f"ckpt_{state.iteration:08d}.ckpt")
                if sample_callback is not None:
                    sample_callback(state, out_dir)

    final = ckpt_dir / f"ckpt_{state.iteration:08d}.ckpt"
    if not final.exists():
        save_checkpoint(state, final)
    return FitResult(checkpoint_path=final, log_path=log_path, state=state)
