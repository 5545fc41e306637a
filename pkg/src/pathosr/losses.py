"""Training losses.

The generator trains against a reconstruction objective (weighted pixel
error plus a perceptual feature distance) and, in the adversarial stages,
against two relativistic critics: one scoring whole images, one scoring
patches cut from diagnostically relevant regions.  Critic probabilities are
clamped away from {0, 1} so every log term stays finite.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass
from math import isfinite

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .models.relativistic import relativistic_prob

SIGMA_CLAMP_EPS = 1e-7

_SOBEL_X = torch.tensor([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
_SOBEL_Y = _SOBEL_X.T
_LUMA = torch.tensor([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class LossWeights:
    eta: float = 1e-2          # pixel term weight
    lambda_t1: float = 5e-3    # whole-image critic weight
    lambda_t2: float = 5e-3    # ROI critic weight
    alpha_edge: float = 1.0    # edge emphasis in the weighted pixel term

    def __post_init__(self):
        for name in ("eta", "lambda_t1", "lambda_t2", "alpha_edge"):
            v = getattr(self, name)
            if not isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {v}")


@contextmanager
def frozen_params(*modules):
    """Temporarily disable gradient accumulation into the given modules."""
    saved = []
    for m in modules:
        if isinstance(m, nn.Module):
            for p in m.parameters():
                saved.append((p, p.requires_grad))
                p.requires_grad_(False)
    try:
        yield
    finally:
        for p, flag in saved:
            p.requires_grad_(flag)


class FeatureExtractor(nn.Module):
    """Frozen VGG-style conv feature map with a named tap point.

    Blocks of 3x3 convolutions with channel doubling and 2x max pooling in
    between; the tap names a convolution whose pre-activation output is the
    feature map.  Weights come from a file (or a deterministic seed for the
    shipped default), and are never trained.
    """

    FORMAT_VERSION = 1

    def __init__(self, base_channels: int = 32, n_blocks: int = 4,
                 convs_per_block: int = 2, tap: str | None = None):
        super().__init__()
        self.config = {
            "base_channels": base_channels,
            "n_blocks": n_blocks,
            "convs_per_block": convs_per_block,
        }
        self.layer_order: list[str] = []
        self.layers = nn.ModuleDict()
        in_ch = 3
        for b in range(1, n_blocks + 1):
            out_ch = base_channels * 2 ** (b - 1)
            for i in range(1, convs_per_block + 1):
                name = f"conv{b}_{i}"
                self.layers[name] = nn.Conv2d(in_ch, out_ch, 3, 1, 1)
                self.layer_order.append(name)
                in_ch = out_ch
            if b < n_blocks:
                name = f"pool{b}"
                self.layers[name] = nn.MaxPool2d(2, ceil_mode=True)
                self.layer_order.append(name)
        self.tap = tap or f"conv{n_blocks}_{convs_per_block}"
        if self.tap not in self.layers:
            raise ValueError(f"tap {self.tap!r} is not a layer of this extractor")
        # variance-preserving init: the feature distance has to stay O(1)
        # through depth to act as a usable training signal
        for m in self.layers.values():
            if isinstance(m, nn.Conv2d):
                nn.init.kaiming_normal_(m.weight, a=0.2, mode="fan_in",
                                        nonlinearity="leaky_relu")
                nn.init.zeros_(m.bias)
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = (x - 0.45) / 0.226
        for name in self.layer_order:
            x = self.layers[name](x)
            if name == self.tap:
                return x  # pre-activation features
            if name.startswith("conv"):
                x = F.leaky_relu(x, 0.2)
        raise AssertionError("tap not reached")  # pragma: no cover

    @classmethod
    def default(cls, seed: int = 0, tap: str | None = None) -> "FeatureExtractor":
        """Deterministically initialized extractor (the shipped fallback)."""
        torch.manual_seed(seed)
        return cls(tap=tap)

    def save_weights(self, path) -> None:
        torch.save({
            "format_version": self.FORMAT_VERSION,
            "config": self.config,
            "tap": self.tap,
            "state": self.state_dict(),
        }, path)

    @classmethod
    def from_file(cls, path) -> "FeatureExtractor":
        blob = torch.load(path, map_location="cpu", weights_only=True)
        if blob.get("format_version") != cls.FORMAT_VERSION:
            raise ValueError(
                f"feature extractor file {path} has version "
                f"{blob.get('format_version')}, expected {cls.FORMAT_VERSION}"
            )
        phi = cls(tap=blob["tap"], **blob["config"])
        phi.load_state_dict(blob["state"])
        return phi


def _edge_weights_nchw(hr: torch.Tensor, alpha: float) -> torch.Tensor:
    """(N,C,H,W) -> (N,1,H,W) weights 1 + alpha * |grad| / max|grad| per image."""
    if hr.shape[1] == 3:
        weights = _LUMA.to(hr.dtype).to(hr.device).view(1, 3, 1, 1)
        y = (hr * weights).sum(dim=1, keepdim=True)
    else:
        y = hr.mean(dim=1, keepdim=True)
    pad = F.pad(y, (1, 1, 1, 1), mode="replicate")
    kx = _SOBEL_X.to(hr.dtype).to(hr.device).view(1, 1, 3, 3)
    ky = _SOBEL_Y.to(hr.dtype).to(hr.device).view(1, 1, 3, 3)
    gx = F.conv2d(pad, kx)
    gy = F.conv2d(pad, ky)
    mag = torch.sqrt(gx * gx + gy * gy)
    peak = mag.amax(dim=(1, 2, 3), keepdim=True)
    # peaks below arithmetic noise mean a flat image (weakest real edge, one
    # 8-bit level, gives magnitude ~1.6e-2)
    scale = torch.where(peak > 1e-6, mag / peak.clamp_min(1e-300), torch.zeros_like(mag))
    return (1.0 + alpha * scale).detach()


def edge_weight_map(hr, alpha_edge: float = 1.0):
    """Edge-emphasis weights >= 1 from the Sobel gradient magnitude of luma.

    Accepts an H x W x C array (returns H x W) or an (N,C,H,W) tensor
    (returns (N,1,H,W)).  A constant image maps to all-ones.
    """
    if isinstance(hr, torch.Tensor):
        return _edge_weights_nchw(hr, alpha_edge)
    arr = np.asarray(hr, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    t = torch.from_numpy(arr.transpose(2, 0, 1))[None]
    return _edge_weights_nchw(t, alpha_edge)[0, 0].numpy()


def recon_loss(sr: torch.Tensor, hr: torch.Tensor, w: LossWeights,
               phi: FeatureExtractor | None = None,
               edge_weighted: bool = False) -> torch.Tensor:
    """eta-weighted mean absolute error plus perceptual feature distance.

    With ``edge_weighted`` the pixel term is mean(w_edge * |sr - hr|) where
    w_edge comes from :func:`edge_weight_map` of the ground truth.
    """
    if sr.shape != hr.shape:
        raise ValueError(f"shape mismatch: sr {tuple(sr.shape)} vs hr {tuple(hr.shape)}")
    diff = (sr - hr).abs()
    if edge_weighted:
        pixel = (_edge_weights_nchw(hr, w.alpha_edge) * diff).mean()
    else:
        pixel = diff.mean()
    loss = w.eta * pixel
    if phi is not None:
        loss = loss + ((phi(sr) - phi(hr)) ** 2).mean()
    return loss


def _clamped(p: torch.Tensor) -> torch.Tensor:
    return p.clamp(SIGMA_CLAMP_EPS, 1.0 - SIGMA_CLAMP_EPS)


def critic_loss(critic, real: torch.Tensor, fake: torch.Tensor) -> torch.Tensor:
    """Relativistic critic objective.

    -E_real[log T(real, fake)] - E_fake[log(1 - T(fake, real))].  The caller
    must pass ``fake`` detached from the generator graph when training.
    """
    if real.shape[0] == 0 or fake.shape[0] == 0:
        raise ValueError("critic_loss requires nonempty real and fake batches")
    p_real = _clamped(relativistic_prob(critic, real, fake))
    p_fake = _clamped(relativistic_prob(critic, fake, real))
    return -torch.log(p_real).mean() - torch.log(1.0 - p_fake).mean()


def _symmetric_generator_term(critic, fake: torch.Tensor, real: torch.Tensor) -> torch.Tensor:
    p_fake = _clamped(relativistic_prob(critic, fake, real))
    p_real = _clamped(relativistic_prob(critic, real, fake))
    return -torch.log(p_fake).mean() - torch.log(1.0 - p_real).mean()


def _stack_pairs(roi_pairs, like: torch.Tensor):
    xs_sr, xs_hr = [], []
    for pair in roi_pairs:
        for attr, dest in (("x_sr", xs_sr), ("x_hr", xs_hr)):
            x = getattr(pair, attr)
            if isinstance(x, torch.Tensor):
                dest.append(x)
            else:
                arr = np.asarray(x, dtype=np.float64).transpose(2, 0, 1)
                dest.append(torch.from_numpy(arr).to(like.dtype))
    return torch.stack(xs_sr), torch.stack(xs_hr)


def generator_adv_loss(t1, t2, sr: torch.Tensor, hr: torch.Tensor,
                       roi_pairs, w: LossWeights) -> torch.Tensor:
    """Adversarial generator objective over both critics, critics frozen.

    lambda_t1 weighs the whole-image term, lambda_t2 the ROI-patch term;
    an empty ``roi_pairs`` list contributes exactly zero.
    """
    total = sr.new_zeros(())
    with frozen_params(t1, t2):
        if w.lambda_t1 > 0:
            total = total + w.lambda_t1 * _symmetric_generator_term(t1, sr, hr)
        if w.lambda_t2 > 0 and roi_pairs:
            x_sr, x_hr = _stack_pairs(roi_pairs, sr)
            total = total + w.lambda_t2 * _symmetric_generator_term(t2, x_sr, x_hr)
    return total
