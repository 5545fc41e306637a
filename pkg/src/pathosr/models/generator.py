"""SR generator: residual-in-residual dense blocks plus strided-conv upsampling."""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .specs import GeneratorSpec, SpecError


def _init_conv(conv: nn.Conv2d, gain: float = 1.0) -> None:
    nn.init.kaiming_normal_(conv.weight, a=0.2, mode="fan_in", nonlinearity="leaky_relu")
    with torch.no_grad():
        conv.weight *= gain
    if conv.bias is not None:
        nn.init.zeros_(conv.bias)


class DenseBlock(nn.Module):
    """Five-conv dense block; residual branch scaled to stabilize deep stacks."""

    def __init__(self, channels: int, growth: int, res_scale: float):
        super().__init__()
        self.res_scale = res_scale
        self.convs = nn.ModuleList()
        for i in range(4):
            self.convs.append(nn.Conv2d(channels + i * growth, growth, 3, 1, 1))
        self.fuse = nn.Conv2d(channels + 4 * growth, channels, 3, 1, 1)
        self.act = nn.LeakyReLU(0.2, inplace=True)
        for conv in self.convs:
            _init_conv(conv, gain=0.1)
        _init_conv(self.fuse, gain=0.1)

    def forward(self, x):
        feats = [x]
        for conv in self.convs:
            feats.append(self.act(conv(torch.cat(feats, dim=1))))
        return x + self.res_scale * self.fuse(torch.cat(feats, dim=1))


class RRDB(nn.Module):
    def __init__(self, channels: int, growth: int, res_scale: float):
        super().__init__()
        self.blocks = nn.ModuleList(DenseBlock(channels, growth, res_scale) for _ in range(3))
        self.res_scale = res_scale

    def forward(self, x):
        out = x
        for block in self.blocks:
            out = block(out)
        return x + self.res_scale * out


def _upsample_conv(channels: int, stride: int) -> nn.ConvTranspose2d:
    # output side = stride * input side for these kernel/padding choices
    if stride == 2:
        return nn.ConvTranspose2d(channels, channels, kernel_size=4, stride=2, padding=1)
    if stride == 3:
        return nn.ConvTranspose2d(channels, channels, kernel_size=5, stride=3, padding=1)
    raise SpecError(f"unsupported upsampling stride {stride}")


class Generator(nn.Module):
    """Maps an LR image batch to an SR batch scaled by spec.linear_scale."""

    def __init__(self, spec: GeneratorSpec):
        super().__init__()
        self.spec = spec
        c = spec.base_channels
        self.head = nn.Conv2d(spec.channels, c, 3, 1, 1)
        self.trunk = nn.Sequential(
            *(RRDB(c, spec.growth_channels, spec.residual_scaling)
              for _ in range(spec.n_rrdb_blocks))
        )
        self.trunk_fuse = nn.Conv2d(c, c, 3, 1, 1)
        ups = []
        for stride in spec.upsample_stages:
            ups += [_upsample_conv(c, stride), nn.LeakyReLU(0.2, inplace=True)]
        self.upsample = nn.Sequential(*ups)
        self.refine = nn.Conv2d(c, c, 3, 1, 1)
        self.act = nn.LeakyReLU(0.2, inplace=True)
        self.to_image = nn.Conv2d(c, spec.channels, 3, 1, 1)
        _init_conv(self.head)
        _init_conv(self.trunk_fuse, gain=0.1)
        for m in self.upsample:
            if isinstance(m, nn.ConvTranspose2d):
                nn.init.kaiming_normal_(m.weight, a=0.2, mode="fan_in",
                                        nonlinearity="leaky_relu")
                nn.init.zeros_(m.bias)
        _init_conv(self.refine)
        # the conv path only learns the correction over the interpolated
        # base, so its head starts near zero
        _init_conv(self.to_image, gain=0.1)

    def forward(self, lr: torch.Tensor) -> torch.Tensor:
        """Raw (unclamped) SR output; adversarial training needs live
        gradients outside [0,1], so clamping happens at the inference
        surface (:func:`generator_forward`), not in the graph.

        The conv path predicts a correction over a bilinear-upsampled base,
        which anchors early training at interpolation quality.
        """
        if lr.shape[1] != self.spec.channels:
            raise ValueError(
                f"expected {self.spec.channels} channels, got {lr.shape[1]}"
            )
        base = F.interpolate(lr, scale_factor=self.spec.linear_scale,
                             mode="bilinear", align_corners=False)
        feat = self.head(lr)
        feat = feat + self.trunk_fuse(self.trunk(feat))
        feat = self.upsample(feat)
        return base + self.to_image(self.act(self.refine(feat)))

    def num_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())


def build_generator(spec: GeneratorSpec, rng_seed: int = 0) -> Generator:
    """Construct a generator with deterministic initialization under the seed."""
    torch.manual_seed(rng_seed)
    return Generator(spec)


def _to_tensor(img: np.ndarray, dtype=torch.float32) -> torch.Tensor:
    arr = np.asarray(img)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(2, 0, 1))[None]).to(dtype)


def _to_image(t: torch.Tensor) -> np.ndarray:
    return t.detach().cpu().numpy()[0].transpose(1, 2, 0).astype(np.float64)


def generator_forward(g: Generator, lr: np.ndarray) -> np.ndarray:
    """Super-resolve one H x W x C image array, clamped to [0,1]."""
    dtype = next(g.parameters()).dtype
    with torch.no_grad():
        return np.clip(_to_image(g(_to_tensor(lr, dtype))), 0.0, 1.0)
