"""Realness critics: VGG-style conv pyramid with a pooled scalar head.

Global average pooling makes the score independent of input size, so the
whole-image critic accepts any image at least as large as its stride pyramid.
"""

from __future__ import annotations

import torch
from torch import nn

from .specs import CriticSpec


class Critic(nn.Module):
    def __init__(self, spec: CriticSpec):
        super().__init__()
        self.spec = spec
        layers = []
        in_ch = spec.channels
        for out_ch, stride in spec.conv_stages:
            layers += [
                nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=1),
                nn.LeakyReLU(spec.leak, inplace=True),
            ]
            in_ch = out_ch
        self.features = nn.Sequential(*layers)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.head = nn.Sequential(
            nn.Linear(in_ch, spec.head_width),
            nn.LeakyReLU(spec.leak, inplace=True),
            nn.Linear(spec.head_width, 1),
        )
        for m in self.modules():
            if isinstance(m, (nn.Conv2d, nn.Linear)):
                nn.init.kaiming_normal_(m.weight, a=spec.leak, mode="fan_in",
                                        nonlinearity="leaky_relu")
                nn.init.zeros_(m.bias)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        """Batch of images -> batch of unbounded scalar scores."""
        min_side = self.spec.min_input_side
        if images.shape[-2] < min_side or images.shape[-1] < min_side:
            raise ValueError(
                f"input {tuple(images.shape[-2:])} smaller than stride pyramid ({min_side})"
            )
        feat = self.pool(self.features(images)).flatten(1)
        return self.head(feat).squeeze(1)

    def num_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())


def build_critic(spec: CriticSpec, rng_seed: int = 0) -> Critic:
    """Construct a critic with deterministic initialization under the seed."""
    torch.manual_seed(rng_seed)
    return Critic(spec)
