"""Relativistic pairing: score one batch against the mean score of another."""

from __future__ import annotations

import torch


def relativistic_prob(critic, a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """sigmoid(C(a_i) - mean_j C(b_j)) for each element of batch ``a``.

    The probability that each member of ``a`` is more realistic than the
    reference batch ``b`` on average.  Strictly inside (0, 1).
    """
    if b.shape[0] == 0:
        raise ValueError("reference batch must be nonempty")
    return torch.sigmoid(critic(a) - critic(b).mean())
