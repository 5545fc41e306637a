"""Controlled degradation: antialiased bicubic resampling.

The low-resolution counterpart of a high-resolution image is produced by
separable Catmull-Rom (a = -0.5) resampling with the kernel stretched by the
scale ratio when shrinking, the community-default antialiased bicubic.  Tap
windows are truncated at the image border and renormalized, so the result
matches Pillow's float-mode BICUBIC to float32 precision.
"""

from __future__ import annotations

import math

import numpy as np

SUPPORTED_SCALES = (2, 3, 4, 8)
CATMULL_ROM_A = -0.5


class ScaleError(ValueError):
    """Unsupported or mismatched scale factor."""


def cubic_kernel(x: np.ndarray, a: float = CATMULL_ROM_A) -> np.ndarray:
    """Keys cubic convolution kernel with free parameter ``a``, support 2."""
    x = np.abs(np.asarray(x, dtype=np.float64))
    out = np.zeros_like(x)
    near = x <= 1.0
    far = (x > 1.0) & (x < 2.0)
    out[near] = (a + 2.0) * x[near] ** 3 - (a + 3.0) * x[near] ** 2 + 1.0
    out[far] = a * x[far] ** 3 - 5.0 * a * x[far] ** 2 + 8.0 * a * x[far] - 4.0 * a
    return out


def resample_weights(n_in: int, n_out: int) -> np.ndarray:
    """Dense (n_out, n_in) weight matrix for one separable resampling pass.

    Output pixel i samples input coordinate (i + 0.5) * n_in/n_out - 0.5;
    the kernel is stretched by the ratio when n_out < n_in (antialiasing).
    """
    ratio = n_in / n_out
    stretch = max(ratio, 1.0)
    support = 2.0 * stretch
    weights = np.zeros((n_out, n_in), dtype=np.float64)
    for i in range(n_out):
        center = (i + 0.5) * ratio - 0.5
        lo = max(0, int(math.floor(center - support + 1.0)))
        hi = min(n_in - 1, int(math.floor(center + support)))
        idx = np.arange(lo, hi + 1)
        w = cubic_kernel((idx - center) / stretch)
        weights[i, idx] = w / w.sum()
    return weights


def resize_bicubic(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resample an H x W or H x W x C image to (out_h, out_w). Not clamped."""
    img = np.asarray(img, dtype=np.float64)
    wr = resample_weights(img.shape[0], out_h)
    wc = resample_weights(img.shape[1], out_w)
    if img.ndim == 3:
        out = np.einsum("ij,jwc->iwc", wr, img)
        return np.einsum("kw,iwc->ikc", wc, out)
    return wr @ img @ wc.T


def synthesize_lr(hr: np.ndarray, s: int) -> np.ndarray:
    """Degrade an HR image by linear factor ``s`` to ceil(H/s) x ceil(W/s).

    Values are clamped back to [0,1] (the resampling kernel can overshoot).
    """
    if s not in SUPPORTED_SCALES:
        raise ScaleError(f"scale {s} not in supported set {SUPPORTED_SCALES}")
    hr = np.asarray(hr, dtype=np.float64)
    h, w = hr.shape[:2]
    if h < s or w < s:
        raise ScaleError(f"image {h}x{w} smaller than scale {s}")
    out_h = math.ceil(h / s)
    out_w = math.ceil(w / s)
    return np.clip(resize_bicubic(hr, out_h, out_w), 0.0, 1.0)


def upsample_nearest(lr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbor upsample by index mapping to (out_h, out_w)."""
    lr = np.asarray(lr)
    h, w = lr.shape[:2]
    rows = np.minimum((np.arange(out_h) * (h / out_h)).astype(int), h - 1)
    cols = np.minimum((np.arange(out_w) * (w / out_w)).astype(int), w - 1)
    return lr[np.ix_(rows, cols)]


def upsample_bicubic(lr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bicubic upsample, clamped to [0,1]."""
    return np.clip(resize_bicubic(lr, out_h, out_w), 0.0, 1.0)
