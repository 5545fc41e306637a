"""ROI patch proposal from binary masks.

Candidate windows are centered on connected-component bounding boxes, clamped
to image bounds, and kept when mask coverage inside the window clears the
threshold.  Proposals are returned best-coverage first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage


@dataclass(frozen=True)
class RoiPatchPair:
    x_hr: np.ndarray
    x_sr: np.ndarray
    origin: tuple[int, int]  # (row, col) of the window's top-left in HR coords


def _clamp_window(center_r: float, center_c: float, p: int, h: int, w: int) -> tuple[int, int]:
    r0 = int(round(center_r - p / 2))
    c0 = int(round(center_c - p / 2))
    r0 = min(max(r0, 0), h - p)
    c0 = min(max(c0, 0), w - p)
    return r0, c0


def propose_windows(mask: np.ndarray, p: int, k: int, tau: float = 0.1) -> list[tuple[int, int]]:
    """Top-k window origins (row, col) of p x p crops covering the mask.

    One candidate per connected component (bounding-box center, clamped);
    candidates with coverage below ``tau`` are dropped, the rest are ordered
    by descending coverage.  An all-zero mask yields an empty list.
    """
    mask = np.asarray(mask)
    h, w = mask.shape
    if p > min(h, w):
        raise ValueError(f"patch size {p} exceeds mask dimensions {h}x{w}")
    labels, n = ndimage.label(mask > 0)
    if n == 0:
        return []
    candidates = []
    for sl in ndimage.find_objects(labels):
        center_r = (sl[0].start + sl[0].stop - 1) / 2
        center_c = (sl[1].start + sl[1].stop - 1) / 2
        r0, c0 = _clamp_window(center_r, center_c, p, h, w)
        coverage = float(np.count_nonzero(mask[r0:r0 + p, c0:c0 + p])) / (p * p)
        if coverage >= tau:
            candidates.append((coverage, (r0, c0)))
    candidates.sort(key=lambda item: (-item[0], item[1]))
    windows = []
    seen = set()
    for _, origin in candidates:
        if origin in seen:
            continue
        seen.add(origin)
        windows.append(origin)
        if len(windows) == k:
            break
    return windows


def propose_roi_patches(hr, sr, mask, p: int, k: int, tau: float = 0.1) -> list[RoiPatchPair]:
    """Cut aligned p x p HR/SR patch pairs at the proposed windows."""
    hr = np.asarray(hr)
    sr = np.asarray(sr)
    mask = np.asarray(mask)
    if hr.shape[:2] != sr.shape[:2] or hr.shape[:2] != mask.shape[:2]:
        raise ValueError(
            f"hr {hr.shape[:2]}, sr {sr.shape[:2]}, mask {mask.shape[:2]} must share dimensions"
        )
    pairs = []
    for r0, c0 in propose_windows(mask, p, k, tau):
        pairs.append(
            RoiPatchPair(
                x_hr=hr[r0:r0 + p, c0:c0 + p],
                x_sr=sr[r0:r0 + p, c0:c0 + p],
                origin=(r0, c0),
            )
        )
    return pairs
