"""Procedural microscopy-like image synthesis.

Stand-in corpora for demos and protocol tests: peripheral blood smear fields
(pale background, dense red-cell rims, sparse leukocytes with lobed nuclei)
and H&E-like histology fields (stroma with scattered dark nuclei).  Real
datasets are ingested via manifests; these generators exist so the pipeline
can be exercised end to end without redistributing any dataset.

Generation is deterministic per seed.  The returned mask marks nuclei (the
diagnostically relevant regions).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .images import save_image, save_mask
from .manifest import write_manifest


@dataclass(frozen=True)
class SmearParams:
    height: int = 576
    width: int = 768
    blur: float = 0.8
    noise: float = 0.009
    rbc_per_pixel: float = 650 / (576 * 768)
    rbc_radius: tuple[float, float] = (10.0, 16.0)
    wbc_radius: tuple[float, float] = (24.0, 34.0)
    midtex: float = 0.02
    midtex_sigma: float = 2.0


TOY_SMEAR = SmearParams(
    height=64, width=64, blur=0.4, noise=0.015,
    rbc_per_pixel=16 / (64 * 64), rbc_radius=(4.0, 7.0), wbc_radius=(8.0, 11.0),
    midtex=0.05, midtex_sigma=1.2,
)


def _blend(img, y0, y1, x0, x1, alpha, color):
    region = img[y0:y1, x0:x1, :]
    a = alpha[..., None]
    region *= 1.0 - a
    region += a * color


def blood_smear(seed: int, params: SmearParams = SmearParams()) -> tuple[np.ndarray, np.ndarray]:
    """One smear field; returns (image, nucleus mask)."""
    p = params
    rng = np.random.default_rng(seed)
    h, w = p.height, p.width
    img = np.zeros((h, w, 3))
    mask = np.zeros((h, w), dtype=np.uint8)

    field = gaussian_filter(rng.standard_normal((h, w)), min(60, h / 4))
    field = (field - field.min()) / (np.ptp(field) + 1e-9)
    base = np.array([0.93, 0.90, 0.88])
    img[:] = base - 0.05 * field[..., None]

    rbc_color = np.array([0.88, 0.60, 0.52])
    n_rbc = int(round(p.rbc_per_pixel * h * w))
    for _ in range(n_rbc):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        r = rng.uniform(*p.rbc_radius)
        y0, y1 = int(max(0, cy - r - 3)), int(min(h, cy + r + 4))
        x0, x1 = int(max(0, cx - r - 3)), int(min(w, cx + r + 4))
        if y1 <= y0 or x1 <= x0:
            continue
        yy, xx = np.mgrid[y0:y1, x0:x1]
        d2 = ((yy - cy) ** 2 + (xx - cx) ** 2) / r ** 2
        body = np.clip(1 - d2, 0, 1) ** 0.35
        pallor = np.exp(-d2 / 0.18) * 0.55
        alpha = np.clip(body - pallor, 0, 1) * rng.uniform(0.55, 0.9)
        _blend(img, y0, y1, x0, x1, alpha, rbc_color)

    for _ in range(rng.integers(1, 3)):
        cy = rng.uniform(h * 0.2, h * 0.8)
        cx = rng.uniform(w * 0.2, w * 0.8)
        big_r = rng.uniform(*p.wbc_radius)
        y0, y1 = int(max(0, cy - 2.2 * big_r)), int(min(h, cy + 2.2 * big_r))
        x0, x1 = int(max(0, cx - 2.2 * big_r)), int(min(w, cx + 2.2 * big_r))
        yy, xx = np.mgrid[y0:y1, x0:x1]
        cyt = np.exp(-(((yy - cy) ** 2 + (xx - cx) ** 2) / (1.6 * big_r ** 2)))
        _blend(img, y0, y1, x0, x1, np.clip(cyt * 1.2, 0, 0.85), np.array([0.75, 0.70, 0.85]))
        for _ in range(rng.integers(2, 5)):
            oy, ox = rng.uniform(-big_r * 0.5, big_r * 0.5, 2)
            rr = rng.uniform(big_r * 0.35, big_r * 0.55)
            d2 = ((yy - cy - oy) ** 2 + (xx - cx - ox) ** 2) / rr ** 2
            a = np.clip(1 - d2, 0, 1) ** 0.7 * 0.9
            chroma = 0.15 + 0.1 * gaussian_filter(rng.standard_normal(a.shape), 2)
            col = np.stack([chroma * 1.4, chroma * 0.8, chroma * 2.2], -1).clip(0, 1)
            region = img[y0:y1, x0:x1, :]
            region *= 1.0 - a[..., None]
            region += a[..., None] * col
            mask[y0:y1, x0:x1] |= (d2 <= 1.0).astype(np.uint8)

    if p.midtex > 0:
        g = gaussian_filter(rng.standard_normal((h, w)), p.midtex_sigma)
        g *= p.midtex / (g.std() + 1e-12)
        img += g[..., None] * np.array([0.7, 1.0, 0.9])
    img = gaussian_filter(img, (p.blur, p.blur, 0))
    img = img + rng.normal(0, p.noise, img.shape)
    return img.clip(0, 1), mask


@dataclass(frozen=True)
class HistologyParams:
    height: int = 384
    width: int = 384
    blur: float = 0.5
    noise: float = 0.004
    nuclei_per_pixel: float = 240 / (384 * 384)
    nucleus_radius: tuple[float, float] = (4.0, 9.0)


def histology(seed: int, params: HistologyParams = HistologyParams()) -> tuple[np.ndarray, np.ndarray]:
    """One H&E-like field; returns (image, nucleus mask)."""
    p = params
    rng = np.random.default_rng(seed)
    h, w = p.height, p.width
    img = np.zeros((h, w, 3))
    mask = np.zeros((h, w), dtype=np.uint8)

    mottle = gaussian_filter(rng.standard_normal((h, w)), 18)
    mottle = (mottle - mottle.min()) / (np.ptp(mottle) + 1e-9)
    base = np.array([0.91, 0.77, 0.85])
    img[:] = base + 0.08 * (mottle[..., None] - 0.5)

    # eosinophilic fiber texture
    fibers = gaussian_filter(rng.standard_normal((h, w)), (4.0, 1.2))
    fibers *= 0.05 / (fibers.std() + 1e-12)
    img += fibers[..., None] * np.array([0.9, 0.5, 0.7])

    n_nuc = int(round(p.nuclei_per_pixel * h * w))
    nuc_base = np.array([0.28, 0.18, 0.45])
    for _ in range(n_nuc):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        ry = rng.uniform(*p.nucleus_radius)
        rx = ry * rng.uniform(0.6, 1.0)
        theta = rng.uniform(0, np.pi)
        pad = max(ry, rx) + 3
        y0, y1 = int(max(0, cy - pad)), int(min(h, cy + pad + 1))
        x0, x1 = int(max(0, cx - pad)), int(min(w, cx + pad + 1))
        if y1 <= y0 or x1 <= x0:
            continue
        yy, xx = np.mgrid[y0:y1, x0:x1]
        dy, dx = yy - cy, xx - cx
        u = dy * np.cos(theta) + dx * np.sin(theta)
        v = -dy * np.sin(theta) + dx * np.cos(theta)
        d2 = (u / ry) ** 2 + (v / rx) ** 2
        a = np.clip(1 - d2, 0, 1) ** 0.6 * rng.uniform(0.7, 0.95)
        tint = nuc_base * rng.uniform(0.8, 1.2)
        _blend(img, y0, y1, x0, x1, a, np.clip(tint, 0, 1))
        mask[y0:y1, x0:x1] |= (d2 <= 1.0).astype(np.uint8)

    img = gaussian_filter(img, (p.blur, p.blur, 0))
    img = img + rng.normal(0, p.noise, img.shape)
    return img.clip(0, 1), mask


WBC_PATCH = SmearParams(
    height=256, width=256, blur=0.6, noise=0.006,
    rbc_per_pixel=10 / (256 * 256), rbc_radius=(28.0, 40.0),
    wbc_radius=(52.0, 68.0), midtex=0.03, midtex_sigma=2.5,
)


def wbc_patch(seed: int) -> tuple[np.ndarray, np.ndarray]:
    """One leukocyte-dominated patch, the high-magnification single-cell view."""
    return blood_smear(seed, WBC_PATCH)


PRESETS = {
    "blood_smear": lambda seed: blood_smear(seed),
    "toy_smear": lambda seed: blood_smear(seed, TOY_SMEAR),
    "histology": lambda seed: histology(seed),
    "wbc_patch": lambda seed: wbc_patch(seed),
}


def generate_corpus(preset: str, count: int, out_dir, base_seed: int = 0,
                    test_fraction: float = 0.1, with_masks: bool = True) -> Path:
    """Write a synthetic corpus plus JSON Lines manifest; returns its path.

    The trailing ceil(count * test_fraction) records form the test split.
    """
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    if with_masks:
        (out_dir / "masks").mkdir(exist_ok=True)
    n_test = int(np.ceil(count * test_fraction)) if count else 0
    records = []
    for i in range(count):
        img, mask = PRESETS[preset](base_seed + i)
        rec_id = f"{preset}_{i:04d}"
        img_rel = f"images/{rec_id}.png"
        save_image(img, out_dir / img_rel)
        mask_rel = None
        if with_masks and mask.any():
            mask_rel = f"masks/{rec_id}.png"
            save_mask(mask, out_dir / mask_rel)
        records.append({
            "id": rec_id,
            "hr": img_rel,
            "mask": mask_rel,
            "split": "test" if i >= count - n_test else "train",
        })
    manifest_path = out_dir / "manifest.jsonl"
    write_manifest(records, manifest_path)
    return manifest_path
