"""Natural image quality evaluator (no-reference).

Mean-subtracted contrast-normalized (MSCN) coefficients are computed on luma,
asymmetric generalized Gaussian fits on the coefficients and their four
orientation products give 18 features per patch at two scales (36 total),
and the score is the Mahalanobis-style distance between the multivariate
Gaussian fit of the image's patch features and a pristine-corpus model.

The shipped pristine model is fitted from this package's deterministic
synthetic microscopy corpus (see the fit-niqe CLI subcommand to refit from
any manifest of images).
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy.ndimage import correlate1d
from scipy.special import gamma as gamma_fn

from ..data.degrade import resize_bicubic
from ..data.images import luma

MODEL_FORMAT_VERSION = 1
DEFAULT_PATCH_SIZE = 96

_GAM = np.arange(0.2, 10.0 + 1e-9, 0.001)
_R_GAM = (gamma_fn(2.0 / _GAM) ** 2) / (gamma_fn(1.0 / _GAM) * gamma_fn(3.0 / _GAM))


class NiqeError(Exception):
    pass


@dataclass(frozen=True)
class NiqeModel:
    mu: np.ndarray          # (36,) pristine feature mean
    cov: np.ndarray         # (36, 36) pristine feature covariance
    patch_size: int = DEFAULT_PATCH_SIZE

    def save(self, path) -> None:
        np.savez(path, version=MODEL_FORMAT_VERSION, patch_size=self.patch_size,
                 mu=self.mu, cov=self.cov)

    @classmethod
    def load(cls, path) -> "NiqeModel":
        blob = np.load(path)
        version = int(blob["version"])
        if version != MODEL_FORMAT_VERSION:
            raise NiqeError(f"{path}: model version {version}, "
                            f"this build reads {MODEL_FORMAT_VERSION}")
        return cls(mu=blob["mu"], cov=blob["cov"], patch_size=int(blob["patch_size"]))


def _gaussian_window(half_width: int = 3, sigma: float = 7.0 / 6.0) -> np.ndarray:
    x = np.arange(-half_width, half_width + 1, dtype=np.float64)
    w = np.exp(-0.5 * (x / sigma) ** 2)
    return w / w.sum()


def mscn(image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """MSCN coefficients and the local deviation field of a 2-D image."""
    win = _gaussian_window()
    mu = correlate1d(correlate1d(image, win, 0, mode="nearest"), win, 1, mode="nearest")
    raw_var = correlate1d(correlate1d(image * image, win, 0, mode="nearest"),
                          win, 1, mode="nearest")
    sigma = np.sqrt(np.abs(raw_var - mu * mu))
    return (image - mu) / (sigma + 1.0), sigma


def _aggd_params(vec: np.ndarray) -> tuple[float, float, float]:
    """Asymmetric generalized Gaussian fit: (shape, left scale, right scale)."""
    vec = vec.ravel()
    left = vec[vec < 0]
    right = vec[vec > 0]
    left_std = np.sqrt(np.mean(left ** 2)) if left.size else 0.0
    right_std = np.sqrt(np.mean(right ** 2)) if right.size else 0.0
    if right_std == 0.0 or left_std == 0.0:
        return 10.0, left_std, right_std  # degenerate one-sided sample
    gamma_hat = left_std / right_std
    second = np.mean(vec ** 2)
    if second == 0.0:
        return 10.0, 0.0, 0.0
    r_hat = np.mean(np.abs(vec)) ** 2 / second
    r_hat_norm = (r_hat * (gamma_hat ** 3 + 1) * (gamma_hat + 1)) / (gamma_hat ** 2 + 1) ** 2
    alpha = _GAM[np.argmin((_R_GAM - r_hat_norm) ** 2)]
    conv = np.sqrt(gamma_fn(1.0 / alpha) / gamma_fn(3.0 / alpha))
    return float(alpha), float(left_std * conv), float(right_std * conv)


def _patch_features(patch: np.ndarray) -> np.ndarray:
    feats = []
    alpha, bl, br = _aggd_params(patch)
    feats += [alpha, (bl + br) / 2.0]
    for dy, dx in ((0, 1), (1, 0), (1, 1), (1, -1)):
        product = patch * np.roll(np.roll(patch, dy, axis=0), dx, axis=1)
        alpha, bl, br = _aggd_params(product)
        eta = (br - bl) * (gamma_fn(2.0 / alpha) / gamma_fn(1.0 / alpha))
        feats += [alpha, eta, bl, br]
    return np.array(feats)


def _tile(img: np.ndarray, size: int):
    h, w = img.shape
    for r in range(0, h - size + 1, size):
        for c in range(0, w - size + 1, size):
            yield r, c, img[r:r + size, c:c + size]


def image_features(img: np.ndarray, patch_size: int = DEFAULT_PATCH_SIZE,
                   sharpness_fraction: float | None = None) -> np.ndarray:
    """Per-patch 36-dim feature matrix of an H x W (x C) image in [0,1].

    With ``sharpness_fraction`` only patches whose local-deviation mean
    clears that fraction of the sharpest patch contribute (used when
    fitting the pristine model, not when scoring).
    """
    gray = luma(np.asarray(img, dtype=np.float64)) * 255.0
    h, w = gray.shape
    if h < patch_size or w < patch_size:
        raise NiqeError(f"image {h}x{w} smaller than NIQE patch size {patch_size}")
    half = resize_bicubic(gray, max(1, h // 2), max(1, w // 2))
    scale_feats = []
    keep: np.ndarray | None = None
    for level, (image, size) in enumerate((
        (gray, patch_size), (half, patch_size // 2),
    )):
        coeffs, sigma_field = mscn(image)
        feats = []
        sharpness = []
        for r, c, patch in _tile(coeffs, size):
            feats.append(_patch_features(patch))
            sharpness.append(np.mean(sigma_field[r:r + size, c:c + size]))
        feats = np.nan_to_num(np.array(feats))
        if level == 0 and sharpness_fraction is not None:
            sharpness = np.array(sharpness)
            keep = sharpness > sharpness_fraction * sharpness.max()
        if keep is not None:
            feats = feats[keep[:len(feats)]] if len(keep) >= len(feats) else feats
        scale_feats.append(feats)
    n = min(len(f) for f in scale_feats)
    return np.hstack([f[:n] for f in scale_feats])


def fit_niqe_model(images, patch_size: int = DEFAULT_PATCH_SIZE,
                   sharpness_fraction: float = 0.75) -> NiqeModel:
    """Fit the pristine MVG over sharp patches pooled from corpus images."""
    all_feats = [
        image_features(img, patch_size, sharpness_fraction=sharpness_fraction)
        for img in images
    ]
    feats = np.vstack([f for f in all_feats if len(f)])
    if feats.shape[0] < 2:
        raise NiqeError("pristine corpus yields fewer than 2 usable patches")
    return NiqeModel(mu=feats.mean(axis=0), cov=np.cov(feats.T), patch_size=patch_size)


_default_model_cache: NiqeModel | None = None


def default_niqe_model() -> NiqeModel:
    global _default_model_cache
    if _default_model_cache is None:
        path = resources.files("pathosr.metrics") / "data" / "niqe_pristine.npz"
        with resources.as_file(path) as p:
            _default_model_cache = NiqeModel.load(p)
    return _default_model_cache


def niqe(img: np.ndarray, model: NiqeModel | None = None) -> float:
    """Distance of the image's MSCN-feature distribution from the pristine model."""
    model = model or default_niqe_model()
    feats = image_features(img, model.patch_size)
    sample_mu = feats.mean(axis=0)
    sample_cov = np.cov(feats.T) if feats.shape[0] > 1 else np.zeros_like(model.cov)
    diff = model.mu - sample_mu
    pooled = (model.cov + sample_cov) / 2.0
    value = float(np.sqrt(max(diff @ np.linalg.pinv(pooled) @ diff, 0.0)))
    return value
