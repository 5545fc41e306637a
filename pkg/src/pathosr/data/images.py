"""Image IO: float rasters in [0,1], masks as binary arrays.

Images are H x W x C float64 arrays with C in {1, 3}; masks are H x W uint8
arrays with values in {0, 1}.  8-bit sources are divided by 255, 16-bit by
65535, so an encode/decode round trip stays within one quantization step.
"""

from __future__ import annotations

import numpy as np
from PIL import Image as PILImage

BT601_WEIGHTS = np.array([0.299, 0.587, 0.114])


class ImageIOError(Exception):
    pass


def load_image(path) -> np.ndarray:
    """Load PNG/TIFF/JPEG into an H x W x C float array in [0,1]."""
    try:
        with PILImage.open(path) as im:
            im.load()
            if im.mode in ("I;16", "I;16B", "I;16L", "I"):
                arr = np.asarray(im, dtype=np.float64) / 65535.0
            elif im.mode in ("L", "RGB"):
                arr = np.asarray(im, dtype=np.float64) / 255.0
            else:
                arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    except (OSError, SyntaxError) as exc:
        raise ImageIOError(f"cannot read image {path}: {exc}") from exc
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return np.clip(arr, 0.0, 1.0)


def save_image(img: np.ndarray, path) -> None:
    """Write a [0,1] float image as 8-bit PNG/TIFF/JPEG (by extension)."""
    arr = np.clip(np.asarray(img), 0.0, 1.0)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    data = np.round(arr * 255.0).astype(np.uint8)
    PILImage.fromarray(data).save(path)


def load_mask(path) -> np.ndarray:
    """Load a single-channel mask image; nonzero pixels mark ROI."""
    try:
        with PILImage.open(path) as im:
            arr = np.asarray(im.convert("L"))
    except (OSError, SyntaxError) as exc:
        raise ImageIOError(f"cannot read mask {path}: {exc}") from exc
    return (arr > 0).astype(np.uint8)


def save_mask(mask: np.ndarray, path) -> None:
    PILImage.fromarray((np.asarray(mask) > 0).astype(np.uint8) * 255).save(path)


def luma(img: np.ndarray) -> np.ndarray:
    """BT.601 luma of an H x W x C image (C=1 passes through)."""
    img = np.asarray(img)
    if img.ndim == 2:
        return img
    if img.shape[2] == 1:
        return img[:, :, 0]
    return img @ BT601_WEIGHTS


def validate_image(img: np.ndarray) -> None:
    """Raise on shape or range violations of the [0,1] raster contract."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ValueError(f"expected H x W x C with C in {{1,3}}, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"degenerate image shape {img.shape}")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("pixel values outside [0,1]")
