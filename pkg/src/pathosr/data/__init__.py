from .images import load_image, save_image, load_mask, save_mask, luma
from .degrade import synthesize_lr, resize_bicubic, upsample_nearest, upsample_bicubic
from .manifest import DatasetIndex, SampleRecord, load_manifest, ManifestError
from .roi import RoiPatchPair, propose_windows, propose_roi_patches
from .batches import SamplePair, Batcher

__all__ = [
    "load_image", "save_image", "load_mask", "save_mask", "luma",
    "synthesize_lr", "resize_bicubic", "upsample_nearest", "upsample_bicubic",
    "DatasetIndex", "SampleRecord", "load_manifest", "ManifestError",
    "RoiPatchPair", "propose_windows", "propose_roi_patches",
    "SamplePair", "Batcher",
]
