import numpy as np

from pathosr.data.manifest import load_manifest
from pathosr.data.synthetic import (
    TOY_SMEAR, HistologyParams, SmearParams, blood_smear, generate_corpus, histology,
)


def test_blood_smear_contract():
    img, mask = blood_smear(0, TOY_SMEAR)
    assert img.shape == (64, 64, 3)
    assert mask.shape == (64, 64)
    assert img.min() >= 0.0 and img.max() <= 1.0
    assert set(np.unique(mask)) <= {0, 1}


def test_blood_smear_deterministic():
    a, ma = blood_smear(5, TOY_SMEAR)
    b, mb = blood_smear(5, TOY_SMEAR)
    assert np.array_equal(a, b)
    assert np.array_equal(ma, mb)
    c, _ = blood_smear(6, TOY_SMEAR)
    assert not np.array_equal(a, c)


def test_histology_contract():
    img, mask = histology(0, HistologyParams(height=128, width=96))
    assert img.shape == (128, 96, 3)
    assert mask.shape == (128, 96)
    assert mask.any()  # nuclei present


def test_masks_mark_dark_nuclei():
    img, mask = blood_smear(3, SmearParams(height=192, width=192))
    if mask.any():
        from pathosr.data.images import luma
        y = luma(img)
        assert y[mask > 0].mean() < y[mask == 0].mean()


def test_generate_corpus_layout(tmp_path):
    manifest = generate_corpus("toy_smear", count=6, out_dir=tmp_path,
                               base_seed=5, test_fraction=0.34)
    index = load_manifest(manifest, scale=2)
    assert len(index) == 6
    assert len(index.split("test")) == 3  # ceil(6 * 0.34)
    assert len(index.split("train")) == 3
    for record in index.records:
        assert record.hr_path.exists()


def test_wbc_patch_preset():
    from pathosr.data.synthetic import wbc_patch
    img, mask = wbc_patch(4)
    assert img.shape == (256, 256, 3)
    assert mask.any()  # leukocyte nucleus present
    # large enough for the 8x linear workflow and for NIQE
    from pathosr.data.degrade import synthesize_lr
    assert synthesize_lr(img, 8).shape == (32, 32, 3)
