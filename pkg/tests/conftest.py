import numpy as np
import pytest

from pathosr.data.synthetic import TOY_SMEAR, blood_smear, generate_corpus


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def toy_image():
    """One deterministic 64x64 microscopy-like image plus its nucleus mask."""
    return blood_smear(seed=11, params=TOY_SMEAR)


@pytest.fixture(scope="session")
def toy_corpus(tmp_path_factory):
    """10-image toy corpus on disk: 8 train / 2 test, 64x64, with masks."""
    root = tmp_path_factory.mktemp("toy_corpus")
    manifest = generate_corpus("toy_smear", count=10, out_dir=root,
                               base_seed=100, test_fraction=0.2)
    return manifest
