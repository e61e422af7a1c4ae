import numpy as np
import pytest

from blockbayes.pipeline import PipelineConfig, extract_directory
from blockbayes.synthetic import make_corpus


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def face_dir(tmp_path_factory):
    """Five synthetic subjects, ten 92x112 images each."""
    root = tmp_path_factory.mktemp("faces")
    make_corpus(root, subjects=5, images=10, seed=0)
    return root


@pytest.fixture(scope="session")
def tiny_dir(tmp_path_factory):
    """Two classes of three small images, cheap enough for CLI round trips."""
    root = tmp_path_factory.mktemp("tiny")
    make_corpus(root, subjects=2, images=3, seed=7)
    return root


@pytest.fixture(scope="session")
def face_table(face_dir):
    return extract_directory(face_dir, PipelineConfig(), jobs=4)
