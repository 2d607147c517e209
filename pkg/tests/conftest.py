import numpy as np
import pytest

from longtail.data import data_path
from longtail.preprocess import Lexicon, load_contractions


@pytest.fixture(scope="session")
def bundled_lexicon():
    return Lexicon.load(data_path("lexicon.txt"))


@pytest.fixture(scope="session")
def bundled_contractions():
    return load_contractions(data_path("contractions.txt"))


@pytest.fixture
def rng_np():
    return np.random.default_rng(20240214)
