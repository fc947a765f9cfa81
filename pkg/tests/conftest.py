import os
from pathlib import Path

import numpy as np
import pytest

from afb.dataset import PRESETS
from afb.synth import desk_corpus_counts, make_corpus


@pytest.fixture(scope="session")
def desk_root(tmp_path_factory) -> Path:
    """Corpus sized for the desk preset: the real one if AFB_DATA_ROOT is set, else synthetic."""
    env = os.environ.get("AFB_DATA_ROOT")
    if env:
        return Path(env)
    root = tmp_path_factory.mktemp("desk_corpus")
    make_corpus(root, desk_corpus_counts(*PRESETS["desk"]), seed=0)
    return root


@pytest.fixture(scope="session")
def mini_root(tmp_path_factory) -> Path:
    """Six synthetic clips per word; enough for quotas of (2, 50)."""
    root = tmp_path_factory.mktemp("mini_corpus")
    make_corpus(root, 6, seed=7)
    return root


def placeholder_corpus(root: Path, counts: dict[str, int]) -> Path:
    """Empty files named like GSCD clips; split sampling only needs the listing."""
    for word, n in counts.items():
        folder = root / word
        folder.mkdir(parents=True, exist_ok=True)
        for i in range(n):
            (folder / f"{i:08x}_nohash_0.wav").touch()
    return root


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
