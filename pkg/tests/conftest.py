from pathlib import Path

import numpy as np
import pytest

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


def random_mask(rng: np.random.Generator, shape, density=0.4) -> np.ndarray:
    return rng.random(shape) < density


def random_nonempty_mask(rng: np.random.Generator, shape, density=0.4) -> np.ndarray:
    mask = random_mask(rng, shape, density)
    if not mask.any():
        mask[rng.integers(shape[0]), rng.integers(shape[1])] = True
    return mask
