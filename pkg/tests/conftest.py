import numpy as np
import pytest

from condgen.env import CondGenEnv, ControlSpec
from condgen.grids import make_domain


@pytest.fixture
def binary():
    return make_domain("binary")


@pytest.fixture
def zelda():
    return make_domain("zelda")


@pytest.fixture
def sokoban():
    return make_domain("sokoban")


@pytest.fixture
def small_binary():
    return make_domain("binary", (6, 6))


@pytest.fixture
def regions_env(small_binary):
    control = ControlSpec(small_binary, controlled=("regions",), bounds={"regions": (1, 8)})
    return CondGenEnv(small_binary, control)


def random_cells(rng: np.random.Generator, height: int, width: int, n_tiles: int) -> np.ndarray:
    return rng.integers(0, n_tiles, size=(height, width), dtype=np.int8)
