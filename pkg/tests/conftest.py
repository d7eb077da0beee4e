import numpy as np
import pytest

from physmorph.config import SimulationOptions
from physmorph.optimization import Scene
from physmorph.utils.parallel import set_num_threads
from tests.utils import MICRO_CONFIG, SPHERE_TO_BOX_CONFIG, config_from_file

# General Fixtures


@pytest.fixture(autouse=True, scope="function")
def single_worker():
    set_num_threads(1)
    yield
    set_num_threads(1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# Configs and scenes


@pytest.fixture
def micro_config(tmp_path):
    return config_from_file(MICRO_CONFIG, str(tmp_path / "run"))


@pytest.fixture
def micro_scene(micro_config):
    return Scene.from_config(micro_config)


@pytest.fixture
def desk_config(tmp_path):
    return config_from_file(SPHERE_TO_BOX_CONFIG, str(tmp_path / "desk"))


@pytest.fixture
def lattice_params():
    return SimulationOptions(grid_resolution=8, dx=1.0, steps=3)
