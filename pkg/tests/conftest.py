import numpy as np
import pytest

from hiertomo.config import default_config
from hiertomo.geometry import build_beams, build_mesh, build_sensitivity
from hiertomo.phantom import PhantomParams
from hiertomo.pinv import pseudo_inverse
from hiertomo.spectroscopy import TransitionLine


@pytest.fixture(scope="session")
def config():
    return default_config()


@pytest.fixture(scope="session")
def mesh():
    return build_mesh()


@pytest.fixture(scope="session")
def beams():
    return build_beams()


@pytest.fixture(scope="session")
def sensitivity(beams, mesh):
    return build_sensitivity(beams, mesh)


@pytest.fixture(scope="session")
def lines(config):
    return tuple(TransitionLine.from_config(c) for c in config["lines"])


@pytest.fixture(scope="session")
def params():
    return PhantomParams()


@pytest.fixture(scope="session")
def pinv(sensitivity):
    return pseudo_inverse(sensitivity.roi)
