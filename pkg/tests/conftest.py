import numpy as np
import pytest

from bohmlab.ensemble import calibrate_classifier
from bohmlab.fields import WaveguideModel
from bohmlab.trajectories import IntegratorConfig


@pytest.fixture(scope="session")
def model():
    return WaveguideModel()


@pytest.fixture(scope="session")
def integrator():
    return IntegratorConfig()


@pytest.fixture(scope="session")
def classifier(model, integrator):
    """One shared calibration for every protocol-level test."""
    return calibrate_classifier(model, integrator, 4000, seed=20260401)


@pytest.fixture
def rng():
    return np.random.default_rng(987654321)
