import numpy as np
import pytest
from hypothesis import settings

from layerlab import wavesolver as ws
from layerlab.dispersion import ModelParams

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def params_d1():
    return ModelParams(a=1.0, eps=1e-4, s_plus=(1,))


@pytest.fixture(scope="session")
def wave_d1(params_d1):
    return ws.solve(params_d1, 8, tol=1e-10)


@pytest.fixture(scope="session")
def params_d2():
    return ModelParams(a=1.0, eps=1e-4, s_plus=(1,), s_minus=(2,))


@pytest.fixture(scope="session")
def wave_d2(params_d2):
    return ws.solve(params_d2, 8, tol=1e-10)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
