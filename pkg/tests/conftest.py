import pytest

from hedgehog_lab.arithmetic import golden_mean
from hedgehog_lab.circle import arnold, translation, tune_parameter


@pytest.fixture(scope="session")
def golden():
    return golden_mean()


@pytest.fixture(scope="session")
def rigid(golden):
    return translation(float(golden))


@pytest.fixture(scope="session")
def arnold_001(golden):
    """Golden-tuned Arnold lift, eps = 0.001, rho certified to 1e-12."""
    return tune_parameter(lambda w: arnold(w, 0.001), golden, 1e-12)


@pytest.fixture(scope="session")
def arnold_05(golden):
    return tune_parameter(lambda w: arnold(w, 0.05), golden, 1e-9)
