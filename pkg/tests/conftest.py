import numpy as np
import pytest

from posobs import models, synth

# Published Example-1 design values used as a standing regression point.
PUB_P = np.array([0.3655, 1.1736])
PUB_Q = np.array([0.4056, 0.9079])
PUB_L = np.array([[0.9037], [0.0]])
PUB_LAMBDA = 2.6341


@pytest.fixture(scope="session")
def example1_system():
    return models.example1()


@pytest.fixture(scope="session")
def tank_system():
    return models.tank_linearize(models.three_tank_benchmark()).to_system()


@pytest.fixture(scope="session")
def published_design():
    w = PUB_Q[:, None] * PUB_L
    return synth.ObserverDesign(
        L=PUB_L,
        P_diag=PUB_P,
        Q_diag=PUB_Q,
        W=w,
        lam=PUB_LAMBDA,
        lmi_margin=-0.0332,
        elementwise_margin=0.0,
    )
