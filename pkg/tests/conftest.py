import numpy as np
import pytest

from rotaensemble.models import StateVector, state_layout
from rotaensemble.parameters import ParamVector
from rotaensemble.structure import default_age_structure

# Posterior means the original surveillance fits settled on (b, phi, r,
# rho); used as realistic operating points for dynamics tests.
FITTED_SCALARS = {
    "A": (0.50, 7.4, 1.5, 0.039),
    "B": (0.41, 7.4, 2.6, 0.096),
    "C": (0.42, 7.4, 2.5, 0.097),
    "D": (0.30, 7.2, 2.7, 0.098),
    "E": (0.32, 7.1, 2.6, 0.109),
}


def fitted_params(model_id: str, beta0: float = 20.0) -> ParamVector:
    b, phi, r, rho = FITTED_SCALARS[model_id]
    return ParamVector(b=b, phi=phi, r=r, rho=rho,
                       beta0=np.full(6, float(beta0)))


def random_state(model_id: str, rng, lo=0.01, hi=5.0,
                 vaccinated=False) -> StateVector:
    layout = state_layout(model_id, vaccinated=vaccinated)
    return StateVector(layout, rng.uniform(lo, hi, layout.n_state))


@pytest.fixture
def ages():
    return default_age_structure()


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)
