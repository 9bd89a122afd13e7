import math

import pytest

from floqelim._backend import BACKENDS
from floqelim.model import LatticeConfig


@pytest.fixture(params=sorted(BACKENDS))
def backend(request):
    return request.param


def driven(n_sites=4, omega_over_delta=0.7, kappa0=0.03, dkappa0=0.0, dkappa1=0.02, gauge=0.0):
    period = 2 * math.pi / (omega_over_delta * 4 * kappa0)
    return LatticeConfig(n_sites, kappa0, dkappa0, dkappa1, period=period, gauge=gauge)
