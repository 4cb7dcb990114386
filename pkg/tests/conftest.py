import pytest

from divbarrier.closed_form import solve
from divbarrier.goldens import BASE_CONFIG
from divbarrier.params import params_from_config


@pytest.fixture(scope="session")
def base_config():
    return dict(BASE_CONFIG, beta1=1.0, beta2=1.0)


@pytest.fixture(scope="session")
def base_params(base_config):
    return params_from_config(base_config)


@pytest.fixture(scope="session")
def base_sol(base_params):
    return solve(base_params)


@pytest.fixture(scope="session")
def degenerate_sol():
    return solve(params_from_config(dict(BASE_CONFIG, delta=100.0,
                                         beta1=1.0, beta2=1.0)))
