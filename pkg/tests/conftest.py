import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kerrssh.model import ChainConfig
from kerrssh.presets import bistable_config, topological_config, monostable_config

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def chain(n_b=6, omega_b=1.0, omega_a=1.5, kerr_u=0.0, g=1.0, gamma=0.1, kappa=0.1,
          drive_amp=0.0, **kw):
    return ChainConfig(n_b=n_b, omega_b=omega_b, omega_a=omega_a, kerr_u=kerr_u, g=g,
                       gamma=gamma, kappa=kappa, drive_freq=0.0, drive_amp=drive_amp, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def monostable():
    return monostable_config()


@pytest.fixture(scope="session")
def bistable():
    return bistable_config()


@pytest.fixture(scope="session")
def topological():
    return topological_config()


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    if module is None or not module.REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.REPORT:
        terminalreporter.write_line(line)
