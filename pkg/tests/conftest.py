"""Shared fixtures.

Closed-loop runs are the expensive part of this suite, so the reference
runs are session scoped and shared by the module tests; acceptance tests
that carry their own runtime budget do their timed work locally.
"""

import numpy as np
import pytest

from quadlev.config import default_config
from quadlev.control import build_stack
from quadlev.sim import run


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture(scope="session")
def stack(cfg):
    return build_stack(cfg.params, cfg.actuators, cfg.constants)


@pytest.fixture(scope="session")
def setting1_run(cfg, stack):
    scenario = cfg.scenario("setting1")
    return run(scenario, stack, cfg.actuators, cfg.constants, cfg.guards)


@pytest.fixture(scope="session")
def setting1_run_no_pd(cfg, stack):
    scenario = cfg.scenario("setting1", pd_enabled=False)
    return run(scenario, stack, cfg.actuators, cfg.constants, cfg.guards)


@pytest.fixture(scope="session")
def level4mm_run(cfg, stack):
    scenario = cfg.scenario("level4mm")
    return run(scenario, stack, cfg.actuators, cfg.constants, cfg.guards)


@pytest.fixture
def rng():
    return np.random.default_rng(20260814)
