import time

import numpy as np
import pytest

from pendular_lab import harness, model
from pendular_lab.config import load_config

RUNTIMES: dict[str, float] = {}


def _timed(name, fn, *args):
    t0 = time.perf_counter()
    result = fn(*args)
    RUNTIMES[name] = time.perf_counter() - t0
    return result


@pytest.fixture(scope="session")
def go1_cfg():
    return load_config("go1.toml")


@pytest.fixture(scope="session")
def pm_cfg():
    return load_config("pointmass.toml")


@pytest.fixture(scope="session")
def go1_rect(go1_cfg):
    return go1_cfg.rectangle_stance()


@pytest.fixture(scope="session")
def go1_trot(go1_cfg):
    return go1_cfg.trot_stance()


@pytest.fixture(scope="session")
def pm_rect(pm_cfg):
    return pm_cfg.rectangle_stance()


@pytest.fixture(scope="session")
def com27():
    return np.array([0.0, 0.0, 0.27])


@pytest.fixture(scope="session")
def com30():
    return np.array([0.0, 0.0, 0.30])


# session-cached sweep results shared between the harness tests and the
# acceptance suite (each runner is deterministic for a fixed config)

@pytest.fixture(scope="session")
def test_a_result(pm_cfg):
    return _timed("test_a", harness.run_test_a, pm_cfg)


@pytest.fixture(scope="session")
def test_b_result(go1_cfg):
    return _timed("test_b", harness.run_test_b, go1_cfg)


@pytest.fixture(scope="session")
def test_c_result(go1_cfg):
    return _timed("test_c", harness.run_test_c, go1_cfg)


@pytest.fixture(scope="session")
def test_e_result(pm_cfg):
    return _timed("test_e", harness.run_test_e, pm_cfg)


@pytest.fixture(scope="session")
def kink_result(go1_cfg):
    return _timed("kink", harness.run_kink, go1_cfg)


@pytest.fixture(scope="session")
def prefactor_result(go1_cfg):
    return _timed("prefactor", harness.run_prefactor, go1_cfg)


@pytest.fixture(scope="session")
def runtimes():
    return RUNTIMES


def random_feasible_stance(rng: np.random.Generator, n_contacts: int) -> model.StanceConfig:
    """Random flat-ground stance with comfortable friction."""
    pts = rng.uniform(-0.3, 0.3, size=(n_contacts, 2))
    pts -= pts.mean(axis=0)  # center the stance
    mu = float(rng.uniform(0.5, 1.0))
    contacts = tuple(model.Contact((x, y, 0.0), mu) for x, y in pts)
    return model.StanceConfig(contacts, mass=float(rng.uniform(5.0, 20.0)))
