import numpy as np
import pytest

from oovqe.integrals import OrbitalPartition
from oovqe.models import CROSSING3, CROSSING3_DEGENERACY
from oovqe.savqe import EnsembleConfig


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(2024)


@pytest.fixture(scope="session")
def model():
    return CROSSING3


@pytest.fixture(scope="session")
def degeneracy_point():
    return np.array(CROSSING3_DEGENERACY)


@pytest.fixture(scope="session")
def cas22():
    return OrbitalPartition.cas(3, 1, 2)


@pytest.fixture(scope="session")
def cas43():
    return OrbitalPartition.cas(3, 0, 3)


@pytest.fixture(scope="session")
def config():
    return EnsembleConfig()


def random_symmetric(rng, n):
    h = rng.normal(size=(n, n))
    return 0.5 * (h + h.T)


def random_eightfold(rng, n, scale=0.3):
    g = rng.normal(size=(n,) * 4, scale=scale)
    g = g + g.transpose(1, 0, 2, 3)
    g = g + g.transpose(0, 1, 3, 2)
    g = g + g.transpose(2, 3, 0, 1)
    return 0.25 * g


@pytest.fixture(scope="session")
def converged_cas22(model, degeneracy_point, cas22, config):
    """One shared converged SA-OO-VQE result at a generic CAS(2,2) point."""
    from oovqe.savqe import run_sa_oo_vqe
    point = degeneracy_point + np.array([0.18, 0.22])
    ints = model.integral_set(point, cas22)
    result = run_sa_oo_vqe(ints, config)
    assert result.converged
    return point, result


@pytest.fixture(scope="session")
def converged_cas43(model, degeneracy_point, cas43, config):
    from oovqe.savqe import run_sa_oo_vqe
    point = degeneracy_point + np.array([0.18, 0.22])
    ints = model.integral_set(point, cas43)
    result = run_sa_oo_vqe(ints, config)
    assert result.converged
    return point, result
