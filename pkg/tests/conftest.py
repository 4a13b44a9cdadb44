import numpy as np
import pytest

from parakern import coeffs


@pytest.fixture
def identity1():
    return coeffs.identity_field(1)


@pytest.fixture
def identity2():
    return coeffs.identity_field(2)


@pytest.fixture
def smooth1():
    # a(t) = 1 + 0.5 sin t
    return coeffs.smooth_periodic_field([[1.0]], [[0.5]])


@pytest.fixture
def piecewise1():
    # a = 2 for t < 0, a = 1/2 for t >= 0
    return coeffs.piecewise_field([0.0], [[[2.0]], [[0.5]]], lam=0.5)


@pytest.fixture
def random2():
    return coeffs.random_piecewise_field(2, 0.5, seed=7)


def all_kinds(n=1, seed=3):
    fields = [
        coeffs.identity_field(n),
        coeffs.smooth_periodic_field(np.eye(n), 0.4 * np.eye(n)),
        coeffs.piecewise_field([-0.7, 0.9], [np.eye(n) * 2.0, np.eye(n) * 0.6,
                                             np.eye(n) * 1.4], lam=0.5),
        coeffs.random_piecewise_field(n, 0.5, seed=seed),
    ]
    return fields
