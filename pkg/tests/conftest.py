"""Shared test helpers: random states/unitaries and small oracles."""

import numpy as np
import pytest

from qbdissim.qcore import DensityMatrix, dagger


def random_density(rng, dim, basis_dims=()):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ dagger(a)
    rho /= np.trace(rho).real
    return DensityMatrix(rho, basis_dims)


def random_unitary(rng, dim):
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (a + dagger(a))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
