import numpy as np
import pytest

from qoptbench.linalg import PAULI, kron
from qoptbench.model import BilinearSystem


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_hermitian(rng, n, scale=1.0):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (a + a.conj().T) / 2


@pytest.fixture
def two_qubit_system():
    x, y, z, i = (PAULI[k] for k in "xyzi")
    drift = 0.5 * kron(z, z)
    controls = [0.5 * kron(x, i), 0.5 * kron(y, i), 0.5 * kron(i, x), 0.5 * kron(i, y)]
    return BilinearSystem.from_hamiltonians(drift, controls)
