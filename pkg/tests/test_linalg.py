import numpy as np
import pytest
import scipy.linalg

from qoptbench.errors import NonHermitianError, ShapeError
from qoptbench.linalg import (
    PAULI,
    angular_momentum,
    dag,
    devectorize,
    expm_general,
    expm_hermitian,
    haar_unitary,
    hermitian_eig,
    is_unitary,
    kron,
    kron_all,
    vectorize,
)

from conftest import random_hermitian


@pytest.mark.parametrize("n", [1, 2, 7, 16])
def test_eig_reconstructs(rng, n):
    h = random_hermitian(rng, n)
    eig = hermitian_eig(h)
    assert np.all(np.diff(eig.values) >= 0)
    assert np.allclose(dag(eig.vectors) @ eig.vectors, np.eye(n), atol=1e-12)
    assert np.linalg.norm(eig.reconstruct() - h) <= 1e-10 * np.linalg.norm(h)


def test_eig_rejects_non_hermitian():
    with pytest.raises(NonHermitianError):
        hermitian_eig(np.array([[0, 1], [0, 0]], dtype=complex))


def test_eig_rejects_non_square():
    with pytest.raises(ShapeError):
        hermitian_eig(np.zeros((2, 3)))


def test_expm_hermitian_is_unitary_and_matches_oracle(rng):
    h = random_hermitian(rng, 6)
    u = expm_hermitian(hermitian_eig(h), -0.7j)
    assert is_unitary(u, 1e-12)
    assert np.allclose(u, scipy.linalg.expm(-0.7j * h), atol=1e-12)


def test_expm_pauli_closed_form():
    t = 0.37
    u = expm_hermitian(hermitian_eig(PAULI["x"]), -1j * t)
    expected = np.cos(t) * np.eye(2) - 1j * np.sin(t) * PAULI["x"]
    assert np.allclose(u, expected, atol=1e-14)


@pytest.mark.parametrize("scale", [1e-3, 0.1, 1.0, 5.0, 40.0])
def test_expm_general_matches_scipy(rng, scale):
    # non-normal input exercises every Pade order and the squaring phase
    a = scale * (rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))) / 3
    ref = scipy.linalg.expm(a)
    assert np.linalg.norm(expm_general(a) - ref) <= 1e-12 * max(1.0, np.linalg.norm(ref))


def test_expm_general_nilpotent():
    n = np.array([[0, 1], [0, 0]], dtype=complex)
    assert np.allclose(expm_general(n), np.eye(2) + n, atol=1e-15)


def test_expm_general_taylor_oracle(rng):
    a = 0.05 * rng.standard_normal((4, 4))
    term = np.eye(4)
    total = np.eye(4)
    for k in range(1, 30):
        term = term @ a / k
        total = total + term
    assert np.allclose(expm_general(a), total, atol=1e-15)


def test_kron_shapes():
    assert kron_all(PAULI["x"], PAULI["i"], PAULI["z"]).shape == (8, 8)
    assert np.array_equal(kron(PAULI["x"], PAULI["z"]), np.kron(PAULI["x"], PAULI["z"]))


@pytest.mark.parametrize("n", [1, 2, 5, 13])
def test_haar_unitary_is_unitary(n):
    u = haar_unitary(n, np.random.default_rng(n))
    assert is_unitary(u, 1e-12)


def test_haar_phases_are_uniform():
    # with the R-diagonal phase fix, the mean of U_00 vanishes and E|U_00|^2 = 1/n
    rng = np.random.default_rng(7)
    samples = np.array([haar_unitary(3, rng)[0, 0] for _ in range(4000)])
    assert abs(samples.mean()) < 0.03
    assert abs(np.mean(np.abs(samples) ** 2) - 1 / 3) < 0.02


def test_haar_reproducible():
    a = haar_unitary(4, np.random.default_rng(5))
    b = haar_unitary(4, np.random.default_rng(5))
    assert np.array_equal(a, b)


@pytest.mark.parametrize("j", [0.5, 1, 1.5, 3, 6])
def test_angular_momentum_algebra(j):
    s = angular_momentum(j)
    assert s.dim == int(2 * j + 1)
    comm = s.jx @ s.jy - s.jy @ s.jx
    assert np.allclose(comm, 1j * s.jz, atol=1e-12)
    casimir = s.jx @ s.jx + s.jy @ s.jy + s.jz @ s.jz
    assert np.allclose(casimir, j * (j + 1) * np.eye(s.dim), atol=1e-12)


def test_spin_half_is_half_pauli():
    s = angular_momentum(0.5)
    assert np.allclose(s.jx, PAULI["x"] / 2)
    assert np.allclose(s.jy, PAULI["y"] / 2)
    assert np.allclose(s.jz, PAULI["z"] / 2)


def test_angular_momentum_rejects_bad_spin():
    with pytest.raises(ValueError):
        angular_momentum(0.3)


def test_vec_convention(rng):
    a, b, rho = (rng.standard_normal((3, 3)) + 0j for _ in range(3))
    lhs = vectorize(a @ rho @ b)
    rhs = np.kron(b.T, a) @ vectorize(rho)
    assert np.allclose(lhs, rhs)
    assert vectorize(np.array([[1, 2], [3, 4]])).ravel().tolist() == [1, 3, 2, 4]
    assert np.array_equal(devectorize(vectorize(rho)), rho)


def test_pauli_x_eigensystem():
    eig = hermitian_eig(PAULI["x"])
    assert np.allclose(eig.values, [-1, 1])
    minus, plus = eig.vectors[:, 0], eig.vectors[:, 1]
    assert abs(np.vdot(minus, [1, -1]) / np.sqrt(2)) == pytest.approx(1.0)
    assert abs(np.vdot(plus, [1, 1]) / np.sqrt(2)) == pytest.approx(1.0)


def test_diagonal_input_sorts_with_permutation():
    eig = hermitian_eig(np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(eig.values, [1, 2, 3])
    assert np.allclose(np.abs(eig.vectors), [[0, 0, 1], [1, 0, 0], [0, 1, 0]])


def test_quarter_turn_and_zero_scale():
    eig = hermitian_eig(PAULI["x"])
    assert np.allclose(expm_hermitian(eig, -0.5j * np.pi), -1j * PAULI["x"], atol=1e-15)
    assert np.allclose(expm_hermitian(eig, 0.0), np.eye(2))


def test_hermitian_and_general_exponentials_agree(rng):
    h = random_hermitian(rng, 9)
    assert np.allclose(expm_hermitian(hermitian_eig(h), -0.3j), expm_general(-0.3j * h), atol=1e-10)


def test_expm_of_zero():
    assert np.array_equal(expm_general(np.zeros((3, 3))), np.eye(3))


def test_kron_identities(rng):
    assert np.allclose(kron(PAULI["z"], PAULI["z"]), np.diag([1, -1, -1, 1]))
    a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    block = kron(np.eye(2), a)
    assert np.allclose(block[:2, :2], a) and np.allclose(block[2:, 2:], a)
    assert np.allclose(block[:2, 2:], 0)
    assert np.trace(kron(a.conj(), a)) == pytest.approx(abs(np.trace(a)) ** 2)


def test_haar_eigenphases_uniform():
    from scipy.stats import chisquare

    rng = np.random.default_rng(2024)
    phases = np.concatenate([np.angle(np.linalg.eigvals(haar_unitary(4, rng))) for _ in range(1000)])
    counts, _ = np.histogram(phases, bins=16, range=(-np.pi, np.pi))
    assert chisquare(counts).pvalue > 0.01


def test_spin_six_dimension():
    assert angular_momentum(6).dim == 13
