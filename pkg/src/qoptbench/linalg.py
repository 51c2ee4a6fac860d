"""Dense complex matrix primitives.

All matrices are plain ``numpy.ndarray`` objects with ``complex128`` entries
in numpy's default (row-major) storage. The vec convention is column
stacking, so that ``vec(A @ rho @ B) == kron(B.T, A) @ vec(rho)``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import NoConvergenceError, NonHermitianError, ShapeError

__all__ = [
    "EigDecomp",
    "SpinOps",
    "dag",
    "hermitian_eig",
    "expm_hermitian",
    "expm_general",
    "kron",
    "kron_all",
    "haar_unitary",
    "angular_momentum",
    "vectorize",
    "devectorize",
    "is_unitary",
    "PAULI",
]

PAULI = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def dag(a):
    """Conjugate transpose (works on stacks of matrices too)."""
    return np.conj(np.swapaxes(a, -1, -2))


@dataclass(frozen=True)
class EigDecomp:
    """Eigendecomposition ``H = V diag(values) V^dagger`` of a Hermitian matrix.

    ``values`` are ascending; the columns of ``vectors`` are orthonormal.
    """

    values: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self):
        return self.values.shape[-1]

    def reconstruct(self):
        return (self.vectors * self.values[..., None, :]) @ dag(self.vectors)


@dataclass(frozen=True)
class SpinOps:
    j: float
    jx: np.ndarray
    jy: np.ndarray
    jz: np.ndarray

    @property
    def dim(self):
        return self.jz.shape[0]


def _check_square(m, name="matrix"):
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {m.shape}")


def hermitian_eig(h, *, check=True):
    """Eigendecomposition of a Hermitian matrix.

    Backed by LAPACK's divide-and-conquer Hermitian solver, which is
    deterministic for a given input on one platform.

    Args:
        h: square Hermitian matrix.
        check: verify ``max|H - H^dagger| < 1e-10 max|H|`` before solving.

    Raises:
        NonHermitianError: if the Hermiticity check fails.
        NoConvergenceError: if LAPACK reports non-convergence.
    """
    h = np.asarray(h, dtype=complex)
    _check_square(h, "H")
    if check:
        scale = np.max(np.abs(h)) if h.size else 0.0
        if np.max(np.abs(h - h.conj().T), initial=0.0) > 1e-10 * max(scale, 1e-300):
            raise NonHermitianError("input matrix is not Hermitian")
    try:
        values, vectors = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise NoConvergenceError(str(exc)) from exc
    return EigDecomp(values, vectors)


def expm_hermitian(eig, scale):
    """Return ``V diag(exp(scale * lambda)) V^dagger``.

    For purely imaginary ``scale`` the result is unitary.
    """
    phases = np.exp(scale * eig.values)
    if not np.all(np.isfinite(phases)):
        raise OverflowError("exponential of eigenvalues overflowed")
    return (eig.vectors * phases[..., None, :]) @ dag(eig.vectors)


# Higham (2005), "The scaling and squaring method for the matrix exponential
# revisited": Pade coefficients and backward-error thresholds theta_m.
_PADE_COEFFS = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
         16380.0, 182.0, 1.0),
}
_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}


def _pade_uv(a, m):
    n = a.shape[0]
    b = _PADE_COEFFS[m]
    ident = np.eye(n, dtype=a.dtype)
    a2 = a @ a
    if m == 13:
        a4 = a2 @ a2
        a6 = a2 @ a4
        u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
                 + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
        v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
             + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident)
        return u, v
    powers = [ident, a2]
    for _ in range(2, (m + 1) // 2):
        powers.append(powers[-1] @ a2)
    u = sum(b[2 * i + 1] * powers[i] for i in range((m + 1) // 2))
    v = sum(b[2 * i] * powers[i] for i in range((m + 1) // 2))
    return a @ u, v


def expm_general(m):
    """Matrix exponential by scaling and squaring with diagonal Pade approximants.

    Works for arbitrary (including non-normal) square matrices, which is what
    open-system generators need.
    """
    a = np.asarray(m)
    _check_square(a, "M")
    a = a.astype(complex if np.iscomplexobj(a) else float)
    if a.shape[0] == 0:
        return a.copy()
    norm1 = np.max(np.sum(np.abs(a), axis=0))
    if not np.isfinite(norm1):
        raise OverflowError("matrix has non-finite entries")
    squarings = 0
    for order in (3, 5, 7, 9):
        if norm1 <= _THETA[order]:
            break
    else:
        order = 13
        if norm1 > _THETA[13]:
            squarings = max(0, int(np.ceil(np.log2(norm1 / _THETA[13]))))
            a = a / 2.0**squarings
    u, v = _pade_uv(a, order)
    result = np.linalg.solve(v - u, v + u)
    for _ in range(squarings):
        result = result @ result
    if not np.all(np.isfinite(result)):
        raise OverflowError("matrix exponential overflowed")
    return result


def kron(a, b):
    return np.kron(a, b)


def kron_all(*mats):
    out = np.ones((1, 1), dtype=complex)
    for mat in mats:
        out = np.kron(out, mat)
    return out


def haar_unitary(n, rng):
    """Draw an ``n x n`` unitary from the Haar measure.

    QR-decomposes a complex Ginibre matrix and fixes the phases of the
    diagonal of R (Mezzadri's construction), which is required for the
    result to be Haar distributed rather than merely unitary.
    """
    if n < 1:
        raise ShapeError("dimension must be at least 1")
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    phases = d / np.abs(d)
    return q * phases


def angular_momentum(j):
    """Spin-j angular momentum operators built from the ladder operators."""
    two_j = 2 * j
    if two_j < 0 or abs(two_j - round(two_j)) > 1e-12:
        raise ValueError(f"invalid spin j={j}: 2j must be a nonnegative integer")
    two_j = int(round(two_j))
    j = two_j / 2.0
    m = j - np.arange(two_j + 1)
    jz = np.diag(m).astype(complex)
    # <m+1|J+|m> = sqrt(j(j+1) - m(m+1)), basis ordered m = j, j-1, ..., -j
    coeffs = np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1))
    jp = np.diag(coeffs, k=1).astype(complex)
    jm = jp.conj().T
    jx = (jp + jm) / 2
    jy = (jp - jm) / 2j
    return SpinOps(j, jx, jy, jz)


def vectorize(m):
    """Column-stacking vec: ``[[a, b], [c, d]] -> (a, c, b, d)`` as an ``(n*m, 1)`` column."""
    m = np.asarray(m)
    if m.ndim != 2:
        raise ShapeError("vectorize expects a 2-d matrix")
    return m.reshape(-1, 1, order="F")


def devectorize(v, shape=None):
    v = np.asarray(v).reshape(-1)
    if shape is None:
        n = int(round(np.sqrt(v.size)))
        if n * n != v.size:
            raise ShapeError(f"length {v.size} is not a perfect square")
        shape = (n, n)
    if shape[0] * shape[1] != v.size:
        raise ShapeError(f"cannot reshape length {v.size} into {shape}")
    return v.reshape(shape, order="F")


def is_unitary(u, atol=1e-12):
    u = np.asarray(u)
    return np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])) < atol
