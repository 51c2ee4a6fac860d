"""Derivatives of slice propagators and assembled fidelity gradients.

Four ways to get ``dX_k/du_j`` for ``X_k = exp(-i dt H_u)``:

* ``exact``: closed form in the eigenbasis of ``H_u`` (divided differences
  of the exponential);
* ``approx``: first-order ``-i dt H_j X_k``, good when ``dt ||H_u|| << 1``;
* ``series``: nested commutators of ``H_u`` with ``H_j``, truncated by a
  term-norm tolerance;
* ``fd``: central finite differences of the exponential.

For non-Hermitian (open-system) generators the first-order form becomes
``-dt B_j X_k``; it is used while ``dt ||A_u||_2 < 0.1`` and finite
differences take over beyond that.
"""
from dataclasses import dataclass

import numpy as np

from .errors import NoConvergenceError
from .linalg import EigDecomp, dag, expm_general, expm_hermitian, hermitian_eig
from .model import TaskKind, sensitivity_kernel

__all__ = [
    "GradientMethod",
    "EXACT",
    "APPROX",
    "divided_difference_weights",
    "exact_slice_derivative",
    "approx_slice_derivative",
    "series_slice_derivative",
    "finite_difference_derivative",
    "slice_propagator",
    "fidelity_gradient",
    "full_fd_gradient",
]

# below this gap (times dt) two eigenvalues are treated as equal
DEGENERACY_TOL = 1e-9
# first-order open-system derivative is trusted below this dt * ||A_u||_2
OPEN_APPROX_LIMIT = 0.1


@dataclass(frozen=True)
class GradientMethod:
    kind: str = "exact"
    order_cap: int = 20
    term_tol: float = 1e-12
    h: float = 1e-6

    def __post_init__(self):
        if self.kind not in ("exact", "approx", "series", "fd", "auto"):
            raise ValueError(f"unknown gradient method {self.kind!r}")
        if self.h <= 0:
            raise ValueError("finite-difference step must be positive")
        if self.order_cap < 0:
            raise ValueError("order cap must be nonnegative")


EXACT = GradientMethod("exact")
APPROX = GradientMethod("approx")


def divided_difference_weights(values, dt):
    """Matrix ``G`` with ``(V^+ dX V)_{lm} = G_{lm} (V^+ H_j V)_{lm}``.

    ``G_{lm} = -i dt exp(-i dt (l_l + l_m)/2) sinc(dt (l_l - l_m)/2)``, which
    is the divided difference of ``exp(-i dt x)`` written without the
    cancellation of the textbook two-branch form. Works on stacks.
    """
    lam_l = values[..., :, None]
    lam_m = values[..., None, :]
    half_gap = 0.5 * dt * (lam_l - lam_m)
    weights = np.exp(-0.5j * dt * (lam_l + lam_m)) * np.sinc(half_gap / np.pi)
    degenerate = np.abs(2.0 * half_gap) < DEGENERACY_TOL
    if np.any(degenerate):
        weights = np.where(degenerate, np.exp(-1j * dt * lam_l), weights)
    return -1j * dt * weights


def exact_slice_derivative(eig, hj, dt):
    """``d exp(-i dt H_u) / du_j`` from the eigendecomposition of ``H_u``."""
    v = eig.vectors
    hj_eig = dag(v) @ hj @ v
    return v @ (divided_difference_weights(eig.values, dt) * hj_eig) @ dag(v)


def approx_slice_derivative(hj, xk, dt):
    return -1j * dt * (hj @ xk)


def series_slice_derivative(hu, hj, dt, order_cap=20, term_tol=1e-12, xk=None):
    """Commutator-series derivative ``sum_n (-i dt)^{n+1}/(n+1)! ad_{H_u}^n(H_j) X_k``.

    ``order_cap=0`` keeps only the leading term and skips the convergence test.

    Raises:
        NoConvergenceError: if ``order_cap`` terms are summed and the last
            one still has Frobenius norm above ``term_tol``.
    """
    if xk is None:
        xk = expm_hermitian(hermitian_eig(hu, check=False), -1j * dt)
    nested = hj
    coeff = -1j * dt
    total = coeff * nested
    if order_cap == 0:
        return total @ xk
    for n in range(1, order_cap + 1):
        nested = hu @ nested - nested @ hu
        coeff = coeff * (-1j * dt) / (n + 1)
        term = coeff * nested
        total = total + term
        if np.linalg.norm(term) < term_tol:
            return total @ xk
    raise NoConvergenceError(
        f"commutator series not converged after {order_cap} terms "
        f"(last term norm {np.linalg.norm(term):.3e})")


def slice_propagator(system, u_slice, dt):
    if system.hermitian_generators:
        return expm_hermitian(hermitian_eig(system.hamiltonian(u_slice), check=False), -1j * dt)
    return expm_general(-dt * system.generator(u_slice))


def finite_difference_derivative(system, controls, j, k, h=1e-6):
    """Central difference of ``X_k`` in control ``j`` (0-based) of slice ``k`` (1-based).

    Cancellation error grows like ``eps / h``; steps much below ``1e-7``
    are not useful in double precision.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    return _fd_row(system, controls.u[k - 1], j, controls.dt, h)


def _fd_row(system, row, j, dt, h):
    plus = np.array(row, dtype=float)
    plus[j] += h
    minus = np.array(row, dtype=float)
    minus[j] -= h
    return (slice_propagator(system, plus, dt) - slice_propagator(system, minus, dt)) / (2 * h)


def _exact_batch(cache, slices, ov):
    """Exact gradients for many slices with five multiplications per slice.

    ``tr(dX W) = sum_j H_j . S^T`` with ``S = V (G o Q^T)^T V^+`` and
    ``Q = V^+ W V``, so the cost does not grow with the number of controls.
    """
    task = cache.task
    rows = np.asarray(slices) - 1
    v = cache.eig_vectors[rows]
    vd = dag(v)
    fwd = np.array([cache.forward(k - 1) for k in slices])
    bwd = np.array([cache.backward(k) for k in slices])
    n = cache.system.dim
    if task.kind is TaskKind.DENSITY_CLOSED:
        kernel = np.array([sensitivity_kernel(task, b, f, ov, x)
                           for b, f, x in zip(bwd, fwd, cache.props[rows])])
        q = vd @ kernel @ v
        cache.n_matmul += 6 * len(rows)
    else:
        q = (vd @ fwd) @ (bwd @ v)
        square = fwd.shape[-1] == n
        cache.n_matmul += (3 if square else 0) * len(rows)
        if task.kind is TaskKind.GATE_PSU:
            q = q * ov.phase_factor
    weights = divided_difference_weights(cache.eig_values[rows], cache.dt)
    s = v @ np.swapaxes(weights * np.swapaxes(q, -1, -2), -1, -2) @ vd
    cache.n_matmul += 2 * len(rows)
    grads = np.einsum("jab,kba->kj", cache._h_controls, s)
    return grads.real / task.norm_c


def _open_derivatives(system, row, xk, dt, method):
    gen = system.generator(row)
    if method.kind == "approx" or (
            method.kind in ("auto", "exact") and dt * np.linalg.norm(gen, 2) < OPEN_APPROX_LIMIT):
        return [-dt * (b @ xk) for b in system.controls]
    return [_fd_row(system, row, j, dt, method.h) for j in range(system.n_controls)]


def _slice_derivatives(cache, k, method):
    system = cache.system
    row = cache.u[k - 1]
    xk = cache.props[k - 1]
    dt = cache.dt
    if not system.hermitian_generators:
        return _open_derivatives(system, row, xk, dt, method)
    if method.kind == "approx":
        return [approx_slice_derivative(h, xk, dt) for h in system.h_controls]
    if method.kind == "series":
        hu = system.hamiltonian(row)
        return [series_slice_derivative(hu, h, dt, method.order_cap, method.term_tol, xk)
                for h in system.h_controls]
    if method.kind == "fd":
        return [_fd_row(system, row, j, dt, method.h) for j in range(system.n_controls)]
    eig = EigDecomp(cache.eig_values[k - 1], cache.eig_vectors[k - 1])
    return [exact_slice_derivative(eig, h, dt) for h in system.h_controls]


def fidelity_gradient(cache, slices, method=EXACT, ov=None):
    """``df/du_j(t_k)`` for every slice label in ``slices``; shape ``(len, m)``.

    ``ov`` is the current overlap (computed if omitted). The cache must be
    refreshed; products it lacks are built on demand.
    """
    cache.refresh()
    slices = [int(k) for k in slices]
    if ov is None:
        ov = cache.fidelity()
    if cache.system.hermitian_generators and method.kind in ("exact", "auto"):
        return _exact_batch(cache, slices, ov)
    task = cache.task
    out = np.empty((len(slices), cache.system.n_controls))
    for i, k in enumerate(slices):
        kernel = sensitivity_kernel(task, cache.backward(k), cache.forward(k - 1), ov,
                                    cache.props[k - 1])
        for j, dx in enumerate(_slice_derivatives(cache, k, method)):
            out[i, j] = np.real(np.sum(dx * kernel.T)) / task.norm_c
    return out


def full_fd_gradient(system, task, controls, h=1e-6):
    """Central differences of the whole fidelity; an oracle for tests."""
    from .propagation import PropagationCache

    base = controls.copy()
    out = np.empty_like(base.u)
    for k in range(base.n_slices):
        for j in range(base.n_controls):
            vals = []
            for sign in (1.0, -1.0):
                trial = base.copy()
                trial.u[k, j] += sign * h
                vals.append(PropagationCache(system, task, trial).fidelity().f)
            out[k, j] = (vals[0] - vals[1]) / (2 * h)
    return out

