"""Problem statement layer: bilinear systems, controls, tasks and fidelities.

A bilinear control system evolves as ``dX/dt = -(A + sum_j u_j B_j) X`` and
every task shares the same discretised pipeline: slice propagators
``X_k = exp(-dt A_u(t_k))``, forward products ``X_{k:0} = X_k ... X_1 X_0``
and backward products ``Lambda_k = X_target^dagger X_M ... X_{k+1}``.
Only the boundary conditions, the normalisation and the way the overlap is
turned into a figure of merit differ between tasks.
"""
import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import BoundsError, DegeneratePhaseWarning, NonHermitianError, ShapeError
from .linalg import dag, kron, vectorize

__all__ = [
    "Representation",
    "TaskKind",
    "BilinearSystem",
    "ControlSequence",
    "TaskSpec",
    "OverlapResult",
    "LindbladSpec",
    "build_boundary",
    "build_liouvillian",
    "commutator_superop",
    "lift_unitary",
    "overlap",
    "sensitivity_kernel",
    "slice_fidelity_gradient",
]


class Representation(str, enum.Enum):
    HILBERT_UNITARY = "hilbert-unitary"
    HILBERT_STATE = "hilbert-state"
    LIOUVILLE_CLOSED = "liouville-closed"
    LIOUVILLE_OPEN = "liouville-open"


class TaskKind(str, enum.Enum):
    GATE_PSU = "gate-psu"            # gate up to a global phase
    GATE_SU = "gate-su"              # gate with fixed global phase
    PURE_STATE = "pure-state"
    DENSITY_CLOSED = "density-closed"
    MAP_OPEN = "map-open"
    STATE_OPEN = "state-open"

    @property
    def is_vector(self):
        return self in (TaskKind.PURE_STATE, TaskKind.STATE_OPEN)


def _as_matrix(m, name):
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"{name} must be a square matrix, got shape {m.shape}")
    return m


@dataclass(frozen=True, eq=False)
class BilinearSystem:
    """Drift generator ``A`` and control generators ``B_j``.

    When ``hermitian_generators`` is set, ``A = i H_d`` and ``B_j = i H_j``
    with Hermitian ``H``; the Hamiltonians are then available as
    ``h_drift``/``h_controls`` and slice propagators are computed from a
    Hermitian eigendecomposition.
    """

    drift: np.ndarray
    controls: tuple
    representation: Representation = Representation.HILBERT_UNITARY
    hermitian_generators: bool = None
    h_drift: np.ndarray = field(init=False, repr=False, default=None)
    h_controls: tuple = field(init=False, repr=False, default=None)

    def __post_init__(self):
        drift = _as_matrix(self.drift, "drift")
        controls = tuple(_as_matrix(b, f"control {j}") for j, b in enumerate(self.controls))
        n = drift.shape[0]
        for j, b in enumerate(controls):
            if b.shape != (n, n):
                raise ShapeError(f"control {j} has shape {b.shape}, expected {(n, n)}")
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "controls", controls)
        object.__setattr__(self, "representation", Representation(self.representation))

        h_drift = -1j * drift
        h_controls = tuple(-1j * b for b in controls)
        herm = all(_is_hermitian(h) for h in (h_drift,) + h_controls)
        if self.hermitian_generators is None:
            object.__setattr__(self, "hermitian_generators", herm)
        elif self.hermitian_generators and not herm:
            raise NonHermitianError("generators flagged Hermitian but -iA or -iB_j is not Hermitian")
        if self.hermitian_generators:
            # symmetrise so that eigendecompositions see exactly Hermitian input
            object.__setattr__(self, "h_drift", 0.5 * (h_drift + dag(h_drift)))
            object.__setattr__(self, "h_controls",
                               tuple(0.5 * (h + dag(h)) for h in h_controls))
        for mat in (drift,) + controls:
            mat.setflags(write=False)

    @classmethod
    def from_hamiltonians(cls, h_drift, h_controls, representation=Representation.HILBERT_UNITARY):
        """Closed system ``dX/dt = -i (H_d + sum_j u_j H_j) X``."""
        h_drift = _as_matrix(h_drift, "drift Hamiltonian")
        return cls(1j * h_drift, tuple(1j * _as_matrix(h, "control") for h in h_controls),
                   representation, True)

    @property
    def dim(self):
        return self.drift.shape[0]

    @property
    def n_controls(self):
        return len(self.controls)

    def generator(self, u):
        """``A_u = A + sum_j u_j B_j`` for a single slice's amplitudes."""
        out = self.drift.copy()
        for uj, b in zip(u, self.controls):
            out += uj * b
        return out

    def hamiltonian(self, u):
        if not self.hermitian_generators:
            raise NonHermitianError("system has non-Hermitian generators")
        out = self.h_drift.copy()
        for uj, h in zip(u, self.h_controls):
            out += uj * h
        return out

    def fingerprint(self):
        """Hash of all generator matrices, used to detect accidental mutation."""
        import hashlib

        digest = hashlib.sha256()
        for mat in (self.drift,) + self.controls:
            digest.update(np.ascontiguousarray(mat).tobytes())
        return digest.hexdigest()


def _is_hermitian(h, rtol=1e-10):
    scale = max(np.max(np.abs(h), initial=0.0), 1e-300)
    return np.max(np.abs(h - dag(h)), initial=0.0) <= rtol * scale


@dataclass(eq=False)
class ControlSequence:
    """Piecewise-constant amplitudes; row ``k-1`` holds slice ``k``."""

    u: np.ndarray
    dt: float
    bounds: tuple = None

    def __post_init__(self):
        self.u = np.array(self.u, dtype=float)
        if self.u.ndim == 1:
            self.u = self.u[:, None]
        if self.u.ndim != 2 or self.u.shape[0] < 1:
            raise ShapeError("controls must be an (M, m) array with M >= 1")
        self.dt = float(self.dt)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.bounds is not None:
            lo, hi = self.bounds
            lo = np.broadcast_to(np.asarray(lo, dtype=float), (self.n_controls,)).copy()
            hi = np.broadcast_to(np.asarray(hi, dtype=float), (self.n_controls,)).copy()
            if np.any(lo > hi):
                raise ValueError("lower bound exceeds upper bound")
            self.bounds = (lo, hi)
            self.check_bounds(self.u)

    @property
    def n_slices(self):
        return self.u.shape[0]

    @property
    def n_controls(self):
        return self.u.shape[1]

    @property
    def total_time(self):
        return self.n_slices * self.dt

    def check_bounds(self, values):
        if self.bounds is None:
            return
        lo, hi = self.bounds
        if np.any(values < lo) or np.any(values > hi):
            raise BoundsError("control amplitudes outside bounds")

    def clip(self, values):
        if self.bounds is None:
            return values
        return np.clip(values, self.bounds[0], self.bounds[1])

    def copy(self):
        return ControlSequence(self.u.copy(), self.dt, self.bounds)


@dataclass(eq=False)
class TaskSpec:
    """Boundary conditions and normalisation of one of the six standard tasks.

    ``x0`` is the initial condition and ``x_target`` the final one, both in
    the shapes of the boundary-condition table (identity, state column,
    density matrix or quantum map). ``norm_c`` is the normalisation constant
    of the overlap.
    """

    kind: TaskKind
    x0: np.ndarray
    x_target: np.ndarray
    norm_c: float

    def __post_init__(self):
        self.kind = TaskKind(self.kind)
        self.x0 = np.asarray(self.x0, dtype=complex)
        self.x_target = np.asarray(self.x_target, dtype=complex)
        if not self.norm_c > 0:
            raise ValueError("norm_c must be positive")
        if self.x0.shape != self.x_target.shape:
            raise ShapeError(f"x0 {self.x0.shape} and x_target {self.x_target.shape} differ")

    @property
    def dim(self):
        return self.x0.shape[0]

    @property
    def forward_seed(self):
        """Matrix the forward products start from (``X_0``)."""
        if self.kind is TaskKind.DENSITY_CLOSED:
            return np.eye(self.dim, dtype=complex)
        return self.x0

    @property
    def backward_seed(self):
        """Matrix the backward products start from (``X_{M+1}^dagger``)."""
        if self.kind is TaskKind.DENSITY_CLOSED:
            return np.eye(self.dim, dtype=complex)
        return dag(self.x_target)


@dataclass(frozen=True)
class OverlapResult:
    g: complex
    f: float
    phase_factor: complex
    degenerate: bool = False


@dataclass(eq=False)
class LindbladSpec:
    """``drho/dt = -i[H + sum_j u_j H_j, rho] + sum_k rate_k (L rho L^+ - {L^+ L, rho}/2)``."""

    hamiltonian: np.ndarray
    jump_ops: list = field(default_factory=list)
    control_hamiltonians: list = field(default_factory=list)

    def __post_init__(self):
        self.hamiltonian = _as_matrix(self.hamiltonian, "hamiltonian")
        n = self.hamiltonian.shape[0]
        ops = []
        for op, rate in self.jump_ops:
            op = _as_matrix(op, "jump operator")
            if op.shape != (n, n):
                raise ShapeError("jump operator dimension mismatch")
            if rate < 0:
                raise ValueError(f"negative rate {rate}")
            ops.append((op, float(rate)))
        self.jump_ops = ops
        self.control_hamiltonians = [_as_matrix(h, "control hamiltonian")
                                     for h in self.control_hamiltonians]
        for h in self.control_hamiltonians:
            if h.shape != (n, n):
                raise ShapeError("control hamiltonian dimension mismatch")

    @property
    def dim(self):
        return self.hamiltonian.shape[0]


def commutator_superop(h):
    """``ad_H`` in the column-stacking vec convention: ``1 (x) H - H^T (x) 1``."""
    ident = np.eye(h.shape[0], dtype=complex)
    return kron(ident, h) - kron(h.T, ident)


def lift_unitary(u):
    """Superoperator of unitary conjugation, ``conj(U) (x) U``."""
    return kron(np.conj(u), u)


def _dissipator(op, rate):
    n = op.shape[0]
    ident = np.eye(n, dtype=complex)
    ldl = dag(op) @ op
    return -rate * (kron(np.conj(op), op) - 0.5 * (kron(ident, ldl) + kron(ldl.T, ident)))


def build_liouvillian(spec):
    """Liouville-space bilinear system with drift ``i ad_H + Gamma``."""
    drift = 1j * commutator_superop(spec.hamiltonian)
    for op, rate in spec.jump_ops:
        drift = drift + _dissipator(op, rate)
    controls = tuple(1j * commutator_superop(h) for h in spec.control_hamiltonians)
    dissipative = any(rate > 0 for _, rate in spec.jump_ops)
    rep = Representation.LIOUVILLE_OPEN if dissipative else Representation.LIOUVILLE_CLOSED
    return BilinearSystem(drift, controls, rep, None if dissipative else True)


def _state_column(psi, n, name):
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim == 2 and psi.shape == (n, 1):
        return psi
    if psi.ndim == 1 and psi.shape[0] == n:
        return psi[:, None]
    raise ShapeError(f"{name} must be a length-{n} state vector, got shape {psi.shape}")


def build_boundary(kind, system, target, initial=None):
    """Boundary conditions and normalisation for ``kind`` on ``system``.

    Args:
        kind: a :class:`TaskKind`.
        system: the :class:`BilinearSystem` to be steered.
        target: target gate, state vector, density matrix or map. For the
            Liouville-space tasks a Hilbert-space gate is lifted to
            ``conj(U) (x) U`` and a density matrix is vectorised.
        initial: initial state for the state-transfer tasks.
    """
    kind = TaskKind(kind)
    n = system.dim
    ident = np.eye(n, dtype=complex)

    if kind in (TaskKind.GATE_PSU, TaskKind.GATE_SU, TaskKind.MAP_OPEN):
        target = np.asarray(target, dtype=complex)
        if target.shape != (n, n):
            root = int(round(np.sqrt(n)))
            if root * root == n and target.shape == (root, root):
                target = lift_unitary(target)
            else:
                raise ShapeError(f"target shape {target.shape} does not match dimension {n}")
        return TaskSpec(kind, ident, target, float(n))

    if kind is TaskKind.PURE_STATE:
        if initial is None:
            raise ShapeError("pure-state transfer needs an initial state")
        return TaskSpec(kind, _state_column(initial, n, "initial state"),
                        _state_column(target, n, "target state"), 1.0)

    if kind is TaskKind.DENSITY_CLOSED:
        if initial is None:
            raise ShapeError("density-matrix transfer needs an initial state")
        rho0 = _as_matrix(initial, "rho0")
        rho_t = _as_matrix(target, "rho_target")
        if rho0.shape != (n, n) or rho_t.shape != (n, n):
            raise ShapeError("density matrices must match the system dimension")
        return TaskSpec(kind, rho0, rho_t, float(np.linalg.norm(rho_t) ** 2))

    # STATE_OPEN: vectorised density matrices in Liouville space
    if initial is None:
        raise ShapeError("open-system state transfer needs an initial state")

    def _vec(rho, name):
        rho = np.asarray(rho, dtype=complex)
        if rho.ndim == 2 and rho.shape[1] != 1:
            rho = vectorize(rho)
        return _state_column(rho, n, name)

    x0 = _vec(initial, "rho0")
    xt = _vec(target, "rho_target")
    return TaskSpec(kind, x0, xt, float(np.vdot(xt, xt).real))


def _trace_product(a, b):
    """``tr(a @ b)`` without forming the product."""
    return np.sum(a * b.T)


def overlap(task, back, fwd):
    """Normalised overlap and fidelity from a backward/forward split.

    ``back`` is the backward product at the split and ``fwd`` the forward
    product. For density-matrix transfer both are bare propagator products
    (the task's seeds are identities) and the states are conjugated here.
    """
    back = np.asarray(back)
    fwd = np.asarray(fwd)
    if back.shape[1] != fwd.shape[0] or back.shape[0] != fwd.shape[1]:
        raise ShapeError(f"cannot contract {back.shape} with {fwd.shape}")
    if task.kind is TaskKind.DENSITY_CLOSED:
        u = back @ fwd
        g = _trace_product(dag(task.x_target) @ u, task.x0 @ dag(u)) / task.norm_c
    else:
        g = _trace_product(back, fwd) / task.norm_c
    g = complex(g)
    mod = abs(g)
    degenerate = mod == 0.0
    phase = 1.0 + 0j if degenerate else np.conj(g) / mod
    f = mod if task.kind is TaskKind.GATE_PSU else g.real
    return OverlapResult(g, float(f), complex(phase), degenerate)


def sensitivity_kernel(task, back, fwd_prev, ov=None, xk=None):
    """Matrix ``W`` with ``df/du_j(t_k) = Re tr(dX_k/du_j W) / c``.

    Args:
        back: backward product after slice k (includes the target).
        fwd_prev: forward product up to slice k-1.
        ov: current :class:`OverlapResult`; needed for the PSU phase factor.
        xk: slice propagator, needed only for density-matrix transfer.
    """
    if task.kind is TaskKind.DENSITY_CLOSED:
        if xk is None:
            raise ValueError("density-matrix gradient needs the slice propagator")
        rho_prev = fwd_prev @ task.x0 @ dag(fwd_prev)
        rho_t = dag(back) @ dag(task.x_target) @ back
        xk_d = dag(xk)
        return rho_prev @ xk_d @ rho_t + dag(rho_prev) @ xk_d @ dag(rho_t)
    kernel = fwd_prev @ back
    if task.kind is TaskKind.GATE_PSU:
        if ov is None:
            raise ValueError("PSU gradient needs the current overlap")
        if ov.degenerate:
            warnings.warn("overlap vanished; using unit phase factor", DegeneratePhaseWarning)
        kernel = ov.phase_factor * kernel
    return kernel


def slice_fidelity_gradient(task, back, d_xk, fwd_prev, ov=None, xk=None):
    """``df/du_j(t_k)`` for one slice derivative ``d_xk = dX_k/du_j``."""
    kernel = sensitivity_kernel(task, back, fwd_prev, ov, xk)
    return float(np.real(_trace_product(d_xk, kernel)) / task.norm_c)
