"""The 23 benchmark gate-synthesis problems and custom problem files.

All couplings are in units of ``J = 1``. Every problem is a phase-insensitive
gate synthesis on a closed system, starting from the identity.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, UnknownProblemError
from .linalg import PAULI, angular_momentum, haar_unitary, kron_all
from .model import BilinearSystem, TaskKind, build_boundary

__all__ = [
    "ProblemInstance",
    "PROBLEM_TABLE",
    "local_operator",
    "pauli_string",
    "target_gate",
    "cnot",
    "qft",
    "cluster_gate",
    "ring_hamiltonian",
    "build_problem",
    "load_custom_problem",
    "problem_ids",
]


@dataclass(frozen=True)
class ProblemInstance:
    id: object
    system: BilinearSystem
    task: object
    n_slices: int
    total_time: float
    description: str
    target: np.ndarray

    @property
    def dt(self):
        return self.total_time / self.n_slices

    @property
    def dim(self):
        return self.system.dim


# id: (description, dimension, slices, final time, target)
PROBLEM_TABLE = {
    1: ("AB Ising-ZZ chain, crosstalk controls", 4, 30, 2.0, "cnot"),
    2: ("AB Ising-ZZ chain", 4, 40, 2.0, "cnot"),
    3: ("AB Ising-ZZ chain", 4, 128, 3.0, "cnot"),
    4: ("AB Ising-ZZ chain", 4, 64, 4.0, "cnot"),
    5: ("ABC Ising-ZZ chain", 8, 120, 6.0, "qft"),
    6: ("ABC Ising-ZZ chain", 8, 140, 7.0, "qft"),
    7: ("ABCD Ising-ZZ chain", 16, 128, 10.0, "qft"),
    8: ("ABCD Ising-ZZ chain", 16, 128, 12.0, "qft"),
    9: ("ABCD Ising-ZZ chain", 16, 64, 20.0, "qft"),
    10: ("ABCDE Ising-ZZ chain", 32, 300, 15.0, "qft"),
    11: ("ABCDE Ising-ZZ chain", 32, 300, 20.0, "qft"),
    12: ("ABCDE Ising-ZZ chain", 32, 64, 25.0, "qft"),
    13: ("C4 graph, completely ZZ-coupled 4 spins", 16, 128, 7.0, "cluster"),
    14: ("C4 graph, completely ZZ-coupled 4 spins", 16, 128, 12.0, "cluster"),
    15: ("NV centre, two nuclear spins", 4, 40, 2.0, "cnot"),
    16: ("NV centre, two nuclear spins", 4, 64, 5.0, "cnot"),
    17: ("AAAAA Ising-ZZ chain with Stark gradient", 32, 1000, 125.0, "qft"),
    18: ("AAAAA Ising-ZZ chain with Stark gradient", 32, 1000, 150.0, "qft"),
    19: ("AAAAA Heisenberg-XXX chain, local Z controls", 32, 300, 30.0, "qft"),
    20: ("A00 Heisenberg-XXX chain", 8, 64, 15.0, "haar"),
    21: ("AB00 Heisenberg-XXX chain", 16, 128, 40.0, "haar"),
    22: ("driven spin-6", 13, 100, 15.0, "haar"),
    23: ("driven spin-3", 7, 50, 5.0, "haar"),
}

# seeds for the Haar-random targets when the caller does not pick one
_DEFAULT_TARGET_SEED = 20110107


def problem_ids():
    return sorted(PROBLEM_TABLE)


def local_operator(n_qubits, site, axis):
    """Pauli ``axis`` acting on ``site`` (1-based) of ``n_qubits`` qubits."""
    if axis not in ("x", "y", "z"):
        raise ValueError(f"axis must be x, y or z, got {axis!r}")
    if not 1 <= site <= n_qubits:
        raise ValueError(f"site {site} outside 1..{n_qubits}")
    factors = [PAULI["i"]] * n_qubits
    factors[site - 1] = PAULI[axis]
    return kron_all(*factors)


def pauli_string(label):
    """Tensor product for a string like ``"XIZ"`` (leftmost factor is qubit 1)."""
    try:
        return kron_all(*(PAULI[c] for c in label.lower()))
    except KeyError:
        raise ValueError(f"invalid Pauli string {label!r}") from None


def _zz_chain(n):
    return sum(local_operator(n, i, "z") @ local_operator(n, i + 1, "z") for i in range(1, n))


def _xxx_bond(n, i):
    return sum(local_operator(n, i, a) @ local_operator(n, i + 1, a) for a in "xyz")


def ring_hamiltonian(n=4):
    """``(1/2) sum`` of ZZ couplings around a closed ring of ``n`` spins."""
    h = sum(local_operator(n, i, "z") @ local_operator(n, i % n + 1, "z") for i in range(1, n + 1))
    return 0.5 * h


def cnot():
    out = np.eye(4, dtype=complex)
    out[2:, 2:] = PAULI["x"]
    return out


def qft(n_qubits):
    dim = 2 ** n_qubits
    j, k = np.meshgrid(np.arange(dim), np.arange(dim), indexing="ij")
    return np.exp(2j * np.pi * j * k / dim) / np.sqrt(dim)


def cluster_gate():
    """``exp(-i pi/2 H)`` for the 4-spin ZZ ring; diagonal in the computational basis."""
    diag = np.real(np.diag(ring_hamiltonian(4)))
    return np.diag(np.exp(-0.5j * np.pi * diag))


def target_gate(kind, *, n_qubits=None, dim=None, seed=None):
    kind = kind.lower()
    if kind == "cnot":
        return cnot()
    if kind == "qft":
        return qft(n_qubits)
    if kind in ("cluster", "cluster_gate", "ucs"):
        return cluster_gate()
    if kind in ("haar", "random"):
        return haar_unitary(dim, np.random.default_rng(seed))
    raise ValueError(f"unknown target kind {kind!r}")


def _ising_controls(n):
    return [0.5 * local_operator(n, i, a) for i in range(1, n + 1) for a in "xy"]


def _hamiltonians(pid):
    if pid == 1:
        s = {(i, a): local_operator(2, i, a) for i in (1, 2) for a in "xy"}
        # crosstalk coefficients: 1 on the addressed spin, 0.1 on the other
        controls = [s[1, "x"] + 0.1 * s[2, "x"], 0.1 * s[1, "x"] + s[2, "x"],
                    s[1, "y"] + 0.1 * s[2, "y"], 0.1 * s[1, "y"] + s[2, "y"]]
        return 0.5 * _zz_chain(2), controls
    if 2 <= pid <= 12:
        n = {4: 2, 8: 3, 16: 4, 32: 5}[PROBLEM_TABLE[pid][1]]
        return 0.5 * _zz_chain(n), _ising_controls(n)
    if pid in (13, 14):
        n = 4
        drift = sum(local_operator(n, k, "z") @ local_operator(n, l, "z")
                    for k in range(1, n) for l in range(k + 1, n + 1))
        return 0.5 * drift, _ising_controls(n)
    if pid in (15, 16):
        energies = np.array([-134.825, -4.725, 4.275, 135.275])
        carrier = 135.0 * np.array([1.0, 0.0, 0.0, -1.0])
        drift = 2 * np.pi * np.diag(energies + carrier).astype(complex)
        dipoles = {(0, 1): 1.0, (0, 2): 1 / 3.5, (1, 3): 1 / 1.4, (2, 3): 1 / 1.8}
        hx = np.zeros((4, 4), dtype=complex)
        hy = np.zeros((4, 4), dtype=complex)
        for (a, b), mu in dipoles.items():
            hx[a, b] += mu
            hx[b, a] += mu
            hy[a, b] += -1j * mu
            hy[b, a] += 1j * mu
        return drift, [0.5 * hx, 0.5 * hy]
    if pid in (17, 18):
        n = 5
        # the Stark term sits inside the 4-bond sum, so spin 5 carries none
        drift = sum(0.5 * local_operator(n, i, "z") @ local_operator(n, i + 1, "z")
                    - (i + 2) * local_operator(n, i, "z") for i in range(1, n))
        hx = 0.5 * sum(local_operator(n, i, "x") for i in range(1, n + 1))
        hy = 0.5 * sum(local_operator(n, i, "y") for i in range(1, n + 1))
        return drift, [hx, hy]
    if pid == 19:
        n = 5
        # the permanent field sits inside the 4-bond sum, so spin 5 carries none
        drift = sum(0.5 * _xxx_bond(n, i) - 10 * local_operator(n, i, "x") for i in range(1, n))
        return drift, [local_operator(n, i, "z") for i in range(1, n + 1)]
    if pid in (20, 21):
        n = 3 if pid == 20 else 4
        drift = 0.5 * sum(_xxx_bond(n, i) for i in range(1, n))
        n_driven = 1 if pid == 20 else 2
        controls = [0.5 * local_operator(n, i, a) for i in range(1, n_driven + 1) for a in "xy"]
        return drift, controls
    if pid in (22, 23):
        spin = angular_momentum(6 if pid == 22 else 3)
        return spin.jz @ spin.jz, [spin.jz, spin.jx]
    raise UnknownProblemError(f"unknown problem id {pid}")


def build_problem(pid, seed=None):
    """Problem ``pid`` (1..23). ``seed`` picks the Haar target where one is used."""
    try:
        pid = int(pid)
    except (TypeError, ValueError):
        raise UnknownProblemError(f"problem id must be an integer, got {pid!r}") from None
    if pid not in PROBLEM_TABLE:
        raise UnknownProblemError(f"unknown problem id {pid}; valid ids are 1..23")
    description, dim, n_slices, total_time, target_kind = PROBLEM_TABLE[pid]
    drift, controls = _hamiltonians(pid)
    system = BilinearSystem.from_hamiltonians(drift, controls)
    if target_kind == "haar":
        target = target_gate("haar", dim=dim,
                             seed=[_DEFAULT_TARGET_SEED, pid] if seed is None else seed)
    else:
        target = target_gate(target_kind, n_qubits=int(round(np.log2(dim))))
    task = build_boundary(TaskKind.GATE_PSU, system, target)
    return ProblemInstance(pid, system, task, n_slices, total_time, description, target)


def _parse_terms(entries, n_qubits, where):
    """Sum of ``coeff * pauli_string``; each entry is ``[coeff, "XZI"]``."""
    total = np.zeros((2 ** n_qubits,) * 2, dtype=complex)
    for entry in entries:
        if not (isinstance(entry, (list, tuple)) and len(entry) == 2):
            raise ConfigError(f"{where}: terms must be [coefficient, pauli-string] pairs")
        coeff, label = entry
        if len(label) != n_qubits:
            raise ConfigError(f"{where}: Pauli string {label!r} needs {n_qubits} characters")
        try:
            total = total + float(coeff) * pauli_string(label)
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    return total


_CUSTOM_KEYS = {"name", "qubits", "slices", "time", "target", "drift", "controls", "seed"}


def load_custom_problem(data):
    """Build a problem from a parsed definition table.

    Expected keys: ``qubits``, ``slices``, ``time``, ``target`` (``cnot``,
    ``qft``, ``cluster`` or ``haar``), ``drift`` (list of
    ``[coeff, "PAULI"]`` pairs) and ``controls`` (list of such lists, one
    per control). Optional: ``name`` and ``seed`` for Haar targets.
    """
    unknown = set(data) - _CUSTOM_KEYS
    if unknown:
        raise ConfigError(f"unknown keys in problem definition: {sorted(unknown)}")
    missing = {"qubits", "slices", "time", "target", "drift", "controls"} - set(data)
    if missing:
        raise ConfigError(f"problem definition lacks {sorted(missing)}")
    n = int(data["qubits"])
    if n < 1:
        raise ConfigError("qubits must be positive")
    drift = _parse_terms(data["drift"], n, "drift")
    controls = [_parse_terms(c, n, f"control {j}") for j, c in enumerate(data["controls"])]
    if not controls:
        raise ConfigError("at least one control is required")
    system = BilinearSystem.from_hamiltonians(drift, controls)
    kind = str(data["target"]).lower()
    try:
        target = target_gate(kind, n_qubits=n, dim=2 ** n, seed=data.get("seed", 0))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if target.shape[0] != system.dim:
        raise ConfigError(f"target {kind} does not fit {n} qubits")
    task = build_boundary(TaskKind.GATE_PSU, system, target)
    n_slices, total_time = int(data["slices"]), float(data["time"])
    if n_slices < 1 or not total_time > 0:
        raise ConfigError("slices and time must be positive")
    return ProblemInstance(data.get("name", "custom"), system, task, n_slices, total_time,
                           data.get("name", "custom problem"), target)

