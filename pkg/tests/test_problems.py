import numpy as np
import pytest

from qoptbench.errors import ConfigError, UnknownProblemError
from qoptbench.linalg import PAULI, is_unitary, kron_all
from qoptbench.model import TaskKind
from qoptbench.problems import (
    PROBLEM_TABLE,
    build_problem,
    cluster_gate,
    cnot,
    load_custom_problem,
    local_operator,
    pauli_string,
    problem_ids,
    qft,
    ring_hamiltonian,
)

ALL_IDS = problem_ids()


def test_all_ids_present():
    assert ALL_IDS == list(range(1, 24))


@pytest.mark.parametrize("pid", ALL_IDS)
def test_problem_is_well_formed(pid):
    inst = build_problem(pid)
    desc, dim, n_slices, total_time, _ = PROBLEM_TABLE[pid]
    assert inst.dim == dim
    assert inst.n_slices == n_slices
    assert inst.dt == pytest.approx(total_time / n_slices)
    assert inst.task.kind is TaskKind.GATE_PSU
    assert inst.system.hermitian_generators
    assert np.allclose(inst.system.h_drift, inst.system.h_drift.conj().T)
    for h in inst.system.h_controls:
        assert np.allclose(h, h.conj().T)
    assert is_unitary(inst.target, 1e-12)


@pytest.mark.parametrize("pid, n_controls", [(1, 4), (2, 4), (5, 6), (9, 8), (12, 10), (13, 8),
                                             (15, 2), (17, 2), (19, 5), (20, 2), (21, 4), (22, 2)])
def test_control_counts(pid, n_controls):
    assert build_problem(pid).system.n_controls == n_controls


def test_crosstalk_controls():
    h = build_problem(1).system.h_controls
    x1, x2 = local_operator(2, 1, "x"), local_operator(2, 2, "x")
    assert np.allclose(h[0], x1 + 0.1 * x2)
    assert np.allclose(h[1], 0.1 * x1 + x2)


def test_ising_chain_drift():
    drift = build_problem(2).system.h_drift
    assert np.allclose(drift, 0.5 * pauli_string("zz"))


def test_stark_chain_leaves_last_spin_unshifted():
    drift = build_problem(17).system.h_drift
    # no single-Z term on spin 5: its coefficient in the Pauli basis is zero
    z5 = local_operator(5, 5, "z")
    assert abs(np.trace(drift @ z5)) < 1e-12
    z1 = local_operator(5, 1, "z")
    assert np.trace(drift @ z1).real / 32 == pytest.approx(-3.0)


def test_spin_problem_structure():
    inst = build_problem(23)
    assert inst.dim == 7
    jz = inst.system.h_controls[0]
    assert np.allclose(inst.system.h_drift, jz @ jz)


def test_haar_targets_are_seeded():
    a = build_problem(20).target
    b = build_problem(20).target
    c = build_problem(20, seed=5).target
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)
    assert not np.allclose(build_problem(21).target[:8, :8], build_problem(20).target)


def test_unknown_problem():
    with pytest.raises(UnknownProblemError):
        build_problem(24)
    with pytest.raises(UnknownProblemError):
        build_problem("abc")


def test_cnot_action():
    basis = np.eye(4)
    assert np.array_equal(cnot() @ basis[:, 2], basis[:, 3])
    assert np.array_equal(cnot() @ basis[:, 1], basis[:, 1])


def test_qft_is_dft():
    f = qft(3)
    v = np.random.default_rng(0).standard_normal(8)
    # numpy's inverse transform uses the positive exponent
    assert np.allclose(f @ v, np.fft.ifft(v) * np.sqrt(8))


def test_cluster_gate_is_diagonal():
    gate = cluster_gate()
    assert np.allclose(gate, np.diag(np.diag(gate)))
    assert np.allclose(ring_hamiltonian(4), np.diag(np.diag(ring_hamiltonian(4))))


def _reduced(psi, site, n=4):
    t = psi.reshape([2] * n)
    t = np.moveaxis(t, site, 0).reshape(2, -1)
    return t @ t.conj().T


def test_cluster_state_single_qubit_marginals():
    plus = np.ones(2) / np.sqrt(2)
    psi = cluster_gate() @ np.kron(np.kron(plus, plus), np.kron(plus, plus))
    for site in range(4):
        assert np.allclose(_reduced(psi, site), np.eye(2) / 2, atol=1e-10)


def test_cluster_state_stabilisers():
    # up to local Z rotations the ring's stabilisers are X_a Z_{a-1} Z_{a+1}
    plus = np.ones(2) / np.sqrt(2)
    psi = cluster_gate() @ np.kron(np.kron(plus, plus), np.kron(plus, plus))
    for a in range(4):
        label = ["i"] * 4
        label[a] = "x"
        label[(a - 1) % 4] = "z"
        label[(a + 1) % 4] = "z"
        value = np.vdot(psi, pauli_string("".join(label)) @ psi).real
        assert abs(value) == pytest.approx(1.0)


def test_local_operator_and_strings():
    assert np.allclose(local_operator(3, 2, "y"), kron_all(PAULI["i"], PAULI["y"], PAULI["i"]))
    with pytest.raises(ValueError):
        local_operator(3, 4, "x")
    with pytest.raises(ValueError):
        pauli_string("xq")


CUSTOM = {
    "name": "two-spin",
    "qubits": 2,
    "slices": 20,
    "time": 2.0,
    "target": "cnot",
    "drift": [[0.5, "ZZ"]],
    "controls": [[[0.5, "XI"]], [[0.5, "YI"]], [[0.5, "IX"]], [[0.5, "IY"]]],
}


def test_custom_problem_matches_builtin():
    inst = load_custom_problem(CUSTOM)
    ref = build_problem(2)
    assert inst.n_slices == 20 and inst.dt == pytest.approx(0.1)
    assert np.allclose(inst.system.h_drift, ref.system.h_drift)
    for a, b in zip(inst.system.h_controls, ref.system.h_controls):
        assert np.allclose(a, b)


@pytest.mark.parametrize("patch", [{"colour": 1}, {"drift": [[1.0, "Z"]]}, {"target": "toffoli"},
                                   {"controls": []}, {"slices": 0}, {"drift": [[1.0, "ZQ"]]}])
def test_custom_problem_errors(patch):
    bad = {**CUSTOM, **patch}
    with pytest.raises(ConfigError):
        load_custom_problem(bad)


def test_single_site_operator_is_pauli():
    assert np.array_equal(local_operator(1, 1, "x"), PAULI["x"])


def test_operators_on_different_sites_commute():
    for a in "xyz":
        for b in "xyz":
            p, q = local_operator(3, 1, a), local_operator(3, 3, b)
            assert np.abs(p @ q - q @ p).max() <= 1e-15


def test_cnot_trace_and_square():
    gate = cnot()
    assert np.trace(gate) == pytest.approx(2)
    assert np.array_equal(gate @ gate, np.eye(4))


def test_two_qubit_qft_is_unitary():
    gate = qft(2)
    assert np.abs(gate @ gate.conj().T - np.eye(4)).max() < 1e-12


@pytest.mark.parametrize("pid, dim, n_slices, total_time, n_controls", [
    (1, 4, 30, 2.0, 4), (13, 16, 128, 7.0, 8), (22, 13, 100, 15.0, 2),
])
def test_problem_dimensions(pid, dim, n_slices, total_time, n_controls):
    inst = build_problem(pid)
    assert inst.system.dim == dim
    assert inst.n_slices == n_slices
    assert inst.n_slices * inst.dt == pytest.approx(total_time)
    assert inst.system.n_controls == n_controls


def test_cluster_problem_uses_complete_coupling():
    inst = build_problem(13)
    assert np.allclose(inst.task.x_target, cluster_gate())
    drift = inst.system.h_drift
    assert np.allclose(drift, np.diag(np.diag(drift)))
    for i in range(1, 5):
        for j in range(i + 1, 5):
            zz = local_operator(4, i, "z") @ local_operator(4, j, "z")
            assert abs(np.trace(drift @ zz)) > 0


def test_spin_problem_controls_are_jz_and_jx():
    from qoptbench.linalg import angular_momentum
    spin = angular_momentum(6)
    h = build_problem(22).system.h_controls
    assert np.allclose(h[0], spin.jz) and np.allclose(h[1], spin.jx)
