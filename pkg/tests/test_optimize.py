import math

import numpy as np
import pytest

from qoptbench.linalg import PAULI, haar_unitary
from qoptbench.model import BilinearSystem, ControlSequence, TaskKind, build_boundary
from qoptbench.optimize import (
    FirstOrder,
    FullBFGS,
    Handover,
    LBFGS,
    Mode,
    QuasiNewton,
    Scheme,
    StepSizeState,
    StopReason,
    StoppingCriteria,
    SubspaceSchedule,
    bfgs_inverse_update,
    grape,
    hybrid,
    krotov,
    optimal_step,
    run,
    run_scheme,
    step_size_update,
)
from qoptbench.optimize.linesearch import strong_wolfe
from qoptbench.optimize.quasinewton import CURVATURE_FLOOR
from qoptbench.problems import build_problem


# -- step length rule -----------------------------------------------------------


def _gain_for_optimum(alpha, best, slope=1.0):
    """Gain that puts the fitted parabola's maximum at ``best``."""
    curvature = slope / (2 * best)
    return slope * alpha - curvature * alpha ** 2


@pytest.mark.parametrize("alpha, expected", [(0.5, 0.505), (2.0, 1.98), (1.0, 1.0)])
def test_step_rule_examples(alpha, expected):
    step = StepSizeState(alpha=alpha)
    assert step_size_update(step, _gain_for_optimum(alpha, 1.0), 1.0) == pytest.approx(expected)


def test_optimal_step_recovers_parabola():
    assert optimal_step(0.3, _gain_for_optimum(0.3, 0.8, 2.5), 2.5) == pytest.approx(0.8)


@pytest.mark.parametrize("gain", [1.0, 2.0])
def test_non_concave_fit_keeps_step(gain):
    # gain >= slope * alpha means zero or negative curvature
    step = StepSizeState(alpha=1.0)
    assert optimal_step(1.0, gain, 1.0) is None
    assert step_size_update(step, gain, 1.0) == 1.0


def test_band_edges():
    step = StepSizeState(alpha=1.0)
    inside_low = _gain_for_optimum(1.0, 1.0 / (2 / 3) - 1e-9)
    assert step_size_update(step, _gain_for_optimum(1.0, 1.49), 1.0) == pytest.approx(1.0)
    assert step_size_update(step, _gain_for_optimum(1.0, 1.6), 1.0) == pytest.approx(1.01)
    assert step_size_update(step, _gain_for_optimum(1.0, 0.76), 1.0) == pytest.approx(1.0)
    assert step_size_update(step, _gain_for_optimum(1.0, 0.7), 1.0) == pytest.approx(0.99)
    assert step_size_update(step, inside_low, 1.0) == pytest.approx(1.0)


def test_fixed_step_ignores_gain():
    step = StepSizeState(alpha=0.5, adaptive=False)
    assert step_size_update(step, _gain_for_optimum(0.5, 10.0), 1.0) == 0.5


def test_step_state_rejects_nonpositive():
    with pytest.raises(ValueError):
        StepSizeState(alpha=0.0)


# -- quasi-Newton ---------------------------------------------------------------


def test_secant_condition_after_every_update():
    rng = np.random.default_rng(0)
    n = 7
    h = np.eye(n)
    for _ in range(30):
        x = rng.standard_normal(n)
        y = x + 0.3 * rng.standard_normal(n)
        if y @ x <= 0:
            continue
        h = bfgs_inverse_update(h, x, y)
        assert np.allclose(h @ y, x, atol=1e-10 * max(1.0, np.linalg.norm(x)))
        assert np.allclose(h, h.T)
        assert np.all(np.linalg.eigvalsh(h) > 0)


def test_curvature_guard_skips():
    h = np.eye(3)
    x = np.array([1.0, 0.0, 0.0])
    assert bfgs_inverse_update(h, x, -x) is h
    assert bfgs_inverse_update(h, x, np.array([0.0, 1.0, 0.0])) is h
    tiny = np.array([CURVATURE_FLOOR / 10, 1.0, 0.0])
    assert bfgs_inverse_update(h, x, tiny) is h


def test_quadratic_termination():
    rng = np.random.default_rng(1)
    n = 5
    q_basis = np.linalg.qr(rng.standard_normal((n, n)))[0]
    hess = q_basis @ np.diag([1.0, 2.0, 3.5, 6.0, 10.0]) @ q_basis.T
    b = rng.standard_normal(n)
    x = np.zeros(n)
    h = np.eye(n)
    grad = hess @ x - b
    for _ in range(n):
        d = -h @ grad
        alpha = -(grad @ d) / (d @ hess @ d)
        step = alpha * d
        x = x + step
        new_grad = hess @ x - b
        h = bfgs_inverse_update(h, step, new_grad - grad)
        grad = new_grad
    assert np.allclose(h, np.linalg.inv(hess), atol=1e-8)
    assert np.allclose(x, np.linalg.solve(hess, b), atol=1e-8)


def test_full_bfgs_initial_scaling():
    qn = FullBFGS(3)
    g = np.array([1.0, -2.0, 0.5])
    assert np.array_equal(qn.apply(g), g)
    x = np.array([1.0, 0.0, 0.0])
    y = np.array([4.0, 0.0, 0.0])
    assert qn.update(x, y)
    assert np.allclose(qn.h_inv @ y, x)
    # untouched directions carry the y.x / y.y scale
    assert qn.h_inv[1, 1] == pytest.approx(0.25)
    assert not qn.update(x, -y)
    assert qn.n_skipped == 1


def test_lbfgs_matches_dense_reconstruction():
    rng = np.random.default_rng(2)
    n = 6
    qn = LBFGS(n, memory=4)
    pairs = []
    for _ in range(7):
        x = rng.standard_normal(n)
        y = x + 0.2 * rng.standard_normal(n)
        if qn.update(x, y):
            pairs.append((x, y))
    kept = pairs[-4:]
    x_last, y_last = kept[-1]
    h = (y_last @ x_last) / (y_last @ y_last) * np.eye(n)
    for x, y in kept:
        h = bfgs_inverse_update(h, x, y)
    g = rng.standard_normal(n)
    assert np.allclose(qn.apply(g), h @ g, atol=1e-12)


def test_lbfgs_memory_validation():
    with pytest.raises(ValueError):
        LBFGS(3, memory=0)


# -- line search ----------------------------------------------------------------


def test_strong_wolfe_on_concave_quadratic():
    evals = []

    def phi(a):
        evals.append(a)
        return -(a - 3.0) ** 2, -2 * (a - 3.0)

    f0, d0 = phi(0.0)
    evals.clear()
    a = strong_wolfe(phi, f0, d0)
    f, d = phi(a)
    assert f >= f0 + 1e-4 * a * d0
    assert abs(d) <= 0.9 * d0


def test_strong_wolfe_backs_off_from_overshoot():
    def phi(a):
        return math.sin(a), math.cos(a)

    a = strong_wolfe(phi, 0.0, 1.0, alpha0=20.0)
    assert a is not None
    assert math.sin(a) >= 1e-4 * a
    assert abs(math.cos(a)) <= 0.9


def test_strong_wolfe_rejects_descent():
    with pytest.raises(ValueError):
        strong_wolfe(lambda a: (0.0, 0.0), 0.0, -1.0)


# -- schedules and stopping -------------------------------------------------------


def test_subspaces():
    assert SubspaceSchedule.sequential().subspaces(3) == [(1,), (2,), (3,)]
    assert SubspaceSchedule.concurrent().subspaces(3) == [(1, 2, 3)]
    assert SubspaceSchedule.block(2, 3).subspaces(5) == [(1, 2), (3, 4), (5,)]
    with pytest.raises(ValueError):
        SubspaceSchedule.block(6).subspaces(5)


def test_inner_limits_and_stall_window():
    assert SubspaceSchedule.sequential().inner_limit == 1
    assert SubspaceSchedule.concurrent().inner_limit == math.inf
    assert SubspaceSchedule.block(4, 3).stall_window(16) == 12
    assert SubspaceSchedule.concurrent().stall_window(16) == 1


def test_default_iteration_budgets():
    assert StoppingCriteria().resolved(SubspaceSchedule.sequential()).max_iters == 300_000
    assert StoppingCriteria().resolved(SubspaceSchedule.concurrent()).max_iters == 3_000
    assert StoppingCriteria(max_iters=7).resolved(SubspaceSchedule.concurrent()).max_iters == 7


@pytest.mark.parametrize("kwargs", [{"f_target": 1.5}, {"max_iters": -1}, {"df_threshold": 0.0},
                                    {"wall_clock_cap": -1.0}])
def test_stopping_validation(kwargs):
    with pytest.raises(ValueError):
        StoppingCriteria(**kwargs)


def test_quasi_newton_validation():
    with pytest.raises(ValueError):
        QuasiNewton("sr1")
    with pytest.raises(ValueError):
        QuasiNewton(c1=0.9, c2=0.1)


# -- full runs ------------------------------------------------------------------


def _single_qubit_task(rng, n_slices=1):
    system = BilinearSystem.from_hamiltonians(PAULI["z"], [PAULI["x"]])
    task = build_boundary(TaskKind.GATE_PSU, system, haar_unitary(2, rng))
    return system, task, ControlSequence(rng.standard_normal((n_slices, 1)), 0.7)


def test_single_slice_schemes_agree():
    rng = np.random.default_rng(5)
    system, task, u0 = _single_qubit_task(rng)
    stop = StoppingCriteria(max_iters=40, f_target=1.0)
    seq = run(system, task, u0, Scheme("seq", SubspaceSchedule.sequential(), FirstOrder(adaptive=False)), stop)
    con = run(system, task, u0, Scheme("con", SubspaceSchedule.concurrent(), FirstOrder(adaptive=False)), stop)
    n = min(len(seq.trace), len(con.trace))
    assert n > 5
    assert [p.fidelity for p in seq.trace[:n]] == [p.fidelity for p in con.trace[:n]]


def test_run_reaches_target_on_cnot():
    inst = build_problem(2)
    rng = np.random.default_rng([0, 0])
    u0 = ControlSequence(rng.standard_normal((inst.n_slices, inst.system.n_controls)), inst.dt)
    for scheme in (grape("bfgs"), grape("lbfgs"), krotov(), hybrid(4, 2, "bfgs")):
        res = run(inst.system, inst.task, u0, scheme)
        assert res.stop_reason is StopReason.TARGET_REACHED, scheme.name
        assert res.final_fidelity >= 1 - 1e-4
        fids = [p.fidelity for p in res.trace]
        assert res.trace[0].iteration == 0
        assert [p.iteration for p in res.trace] == list(range(len(res.trace)))
        # counters never decrease
        assert all(a.n_eig <= b.n_eig for a, b in zip(res.trace, res.trace[1:]))
        if scheme.name.startswith("grape"):
            assert all(b >= a - 1e-12 for a, b in zip(fids, fids[1:]))


def test_run_does_not_mutate_initial_controls():
    rng = np.random.default_rng(6)
    system, task, u0 = _single_qubit_task(rng, 4)
    before = u0.u.copy()
    run(system, task, u0, grape(), StoppingCriteria(max_iters=5))
    assert np.array_equal(u0.u, before)


def test_iteration_budget():
    rng = np.random.default_rng(7)
    system, task, u0 = _single_qubit_task(rng, 4)
    res = run(system, task, u0, krotov(), StoppingCriteria(max_iters=3, f_target=1.0))
    assert res.stop_reason is StopReason.ITER_BUDGET
    assert res.iterations == 3


def test_zero_budget_returns_initial_point():
    rng = np.random.default_rng(7)
    system, task, u0 = _single_qubit_task(rng, 4)
    res = run(system, task, u0, grape(), StoppingCriteria(max_iters=0))
    assert res.stop_reason is StopReason.ITER_BUDGET
    assert len(res.trace) == 1


def test_wall_clock_cap():
    inst = build_problem(3)
    rng = np.random.default_rng(0)
    u0 = ControlSequence(rng.standard_normal((inst.n_slices, inst.system.n_controls)), inst.dt)
    res = run(inst.system, inst.task, u0, krotov(), StoppingCriteria(wall_clock_cap=0.05))
    assert res.stop_reason in (StopReason.WALL_CLOCK, StopReason.TARGET_REACHED)


def test_uncontrollable_system_stalls():
    # a drift-only direction: the control commutes with everything relevant
    system = BilinearSystem.from_hamiltonians(PAULI["z"], [PAULI["z"]])
    task = build_boundary(TaskKind.GATE_PSU, system, PAULI["x"])
    u0 = ControlSequence(np.full((3, 1), 0.2), 0.5)
    res = run(system, task, u0, grape(), StoppingCriteria(max_iters=50))
    assert res.stop_reason in (StopReason.GRADIENT_FLOOR, StopReason.STALLED,
                               StopReason.CONTROL_STALLED)
    assert res.iterations < 50


def test_bounded_run_stays_in_bounds():
    inst = build_problem(1)
    rng = np.random.default_rng(3)
    u = np.clip(rng.standard_normal((inst.n_slices, inst.system.n_controls)), -1, 1)
    u0 = ControlSequence(u, inst.dt, (-1.0, 1.0))
    for scheme in (krotov(), grape()):
        res = run(inst.system, inst.task, u0, scheme, StoppingCriteria(max_iters=200))
        assert res.final_controls.u.min() >= -1 and res.final_controls.u.max() <= 1


def test_handover_trace_is_continuous():
    inst = build_problem(2)
    rng = np.random.default_rng([0, 1])
    u0 = ControlSequence(rng.standard_normal((inst.n_slices, inst.system.n_controls)), inst.dt)
    scheme = Handover(0.9, krotov(), grape("lbfgs"))
    res = run_scheme(inst.system, inst.task, u0, scheme)
    assert res.final_fidelity >= 1 - 1e-4
    idx = res.handover_index
    assert idx is not None and 0 < idx < len(res.trace)
    assert res.trace[idx - 1].fidelity >= 0.9
    assert not res.handover_flagged
    its = [p.iteration for p in res.trace]
    assert its == list(range(len(its)))
    assert res.counters["n_eig"] == res.trace[-1].n_eig
    assert scheme.name == "handover(0.9,krotov,grape-lbfgs)"


def test_scheme_names():
    assert krotov().name == "krotov"
    assert grape().name == "grape-bfgs"
    assert hybrid(8, 3, "bfgs").name == "hybrid(8,3,bfgs)"
    assert hybrid(8, 3, "bfgs").schedule.mode is Mode.BLOCK


def _problem_start(pid, restart=0):
    inst = build_problem(pid)
    rng = np.random.default_rng([0, restart])
    return inst, ControlSequence(rng.standard_normal((inst.n_slices, inst.system.n_controls)), inst.dt)


def test_zero_gradient_leaves_controls():
    from qoptbench.optimize import first_order_step
    from qoptbench.propagation import PropagationCache
    inst, u0 = _problem_start(2)
    cache = PropagationCache(inst.system, inst.task, u0)
    ov = cache.fidelity()
    new_ov, gain, change = first_order_step(cache, [5], np.zeros((1, 4)), StepSizeState(), ov)
    assert gain == 0.0 and change == 0.0
    assert np.array_equal(cache.u, u0.u)


def test_small_step_ascends_on_one_parameter():
    from qoptbench.gradient import fidelity_gradient
    from qoptbench.optimize import first_order_step
    from qoptbench.propagation import PropagationCache
    rng = np.random.default_rng(12)
    system, task, u0 = _single_qubit_task(rng)
    cache = PropagationCache(system, task, u0)
    for _ in range(5):
        ov = cache.fidelity()
        grad = fidelity_gradient(cache, [1], ov=ov)
        new_ov, gain, _ = first_order_step(cache, [1], grad, StepSizeState(alpha=0.05, adaptive=False), ov)
        assert gain > 0


def test_one_krotov_sweep_improves_problem_two():
    inst, u0 = _problem_start(2)
    res = run(inst.system, inst.task, u0, krotov(), StoppingCriteria(max_iters=inst.n_slices, f_target=1.0))
    assert res.iterations == inst.n_slices
    assert res.final_fidelity > res.trace[0].fidelity


def test_identity_pair_keeps_identity():
    e1 = np.eye(3)[0]
    assert np.allclose(bfgs_inverse_update(np.eye(3), e1, e1), np.eye(3))


def test_first_quasi_newton_direction_is_gradient():
    g = np.array([0.3, -1.0])
    for qn in (FullBFGS(2), LBFGS(2)):
        assert np.array_equal(qn.apply(g), g)


def test_target_already_met():
    system = BilinearSystem.from_hamiltonians(PAULI["z"], [PAULI["x"]])
    task = build_boundary(TaskKind.GATE_PSU, system, np.eye(2))
    u0 = ControlSequence(np.zeros((3, 1)), 0.0 + 1e-9)
    for scheme in (krotov(), grape()):
        res = run(system, task, u0, scheme)
        assert res.stop_reason is StopReason.TARGET_REACHED
        assert res.iterations == 0


def test_handover_threshold_above_target_runs_first_only():
    inst, u0 = _problem_start(2)
    res = run_scheme(inst.system, inst.task, u0, Handover(1.0, grape("lbfgs"), krotov()))
    plain = run(inst.system, inst.task, u0, grape("lbfgs"))
    assert res.handover_index is None
    assert [p.fidelity for p in res.trace] == [p.fidelity for p in plain.trace]


def test_handover_threshold_zero_runs_second_only():
    inst, u0 = _problem_start(2)
    res = run_scheme(inst.system, inst.task, u0, Handover(0.0, krotov(), grape("bfgs")))
    plain = run(inst.system, inst.task, u0, grape("bfgs"))
    assert res.handover_index == 1
    assert [p.fidelity for p in res.trace] == [p.fidelity for p in plain.trace]
    assert np.array_equal(res.final_controls.u, plain.final_controls.u)


@pytest.mark.slow
def test_handover_rescues_cluster_problem():
    # restarts 0 and 4 stall short of 0.999; 1 to 3 get there
    inst, u0 = _problem_start(13, restart=1)
    stop = StoppingCriteria(f_target=0.999)
    res = run_scheme(inst.system, inst.task, u0, Handover(0.93, krotov(), grape("bfgs")), stop)
    assert res.final_fidelity >= 0.999
