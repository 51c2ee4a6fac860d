"""The optimisation loop shared by every update scheme.

An outer loop picks the next subset of time slices from the schedule; an
inner loop takes up to ``s_limit`` steps on that subset. Each step is
either a first-order move along the gradient with the self-tuning step
length, or a quasi-Newton move with a line search.
"""
import enum
import time
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from ..gradient import GradientMethod, fidelity_gradient
from ..model import ControlSequence
from ..propagation import PropagationCache
from .quasinewton import make_quasi_newton
from .schedule import Mode, StoppingCriteria, SubspaceSchedule
from .linesearch import strong_wolfe
from .stepsize import StepSizeState, step_size_update


class StopReason(str, enum.Enum):
    TARGET_REACHED = "TargetReached"
    ITER_BUDGET = "IterBudget"
    STALLED = "Stalled"
    CONTROL_STALLED = "ControlStalled"
    GRADIENT_FLOOR = "GradientFloor"
    WALL_CLOCK = "WallClock"


class TracePoint(NamedTuple):
    iteration: int
    fidelity: float
    n_eig: int
    n_matmul: int
    elapsed: float


@dataclass(frozen=True)
class FirstOrder:
    """Move along the gradient with a self-tuning (or fixed) step length."""

    alpha0: float = 0.1
    adaptive: bool = True

    def new_state(self):
        return StepSizeState(alpha=self.alpha0, adaptive=self.adaptive)


@dataclass(frozen=True)
class QuasiNewton:
    """BFGS or L-BFGS direction with a line search.

    ``line_search="wolfe"`` enforces the strong Wolfe conditions, which keeps
    every stored curvature pair positive. ``"armijo"`` only backtracks by
    halving until sufficient increase holds; it is cheaper per step but
    lets the inverse Hessian degrade, and is always used when bounds are
    active (the projected path is not a straight line).
    """

    variant: str = "bfgs"
    memory: int = 20
    c1: float = 1e-4
    c2: float = 0.9
    max_backtracks: int = 40
    line_search: str = "wolfe"

    def __post_init__(self):
        if self.variant not in ("bfgs", "lbfgs"):
            raise ValueError(f"unknown quasi-Newton variant {self.variant!r}")
        if not 0 < self.c1 < self.c2 < 1:
            raise ValueError("need 0 < c1 < c2 < 1")
        if self.line_search not in ("wolfe", "armijo"):
            raise ValueError(f"unknown line search {self.line_search!r}")


@dataclass(frozen=True)
class Scheme:
    name: str
    schedule: SubspaceSchedule
    method: object

    def default_stop(self, **overrides):
        return StoppingCriteria(**overrides).resolved(self.schedule)


def krotov():
    return Scheme("krotov", SubspaceSchedule.sequential(), FirstOrder())


def grape(variant="bfgs"):
    return Scheme(f"grape-{variant}", SubspaceSchedule.concurrent(), QuasiNewton(variant))


def hybrid(block_size, s_limit=1, method="first-order"):
    if method in ("first-order", "first_order", "gradient"):
        update = FirstOrder()
    else:
        update = QuasiNewton(method)
    name = f"hybrid({block_size},{s_limit},{method})"
    return Scheme(name, SubspaceSchedule.block(block_size, s_limit), update)


@dataclass(eq=False)
class RunResult:
    final_fidelity: float
    stop_reason: StopReason
    trace: list
    final_controls: ControlSequence
    counters: dict = field(default_factory=dict)
    wall_time: float = 0.0
    scheme: str = ""
    handover_index: int = None
    handover_flagged: bool = False

    @property
    def iterations(self):
        return self.trace[-1].iteration


class _Stepper:
    """Mutable state of one run: cache, current overlap, stall bookkeeping."""

    def __init__(self, cache, schedule, stop, gradient):
        self.cache = cache
        self.schedule = schedule
        self.stop = stop
        self.gradient = gradient
        self.ov = cache.fidelity()
        self.r = 0
        self.start = time.perf_counter()
        self.trace = [self._point()]
        self.window = schedule.stall_window(cache.n_slices)
        self.history = [self.ov.f]

    def _point(self):
        return TracePoint(self.r, self.ov.f, self.cache.n_eig, self.cache.n_matmul,
                          time.perf_counter() - self.start)

    def grad(self, slices):
        return fidelity_gradient(self.cache, slices, self.gradient, self.ov)

    def record(self, control_change):
        """Log iteration ``r``; return a stop reason or ``None``."""
        self.r += 1
        f = self.ov.f
        self.trace.append(self._point())
        stop = self.stop
        if f >= stop.f_target:
            return StopReason.TARGET_REACHED
        if stop.wall_clock_cap is not None and self.trace[-1].elapsed > stop.wall_clock_cap:
            return StopReason.WALL_CLOCK
        hist = self.history
        hist.append(f)
        if len(hist) > self.window:
            ref = hist[-2] if self.window == 1 else sum(hist[-self.window - 1:-1]) / self.window
            if abs(f - ref) < stop.df_threshold:
                return StopReason.STALLED
            if len(hist) > 4 * self.window:
                del hist[:-self.window - 1]
        if (self.schedule.mode is Mode.CONCURRENT and control_change is not None
                and control_change < stop.min_control_change):
            return StopReason.CONTROL_STALLED
        if self.r >= stop.max_iters:
            return StopReason.ITER_BUDGET
        return None


def first_order_step(cache, slices, grad, step, ov):
    """Move ``slices`` by ``alpha * grad``; return the new overlap and gain.

    The step length in ``step`` is updated for the next call from the
    observed gain; the current step is never repeated.
    """
    rows = np.asarray(slices) - 1
    old = cache.u[rows]
    new = cache.controls.clip(old + step.alpha * grad)
    cache.set_controls(slices, new)
    new_ov = cache.fidelity()
    gain = new_ov.f - ov.f
    slope = float(np.sum(grad * grad))
    if slope > 0:
        step.alpha = step_size_update(step, gain, slope)
    return new_ov, gain, float(np.max(np.abs(new - old), initial=0.0))


class LineSearchFailure(Exception):
    pass


def concurrent_step(cache, slices, grad, qn, method, ov, pending, gradient=None):
    """One quasi-Newton step over ``slices``.

    ``pending`` is ``(step, grad)`` of the previous accepted step on the same
    subset (or ``None``); it is folded into ``qn`` before the new direction
    is formed. Returns the new overlap, the accepted step, the maximum
    control change and the gradient at the new point when the line search
    already computed it (else ``None``).

    Raises:
        LineSearchFailure: no acceptable step was found; the controls are
            restored.
    """
    rows = np.asarray(slices) - 1
    shape = (len(rows), cache.u.shape[1])
    g = grad.ravel()
    if pending is not None:
        prev_step, prev_grad = pending
        # minimising -f: y is the change of -grad
        qn.update(prev_step, prev_grad - g)
    d = qn.apply(g)
    if not float(g @ d) > 0:
        qn.reset()
        d = g.copy()
    x0 = cache.u[rows].ravel().copy()
    if method.line_search == "wolfe" and cache.controls.bounds is None:
        found = _wolfe_step(cache, slices, shape, x0, d, g, ov, method, gradient)
    else:
        found = _armijo_step(cache, slices, shape, x0, d, g, ov, method)
    if found is None:
        cache.set_controls(slices, x0.reshape(shape))
        cache.refresh()
        raise LineSearchFailure()
    new_ov, trial, new_grad = found
    step = trial - x0
    return new_ov, step, float(np.max(np.abs(step), initial=0.0)), new_grad


def _armijo_step(cache, slices, shape, x0, d, g, ov, method):
    alpha = 1.0
    for _ in range(method.max_backtracks):
        trial = cache.controls.clip((x0 + alpha * d).reshape(shape)).ravel()
        cache.set_controls(slices, trial.reshape(shape))
        new_ov = cache.fidelity()
        gain = new_ov.f - ov.f
        if gain >= method.c1 * float(g @ (trial - x0)) and gain >= 0:
            return new_ov, trial, None
        alpha *= 0.5
    return None


def _wolfe_step(cache, slices, shape, x0, d, g, ov, method, gradient):
    seen = {}

    def phi(alpha):
        cache.set_controls(slices, (x0 + alpha * d).reshape(shape))
        trial_ov = cache.fidelity()
        trial_grad = fidelity_gradient(cache, slices, gradient, trial_ov)
        seen[alpha] = (trial_ov, trial_grad)
        return trial_ov.f, float(trial_grad.ravel() @ d)

    alpha = strong_wolfe(phi, ov.f, float(g @ d), method.c1, method.c2,
                         max_evals=method.max_backtracks)
    if alpha is None:
        return None
    trial = x0 + alpha * d
    new_ov, new_grad = seen[alpha]
    if not np.array_equal(cache.u[np.asarray(slices) - 1].ravel(), trial):
        cache.set_controls(slices, trial.reshape(shape))
        cache.refresh()
    return new_ov, trial, new_grad


def run(system, task, u0, scheme, stop=None, gradient=None):
    """Optimise ``u0`` with ``scheme`` until a stopping criterion fires."""
    schedule, method = scheme.schedule, scheme.method
    stop = (stop or StoppingCriteria()).resolved(schedule)
    if gradient is None:
        gradient = GradientMethod("exact" if system.hermitian_generators else "auto")
    cache = PropagationCache(system, task, u0)
    st = _Stepper(cache, schedule, stop, gradient)
    subspaces = schedule.subspaces(cache.n_slices)

    reason = None
    if st.ov.f >= stop.f_target:
        reason = StopReason.TARGET_REACHED
    elif stop.max_iters == 0:
        reason = StopReason.ITER_BUDGET

    step = method.new_state() if isinstance(method, FirstOrder) else None
    floor_hits = 0
    q = 0
    while reason is None:
        slices = subspaces[q % len(subspaces)]
        q += 1
        qn = None
        if isinstance(method, QuasiNewton):
            qn = make_quasi_newton(method.variant, len(slices) * cache.u.shape[1], method.memory)
        pending = None
        carried = None
        s = 0
        while reason is None and s < schedule.inner_limit:
            if carried is not None:
                grad, carried = carried, None
            else:
                grad = st.grad(slices)
            if np.linalg.norm(grad) < stop.gradient_floor:
                floor_hits += 1
                if floor_hits >= len(subspaces):
                    reason = StopReason.GRADIENT_FLOOR
                break
            floor_hits = 0
            if step is not None:
                st.ov, _, change = first_order_step(cache, slices, grad, step, st.ov)
            else:
                try:
                    st.ov, x_step, change, carried = concurrent_step(
                        cache, slices, grad, qn, method, st.ov, pending, gradient)
                except LineSearchFailure:
                    reason = StopReason.STALLED
                    break
                pending = (x_step, grad.ravel())
            reason = st.record(change)
            s += 1

    return RunResult(
        final_fidelity=st.ov.f,
        stop_reason=reason,
        trace=st.trace,
        final_controls=cache.controls.copy(),
        counters=cache.counters(),
        wall_time=time.perf_counter() - st.start,
        scheme=scheme.name,
    )


@dataclass(frozen=True)
class Handover:
    """Run ``first`` until ``threshold``, then continue with ``second``."""

    threshold: float
    first: Scheme
    second: Scheme

    @property
    def name(self):
        return f"handover({self.threshold},{self.first.name},{self.second.name})"


def handover_run(system, task, u0, first, threshold, second, stop=None, gradient=None):
    """Two-stage run; the trace of stage two is appended to stage one's.

    ``handover_index`` is the trace position of the first point produced by
    the second scheme. If the first scheme stops below ``threshold`` for
    another reason the second scheme still runs and ``handover_flagged`` is
    set.
    """
    stop = stop or StoppingCriteria()
    first_stop = replace(stop, f_target=min(threshold, stop.f_target))
    res1 = run(system, task, u0, first, first_stop, gradient)
    if res1.final_fidelity >= stop.f_target:
        return res1
    flagged = res1.final_fidelity < threshold
    res2 = run(system, task, res1.final_controls, second, stop, gradient)
    last = res1.trace[-1]
    shifted = [TracePoint(p.iteration + last.iteration, p.fidelity, p.n_eig + last.n_eig,
                          p.n_matmul + last.n_matmul, p.elapsed + last.elapsed)
               for p in res2.trace[1:]]
    counters = {k: res1.counters.get(k, 0) + v for k, v in res2.counters.items()}
    return RunResult(
        final_fidelity=res2.final_fidelity,
        stop_reason=res2.stop_reason,
        trace=res1.trace + shifted,
        final_controls=res2.final_controls,
        counters=counters,
        wall_time=res1.wall_time + res2.wall_time,
        scheme=f"handover({threshold},{first.name},{second.name})",
        handover_index=len(res1.trace),
        handover_flagged=flagged,
    )


def run_scheme(system, task, u0, scheme, stop=None, gradient=None):
    """Dispatch plain schemes to :func:`run` and handovers to :func:`handover_run`."""
    if isinstance(scheme, Handover):
        return handover_run(system, task, u0, scheme.first, scheme.threshold, scheme.second,
                            stop, gradient)
    return run(system, task, u0, scheme, stop, gradient)

