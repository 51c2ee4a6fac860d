"""Update schemes, step-size control and quasi-Newton machinery."""
from .engine import (
    FirstOrder,
    Handover,
    QuasiNewton,
    RunResult,
    Scheme,
    StopReason,
    TracePoint,
    concurrent_step,
    first_order_step,
    grape,
    handover_run,
    hybrid,
    krotov,
    run,
    run_scheme,
)
from .quasinewton import LBFGS, FullBFGS, bfgs_inverse_update
from .schedule import Mode, StoppingCriteria, SubspaceSchedule
from .stepsize import StepSizeState, optimal_step, step_size_update

__all__ = [
    "FirstOrder", "Handover", "QuasiNewton", "RunResult", "Scheme", "StopReason",
    "TracePoint", "concurrent_step", "first_order_step", "grape", "handover_run",
    "hybrid", "krotov", "run", "run_scheme", "LBFGS", "FullBFGS",
    "bfgs_inverse_update", "Mode", "StoppingCriteria", "SubspaceSchedule",
    "StepSizeState", "optimal_step", "step_size_update",
]
