"""Gradient-based optimal control of bilinear quantum systems.

The layers build on each other: :mod:`.linalg` (dense kernels),
:mod:`.model` (systems, tasks, fidelities), :mod:`.propagation` (cached
slice products), :mod:`.gradient` (slice derivatives), :mod:`.optimize`
(update schemes) and :mod:`.problems` (benchmark suite). The
``qoptbench`` command in :mod:`.bench` drives multi-restart benchmarks.
"""
from .errors import (
    BoundsError,
    ConfigError,
    DegeneratePhaseWarning,
    InvalidSchemeError,
    NoConvergenceError,
    NonHermitianError,
    QoptError,
    ShapeError,
    StaleCacheError,
    UnknownProblemError,
)
from .gradient import GradientMethod, fidelity_gradient
from .model import (
    BilinearSystem,
    ControlSequence,
    LindbladSpec,
    Representation,
    TaskKind,
    TaskSpec,
    build_boundary,
    build_liouvillian,
    overlap,
)
from .optimize import (
    StoppingCriteria,
    SubspaceSchedule,
    grape,
    handover_run,
    hybrid,
    krotov,
    run,
)
from .problems import build_problem
from .propagation import PropagationCache, plan_blocks

__version__ = "0.1.0"

__all__ = [
    "BoundsError", "ConfigError", "DegeneratePhaseWarning", "InvalidSchemeError",
    "NoConvergenceError", "NonHermitianError", "QoptError", "ShapeError", "StaleCacheError",
    "UnknownProblemError", "GradientMethod", "fidelity_gradient", "BilinearSystem",
    "ControlSequence", "LindbladSpec", "Representation", "TaskKind", "TaskSpec",
    "build_boundary", "build_liouvillian", "overlap", "StoppingCriteria", "SubspaceSchedule",
    "grape", "handover_run", "hybrid", "krotov", "run", "build_problem", "PropagationCache",
    "plan_blocks",
]
