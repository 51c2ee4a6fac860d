"""Which slices are updated together, and when a run stops."""
import enum
import math
from dataclasses import dataclass, replace


class Mode(str, enum.Enum):
    SEQUENTIAL = "sequential"
    CONCURRENT = "concurrent"
    BLOCK = "block"


@dataclass(frozen=True)
class SubspaceSchedule:
    """Cycle of slice subsets.

    ``sequential`` visits slices ``1, 2, ..., M, 1, ...`` one at a time,
    ``concurrent`` always takes all ``M`` slices, and ``block`` walks
    through consecutive blocks of ``block_size`` slices (the last one may
    be shorter). ``s_limit`` caps the inner steps taken on one subset; it
    defaults to 1 except for ``concurrent``, where it is unbounded.
    """

    mode: Mode = Mode.SEQUENTIAL
    block_size: int = 1
    s_limit: int = None

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.block_size < 1:
            raise ValueError("block size must be at least 1")
        if self.s_limit is not None and self.s_limit < 1:
            raise ValueError("s_limit must be at least 1")

    @classmethod
    def sequential(cls):
        return cls(Mode.SEQUENTIAL)

    @classmethod
    def concurrent(cls):
        return cls(Mode.CONCURRENT)

    @classmethod
    def block(cls, size, s_limit=1):
        return cls(Mode.BLOCK, size, s_limit)

    @property
    def inner_limit(self):
        if self.s_limit is not None:
            return self.s_limit
        return math.inf if self.mode is Mode.CONCURRENT else 1

    def subspaces(self, n_slices):
        """One full cycle of slice subsets (1-based labels)."""
        if self.mode is Mode.SEQUENTIAL:
            return [(k,) for k in range(1, n_slices + 1)]
        if self.mode is Mode.CONCURRENT:
            return [tuple(range(1, n_slices + 1))]
        if self.block_size > n_slices:
            raise ValueError(f"block size {self.block_size} exceeds {n_slices} slices")
        return [tuple(range(a, min(a + self.block_size, n_slices + 1)))
                for a in range(1, n_slices + 1, self.block_size)]

    def stall_window(self, n_slices):
        """Micro-iterations averaged by the stall test (1 = previous iterate)."""
        if self.mode is Mode.CONCURRENT:
            return 1
        limit = self.inner_limit
        per_cycle = len(self.subspaces(n_slices))
        return per_cycle * (limit if math.isfinite(limit) else 1)


SEQUENTIAL_MAX_ITERS = 300_000
CONCURRENT_MAX_ITERS = 3_000


@dataclass(frozen=True)
class StoppingCriteria:
    """Stopping thresholds; ``max_iters=None`` picks a default per schedule."""

    f_target: float = 1.0 - 1e-4
    max_iters: int = None
    df_threshold: float = 1e-8
    min_control_change: float = 1e-8
    gradient_floor: float = 1e-10
    wall_clock_cap: float = None

    def __post_init__(self):
        if not self.f_target <= 1.0:
            raise ValueError("f_target must not exceed 1")
        if self.max_iters is not None and self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        for name in ("df_threshold", "min_control_change", "gradient_floor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.wall_clock_cap is not None and not self.wall_clock_cap > 0:
            raise ValueError("wall_clock_cap must be positive")

    def resolved(self, schedule):
        if self.max_iters is not None:
            return self
        default = CONCURRENT_MAX_ITERS if schedule.mode is Mode.CONCURRENT else SEQUENTIAL_MAX_ITERS
        return replace(self, max_iters=default)
