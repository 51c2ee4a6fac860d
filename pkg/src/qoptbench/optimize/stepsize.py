"""Self-tuning step length for first-order (sequential) updates."""
from dataclasses import dataclass


@dataclass
class StepSizeState:
    """Current step length plus the constants of the adjustment rule.

    After each step the observed gain ``df`` and the initial slope ``s``
    (squared gradient norm) fix a parabola ``s a - c a^2`` through the
    origin. Its maximiser ``a* = s / (2c)`` is compared with the step just
    taken; the step is nudged up or down by one percent when it sits
    outside ``[low_band, high_band] * a*``. The new value is only used for
    the next step.
    """

    alpha: float = 0.1
    grow: float = 1.01
    shrink: float = 0.99
    low_band: float = 2.0 / 3.0
    high_band: float = 4.0 / 3.0
    adaptive: bool = True

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("step length must be positive")


def optimal_step(alpha, gain, slope):
    """Maximiser of the parabola fitted to ``(0, 0)``, slope and ``(alpha, gain)``.

    Returns ``None`` when the fit is not concave.
    """
    curvature = (slope * alpha - gain) / (alpha * alpha)
    if not curvature > 0:
        return None
    return slope / (2.0 * curvature)


def step_size_update(step, gain, slope):
    """Step length to use for the next update."""
    if not step.adaptive:
        return step.alpha
    best = optimal_step(step.alpha, gain, slope)
    if best is None:
        return step.alpha
    if step.alpha < step.low_band * best:
        return step.alpha * step.grow
    if step.alpha > step.high_band * best:
        return step.alpha * step.shrink
    return step.alpha
