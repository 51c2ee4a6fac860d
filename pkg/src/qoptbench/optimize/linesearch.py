"""Strong-Wolfe line search, written for maximisation.

``phi(alpha)`` returns ``(value, slope)`` of the objective along the search
direction. A step is accepted when it gives sufficient increase

    phi(a) >= phi(0) + c1 * a * phi'(0)

and the slope has dropped enough, ``|phi'(a)| <= c2 * phi'(0)``. The second
condition guarantees ``<y|s> > 0`` for the quasi-Newton update that follows.
"""
import math


def _cubic_max(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi):
    """Maximiser of the cubic through two points with slopes, or ``None``."""
    # minimise -phi with the usual cubic interpolation formula
    d1 = -d_lo - d_hi - 3.0 * (-f_lo + f_hi) / (a_lo - a_hi)
    rad = d1 * d1 - d_lo * d_hi
    if rad < 0:
        return None
    d2 = math.copysign(math.sqrt(rad), a_hi - a_lo)
    denom = -d_hi + d_lo + 2.0 * d2
    if denom == 0:
        return None
    return a_hi - (a_hi - a_lo) * (-d_hi + d2 - d1) / denom


def _zoom(phi, f0, d0, lo, hi, c1, c2, budget):
    a_lo, f_lo, d_lo = lo
    a_hi, f_hi, d_hi = hi
    for _ in range(budget):
        a = _cubic_max(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi)
        left, right = sorted((a_lo, a_hi))
        margin = 0.1 * (right - left)
        if a is None or not (left + margin <= a <= right - margin):
            a = 0.5 * (a_lo + a_hi)
        f, d = phi(a)
        if f < f0 + c1 * a * d0 or f <= f_lo:
            a_hi, f_hi, d_hi = a, f, d
        else:
            if abs(d) <= c2 * d0:
                return a
            if d * (a_hi - a_lo) <= 0:
                a_hi, f_hi, d_hi = a_lo, f_lo, d_lo
            a_lo, f_lo, d_lo = a, f, d
        if abs(a_hi - a_lo) < 1e-14 * max(1.0, a_lo):
            break
    # fall back to the best sufficient-increase point seen
    return a_lo if a_lo > 0 else None


def strong_wolfe(phi, f0, d0, c1=1e-4, c2=0.9, alpha0=1.0, max_evals=30, grow=2.0):
    """Step length satisfying the strong Wolfe conditions, or ``None``.

    ``d0`` must be positive (an ascent direction).
    """
    if not d0 > 0:
        raise ValueError("search direction is not an ascent direction")
    a_prev, f_prev, d_prev = 0.0, f0, d0
    a = alpha0
    for i in range(max_evals):
        f, d = phi(a)
        if not math.isfinite(f):
            return _zoom(phi, f0, d0, (a_prev, f_prev, d_prev), (a, -math.inf, 0.0),
                         c1, c2, max_evals - i - 1)
        if f < f0 + c1 * a * d0 or (i > 0 and f <= f_prev):
            return _zoom(phi, f0, d0, (a_prev, f_prev, d_prev), (a, f, d),
                         c1, c2, max_evals - i - 1)
        if abs(d) <= c2 * d0:
            return a
        if d <= 0:
            return _zoom(phi, f0, d0, (a, f, d), (a_prev, f_prev, d_prev),
                         c1, c2, max_evals - i - 1)
        a_prev, f_prev, d_prev = a, f, d
        a *= grow
    return a_prev if a_prev > 0 else None
