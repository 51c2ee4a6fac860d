"""Inverse-Hessian approximations for the concurrent (all-slice) updates.

Internally the optimiser minimises ``phi = -f``; the pairs stored here are
the parameter step ``x`` and the change ``y`` in ``grad phi``, so the
usual minimisation formulas apply unchanged.
"""
from collections import deque

import numpy as np

# skip the update when <y|x> <= CURVATURE_FLOOR * |x| |y|
CURVATURE_FLOOR = 1e-12


def curvature_ok(x, y, floor=CURVATURE_FLOOR):
    return float(y @ x) > floor * np.linalg.norm(x) * np.linalg.norm(y)


def bfgs_inverse_update(h_inv, x, y):
    """``V^T H V + pi x x^T`` with ``pi = 1/<y|x>`` and ``V = 1 - pi y x^T``.

    Returns ``h_inv`` itself (not a copy) when the curvature guard rejects
    the pair.
    """
    if not curvature_ok(x, y):
        return h_inv
    pi = 1.0 / float(y @ x)
    hy = h_inv @ y
    # expanded form of V^T H V + pi x x^T, O(n^2)
    yhy = float(y @ hy)
    out = h_inv - pi * (np.outer(x, hy) + np.outer(hy, x)) + (pi * pi * yhy + pi) * np.outer(x, x)
    return 0.5 * (out + out.T)


class FullBFGS:
    """Dense inverse Hessian over every optimised parameter."""

    def __init__(self, n_params):
        self.n_params = n_params
        self.h_inv = None
        self.n_updates = 0
        self.n_skipped = 0

    def reset(self):
        self.h_inv = None

    def update(self, x, y):
        if self.h_inv is None:
            if not curvature_ok(x, y):
                self.n_skipped += 1
                return False
            # scale the initial matrix so its size matches the observed curvature
            self.h_inv = (float(y @ x) / float(y @ y)) * np.eye(self.n_params)
        before = self.h_inv
        self.h_inv = bfgs_inverse_update(self.h_inv, x, y)
        if self.h_inv is before:
            self.n_skipped += 1
            return False
        self.n_updates += 1
        return True

    def apply(self, grad):
        """``H^{-1} grad``; the identity before the first accepted pair."""
        if self.h_inv is None:
            return grad.copy()
        return self.h_inv @ grad


class LBFGS:
    """Limited-memory variant storing the last ``memory`` pairs."""

    def __init__(self, n_params, memory=20):
        if memory < 1:
            raise ValueError("memory must be at least 1")
        self.n_params = n_params
        self.memory = memory
        self.pairs = deque(maxlen=memory)
        self.n_updates = 0
        self.n_skipped = 0

    def reset(self):
        self.pairs.clear()

    def update(self, x, y):
        if not curvature_ok(x, y):
            self.n_skipped += 1
            return False
        self.pairs.append((x.copy(), y.copy(), 1.0 / float(y @ x)))
        self.n_updates += 1
        return True

    def apply(self, grad):
        """Two-loop recursion for ``H^{-1} grad``."""
        q = grad.copy()
        if not self.pairs:
            return q
        alphas = []
        for x, y, rho in reversed(self.pairs):
            a = rho * float(x @ q)
            alphas.append(a)
            q -= a * y
        x, y, _ = self.pairs[-1]
        q *= float(y @ x) / float(y @ y)
        for (x, y, rho), a in zip(self.pairs, reversed(alphas)):
            b = rho * float(y @ q)
            q += (a - b) * x
        return q


def make_quasi_newton(variant, n_params, memory=20):
    if variant == "bfgs":
        return FullBFGS(n_params)
    if variant == "lbfgs":
        return LBFGS(n_params, memory)
    raise ValueError(f"unknown quasi-Newton variant {variant!r}")
