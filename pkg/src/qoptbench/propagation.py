"""Slice propagators, cached forward/backward products and operation counts.

Slices are labelled ``1..M`` as in the usual time-slice notation; row
``k-1`` of the control array belongs to slice ``k``. Forward product ``k``
is ``X_k ... X_1 X_0`` (``k = 0..M``) and backward product ``k`` is
``X_{M+1}^dagger X_M ... X_{k+1}`` (``k = 0..M``, product ``M`` being the
bare backward seed).

Both chains are rebuilt lazily: changing slice ``k`` invalidates forward
products from ``k`` on and backward products below ``k``, and a product is
recomputed only when it is asked for. A sequential sweep therefore costs one
eigendecomposition and a handful of multiplications per slice, and a
concurrent update costs one pass over each chain.
"""
from dataclasses import dataclass

import numpy as np

from .errors import BoundsError, StaleCacheError
from .linalg import dag, expm_general
from .model import overlap

__all__ = ["PropagationCache", "BlockPlan", "CollapsedChain", "plan_blocks", "fidelity_now", "counters"]


class PropagationCache:
    """Lazily refreshed slice propagators and product chains for one run."""

    def __init__(self, system, task, controls):
        if task.dim != system.dim:
            raise ValueError(f"task dimension {task.dim} != system dimension {system.dim}")
        if controls.n_controls != system.n_controls:
            raise ValueError("control array width does not match the number of controls")
        self.system = system
        self.task = task
        self.controls = controls.copy()
        n = system.dim
        m = controls.n_slices
        self.n_slices = m
        self.dt = controls.dt
        self.hermitian = system.hermitian_generators
        self.props = np.empty((m, n, n), dtype=complex)
        if self.hermitian:
            self.eig_values = np.empty((m, n))
            self.eig_vectors = np.empty((m, n, n), dtype=complex)
            self._h_controls = np.array(system.h_controls).reshape(-1, n, n)
        self._dirty = np.ones(m, dtype=bool)
        self._fwd = [None] * (m + 1)
        self._bwd = [None] * (m + 1)
        self._fwd[0] = task.forward_seed
        self._bwd[m] = task.backward_seed
        self._fwd_valid = 0
        self._bwd_valid = m
        # square products contribute to n_matmul; vector applications do not
        self._fwd_square = task.forward_seed.shape[1] == n
        self._bwd_square = task.backward_seed.shape[0] == n
        self.n_eig = 0
        self.n_matmul = 0
        self.n_expm_general = 0

    # -- controls -----------------------------------------------------------

    @property
    def u(self):
        return self.controls.u

    def _rows(self, slices):
        idx = np.atleast_1d(np.asarray(slices, dtype=int))
        if idx.size and (idx.min() < 1 or idx.max() > self.n_slices):
            raise IndexError(f"slice indices must lie in 1..{self.n_slices}")
        return idx - 1

    def set_controls(self, slices, values):
        """Overwrite the amplitudes of ``slices`` and mark them dirty."""
        rows = self._rows(slices)
        values = np.asarray(values, dtype=float).reshape(rows.size, self.system.n_controls)
        if self.controls.bounds is not None:
            lo, hi = self.controls.bounds
            if np.any(values < lo) or np.any(values > hi):
                raise BoundsError("control amplitudes outside bounds")
        if rows.size == 0:
            return
        self.controls.u[rows] = values
        self._dirty[rows] = True
        self._fwd_valid = min(self._fwd_valid, int(rows.min()))
        self._bwd_valid = max(self._bwd_valid, int(rows.max()) + 1)

    def set_all(self, u):
        self.set_controls(np.arange(1, self.n_slices + 1), u)

    @property
    def dirty(self):
        return np.flatnonzero(self._dirty) + 1

    def refresh(self):
        """Re-exponentiate every dirty slice."""
        rows = np.flatnonzero(self._dirty)
        if rows.size == 0:
            return
        u = self.controls.u[rows]
        if self.hermitian:
            hams = self.system.h_drift + np.einsum("kj,jab->kab", u, self._h_controls)
            values, vectors = np.linalg.eigh(hams)
            self.eig_values[rows] = values
            self.eig_vectors[rows] = vectors
            phases = np.exp(-1j * self.dt * values)
            self.props[rows] = (vectors * phases[:, None, :]) @ dag(vectors)
            self.n_eig += rows.size
            self.n_matmul += rows.size
        else:
            for r, row in zip(rows, u):
                self.props[r] = expm_general(-self.dt * self.system.generator(row))
            self.n_expm_general += rows.size
        self._dirty[rows] = False

    def _check_fresh(self):
        if self._dirty.any():
            raise StaleCacheError("slices %s are dirty; call refresh()" % list(self.dirty))

    # -- products -------------------------------------------------------------

    def forward(self, k):
        """Forward product ``X_k ... X_1 X_0``."""
        self._check_fresh()
        while self._fwd_valid < k:
            v = self._fwd_valid
            self._fwd[v + 1] = self.props[v] @ self._fwd[v]
            self._fwd_valid = v + 1
            if self._fwd_square:
                self.n_matmul += 1
        return self._fwd[k]

    def backward(self, k):
        """Backward product ``X_{M+1}^dagger X_M ... X_{k+1}``."""
        self._check_fresh()
        while self._bwd_valid > k:
            v = self._bwd_valid
            self._bwd[v - 1] = self._bwd[v] @ self.props[v - 1]
            self._bwd_valid = v - 1
            if self._bwd_square:
                self.n_matmul += 1
        return self._bwd[k]

    def best_split(self):
        """Split index whose products are already valid (or cheapest to extend)."""
        return min(max(self._bwd_valid, 0), self.n_slices)

    def fidelity(self, split=None):
        self.refresh()
        k = self.best_split() if split is None else split
        return overlap(self.task, self.backward(k), self.forward(k))

    def counters(self):
        return {"n_eig": self.n_eig, "n_matmul": self.n_matmul,
                "n_expm_general": self.n_expm_general}

    def full_product(self):
        """``X_M ... X_1`` from scratch, without touching the counters."""
        self._check_fresh()
        out = np.eye(self.system.dim, dtype=complex)
        for x in self.props:
            out = x @ out
        return out


def fidelity_now(cache, task=None):
    """Current overlap; ``task`` must be the one the cache was built for."""
    if task is not None and task is not cache.task:
        raise ValueError("cache was built for a different task")
    cache._check_fresh()
    return overlap(cache.task, cache.backward(cache.best_split()), cache.forward(cache.best_split()))


def counters(cache):
    return cache.counters()


# -- block collapsing ---------------------------------------------------------


@dataclass(frozen=True)
class BlockPlan:
    """Layout of ``X_M ... X_1`` for a sparse update set.

    ``segments`` lists, in time order, either an updated slice (an ``int``)
    or a run of consecutive non-updated slices (a ``tuple`` of slice labels)
    that can be multiplied out once into an effective propagator.
    """

    n_slices: int
    update_set: tuple
    segments: tuple

    @property
    def collapsed(self):
        return tuple(s for s in self.segments if isinstance(s, tuple))


def plan_blocks(update_set, n_slices):
    slices = sorted(set(int(k) for k in update_set))
    if not slices:
        raise ValueError("update set must be nonempty")
    if slices[0] < 1 or slices[-1] > n_slices:
        raise IndexError(f"update set must lie in 1..{n_slices}")
    chosen = set(slices)
    segments = []
    run = []
    for k in range(1, n_slices + 1):
        if k in chosen:
            if run:
                segments.append(tuple(run))
                run = []
            segments.append(k)
        else:
            run.append(k)
    if run:
        segments.append(tuple(run))
    return BlockPlan(n_slices, tuple(slices), tuple(segments))


class CollapsedChain:
    """Products over a :class:`BlockPlan` with fixed effective propagators.

    The non-updated runs are multiplied out once at construction; afterwards
    only the updated slices' propagators change, so forward/backward
    products across the whole time axis cost one multiplication per segment.
    """

    def __init__(self, plan, props, forward_seed=None, backward_seed=None):
        self.plan = plan
        self.props = {k: props[k - 1] for k in plan.update_set}
        self.n_matmul = 0
        n = props.shape[-1]
        self.effective = {}
        for seg in plan.collapsed:
            y = props[seg[0] - 1]
            for k in seg[1:]:
                y = props[k - 1] @ y
                self.n_matmul += 1
            self.effective[seg] = y
        self.forward_seed = np.eye(n, dtype=complex) if forward_seed is None else forward_seed
        self.backward_seed = np.eye(n, dtype=complex) if backward_seed is None else backward_seed

    def _factor(self, seg):
        return self.effective[seg] if isinstance(seg, tuple) else self.props[seg]

    def update(self, k, x):
        if k not in self.props:
            raise KeyError(f"slice {k} is not in the update set")
        self.props[k] = x

    def heart(self):
        """``X_M ... X_1`` rebuilt from the segments."""
        out = None
        for seg in self.plan.segments:
            f = self._factor(seg)
            out = f if out is None else f @ out
        return out

    def boundary_products(self, k):
        """Forward product before and backward product after updated slice ``k``."""
        fwd = self.forward_seed
        bwd = self.backward_seed
        segs = self.plan.segments
        pos = segs.index(k)
        for seg in segs[:pos]:
            fwd = self._factor(seg) @ fwd
            self.n_matmul += 1
        for seg in reversed(segs[pos + 1:]):
            bwd = bwd @ self._factor(seg)
            self.n_matmul += 1
        return bwd, fwd

