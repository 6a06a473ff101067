"""Hot lattice loops, each with a numba and a numpy implementation.

All kernels work on padded 2-D arrays whose border row/column is never a
member, so neighbour reads never leave the array.  The integer fixed point
that the relaxation kernels compute is unique, hence every schedule and both
backends return identical arrays.
"""
from __future__ import annotations

import numpy as np

from ._accel import HAVE_NUMBA, njit, resolve_backend

if HAVE_NUMBA:
    from numba import prange
else:  # pragma: no cover
    prange = range


# --------------------------------------------------------------------------
# damped relaxation  v <- min(v, floor((sum of neighbours + cutoff) / 4))
# --------------------------------------------------------------------------

def _color_sweep(v, mem, cutoff, color):
    changed = 0
    H, W = v.shape
    for i in range(1, H - 1):
        j0 = 1 + ((i + 1 + color) & 1)
        for j in range(j0, W - 1, 2):
            if mem[i, j]:
                f = (v[i - 1, j] + v[i + 1, j] + v[i, j - 1] + v[i, j + 1] + cutoff) // 4
                if f < v[i, j]:
                    v[i, j] = f
                    changed += 1
    return changed


def _color_sweep_par(v, mem, cutoff, color):
    H, W = v.shape
    changed = 0
    for i in prange(1, H - 1):
        c = 0
        j0 = 1 + ((i + 1 + color) & 1)
        for j in range(j0, W - 1, 2):
            if mem[i, j]:
                f = (v[i - 1, j] + v[i + 1, j] + v[i, j - 1] + v[i, j + 1] + cutoff) // 4
                if f < v[i, j]:
                    v[i, j] = f
                    c += 1
        changed += c
    return changed


_color_sweep_nb = njit(_color_sweep)
_color_sweep_par_nb = njit(parallel=True)(_color_sweep_par) if HAVE_NUMBA else _color_sweep


@njit
def _redblack_nb(v, mem, cutoff):
    sweeps = 0
    updates = 0
    while True:
        c = _color_sweep_nb(v, mem, cutoff, 0) + _color_sweep_nb(v, mem, cutoff, 1)
        sweeps += 1
        updates += c
        if c == 0:
            return sweeps, updates


def _redblack_par(v, mem, cutoff):
    sweeps = 0
    updates = 0
    while True:
        c = _color_sweep_par_nb(v, mem, cutoff, 0) + _color_sweep_par_nb(v, mem, cutoff, 1)
        sweeps += 1
        updates += c
        if c == 0:
            return sweeps, updates


def _redblack_np(v, mem, cutoff):
    H, W = v.shape
    ii, jj = np.indices((H - 2, W - 2))
    inner = mem[1:-1, 1:-1]
    colors = [inner & (((ii + jj) & 1) == c) for c in (0, 1)]
    center = v[1:-1, 1:-1]
    sweeps = 0
    updates = 0
    while True:
        c_total = 0
        for sel in colors:
            f = (v[:-2, 1:-1] + v[2:, 1:-1] + v[1:-1, :-2] + v[1:-1, 2:] + cutoff) // 4
            hit = sel & (f < center)
            k = int(np.count_nonzero(hit))
            if k:
                center[hit] = f[hit]
            c_total += k
        sweeps += 1
        updates += c_total
        if c_total == 0:
            return sweeps, updates


def _ordered(v, mem, cutoff, order):
    # Gauss-Seidel over flat indices in the given order, repeated to a fixed point
    W = v.shape[1]
    flat = v.ravel()
    sweeps = 0
    updates = 0
    while True:
        c = 0
        for k in order:
            f = (flat[k - 1] + flat[k + 1] + flat[k - W] + flat[k + W] + cutoff) // 4
            if f < flat[k]:
                flat[k] = f
                c += 1
        sweeps += 1
        updates += c
        if c == 0:
            return sweeps, updates


_ordered_nb = njit(_ordered)


def _worklist(v, mem, cutoff):
    H, W = v.shape
    flat = v.ravel()
    mflat = mem.ravel()
    n = flat.size
    queue = np.empty(n, np.int64)
    queued = np.zeros(n, np.bool_)
    head = 0
    size = 0
    for k in range(n):
        if mflat[k]:
            queue[size] = k
            queued[k] = True
            size += 1
    pops = 0
    updates = 0
    while size > 0:
        k = queue[head]
        head = (head + 1) % n
        size -= 1
        queued[k] = False
        pops += 1
        f = (flat[k - 1] + flat[k + 1] + flat[k - W] + flat[k + W] + cutoff) // 4
        if f < flat[k]:
            flat[k] = f
            updates += 1
            for q in (k - 1, k + 1, k - W, k + W):
                if mflat[q] and not queued[q]:
                    queue[(head + size) % n] = q
                    queued[q] = True
                    size += 1
    count = 0
    for k in range(n):
        if mflat[k]:
            count += 1
    # report work in sweep-equivalents
    sweeps = (pops + count - 1) // count if count else 0
    return sweeps, updates


_worklist_nb = njit(_worklist)


def relax(v: np.ndarray, mem: np.ndarray, cutoff: int, schedule: str = "redblack",
          backend: str | None = None, order: np.ndarray | None = None,
          parallel: bool = False) -> tuple[int, int]:
    """Run the damped relaxation in place; returns ``(sweeps, updates)``.

    ``v`` must start at or above the greatest fixed point on members and be
    zero elsewhere; only member cells are ever written.
    """
    backend = resolve_backend(backend)
    cutoff = np.int64(cutoff)
    if not mem.any():
        return 0, 0
    if schedule == "redblack":
        if backend == "numpy":
            return _redblack_np(v, mem, cutoff)
        if parallel:
            return _redblack_par(v, mem, cutoff)
        return _redblack_nb(v, mem, cutoff)
    if schedule in ("raster", "random"):
        if order is None:
            order = np.flatnonzero(mem.ravel())
        order = np.ascontiguousarray(order, dtype=np.int64)
        fn = _ordered_nb if backend == "numba" else _ordered
        return fn(v, mem, cutoff, order)
    if schedule == "worklist":
        fn = _worklist_nb if backend == "numba" else _worklist
        return fn(v, mem, cutoff)
    raise ValueError(f"unknown schedule {schedule!r}")


# --------------------------------------------------------------------------
# burning test
# --------------------------------------------------------------------------

@njit
def _burn_nb(lap, mem, cutoff):
    H, W = mem.shape
    inY = mem.copy()
    rounds = np.zeros(mem.shape, np.int64)
    nbr = np.zeros(mem.shape, np.int64)
    frontier = []
    for i in range(1, H - 1):
        for j in range(1, W - 1):
            if mem[i, j]:
                nbr[i, j] = inY[i - 1, j] + inY[i + 1, j] + inY[i, j - 1] + inY[i, j + 1]
                frontier.append((i, j))
    r = 0
    while len(frontier) > 0:
        r += 1
        burn = []
        for t in frontier:
            i, j = t
            if inY[i, j] and rounds[i, j] == 0 and lap[i, j] + 4 - nbr[i, j] > cutoff:
                rounds[i, j] = r
                burn.append((i, j))
        if len(burn) == 0:
            break
        nxt = []
        for t in burn:
            i, j = t
            inY[i, j] = False
        for t in burn:
            i, j = t
            for q in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
                if inY[q[0], q[1]]:
                    nbr[q[0], q[1]] -= 1
                    nxt.append(q)
        frontier = nxt
    return rounds


def _burn_np(lap, mem, cutoff):
    inY = mem.copy()
    rounds = np.zeros(mem.shape, np.int64)
    r = 0
    while True:
        r += 1
        y = inY.astype(np.int64)
        nbr = np.zeros_like(y)
        nbr[1:-1, 1:-1] = y[:-2, 1:-1] + y[2:, 1:-1] + y[1:-1, :-2] + y[1:-1, 2:]
        burn = inY & (lap + 4 - nbr > cutoff)
        if not burn.any():
            return rounds
        rounds[burn] = r
        inY &= ~burn


def burn_rounds(lap: np.ndarray, mem: np.ndarray, cutoff: int, backend: str | None = None) -> np.ndarray:
    """Round in which each member burns (1-based), 0 for never."""
    backend = resolve_backend(backend)
    if backend == "numba":
        return _burn_nb(np.ascontiguousarray(lap, np.int64), mem, np.int64(cutoff))
    return _burn_np(lap, mem, cutoff)


# --------------------------------------------------------------------------
# toppling
# --------------------------------------------------------------------------

def _topple_stack(s, mem, cutoff):
    H, W = s.shape
    odo = np.zeros(s.shape, np.int64)
    stack = []
    for i in range(H):
        for j in range(W):
            if mem[i, j] and s[i, j] > cutoff:
                stack.append((i, j))
    while len(stack) > 0:
        i, j = stack.pop()
        if s[i, j] <= cutoff:
            continue
        # topple as often as stays legal at once
        k = (s[i, j] - cutoff - 1) // 4 + 1
        s[i, j] -= 4 * k
        odo[i, j] += k
        for q in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
            if mem[q[0], q[1]]:
                s[q[0], q[1]] += k
                if s[q[0], q[1]] > cutoff:
                    stack.append(q)
    return odo


def _topple_sweep(s, mem, cutoff):
    H, W = s.shape
    odo = np.zeros(s.shape, np.int64)
    busy = True
    while busy:
        busy = False
        for i in range(H):
            for j in range(W):
                if mem[i, j] and s[i, j] > cutoff:
                    s[i, j] -= 4
                    odo[i, j] += 1
                    busy = True
                    if mem[i - 1, j]:
                        s[i - 1, j] += 1
                    if mem[i + 1, j]:
                        s[i + 1, j] += 1
                    if mem[i, j - 1]:
                        s[i, j - 1] += 1
                    if mem[i, j + 1]:
                        s[i, j + 1] += 1
    return odo


_topple_stack_nb = njit(_topple_stack)
_topple_sweep_nb = njit(_topple_sweep)


def _topple_parallel_np(s, mem, cutoff):
    odo = np.zeros(s.shape, np.int64)
    while True:
        hot = mem & (s > cutoff)
        if not hot.any():
            return odo
        k = np.where(hot, (s - cutoff - 1) // 4 + 1, 0)
        odo += k
        s -= 4 * k
        gain = np.zeros_like(s)
        gain[1:-1, 1:-1] = k[:-2, 1:-1] + k[2:, 1:-1] + k[1:-1, :-2] + k[1:-1, 2:]
        s += np.where(mem, gain, 0)


def topple(s: np.ndarray, mem: np.ndarray, cutoff: int, order: str = "stack",
           backend: str | None = None) -> np.ndarray:
    """Stabilize ``s`` in place; returns the odometer (topple counts)."""
    backend = resolve_backend(backend)
    cutoff = np.int64(cutoff)
    if order == "parallel":
        return _topple_parallel_np(s, mem, cutoff)
    if order == "stack":
        return (_topple_stack_nb if backend == "numba" else _topple_stack)(s, mem, cutoff)
    if order == "sweep":
        return (_topple_sweep_nb if backend == "numba" else _topple_sweep)(s, mem, cutoff)
    raise ValueError(f"unknown topple order {order!r}")
