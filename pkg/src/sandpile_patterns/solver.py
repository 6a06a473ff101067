"""Least integer solutions of ``Lap u <= cutoff`` with zero exterior data.

The least solution is computed in the negated variable ``v = -u``, which is
the greatest fixed point of ``v(p) = floor((sum_{q~p} v(q) + cutoff) / 4)``
with ``v = 0`` off the mask.  Starting from any ``v >= v*`` the damped update
``v <- min(v, F v)`` decreases monotonically and stops exactly at ``v*``.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._accel import resolve_backend, set_threads
from .grid import DomainError, DomainMask, IntField, LatticePoint, _laplacian_array


@dataclass(frozen=True)
class SolveStats:
    sweeps: int
    updates: int
    schedule: str
    backend: str
    wall_ms: float
    initial_bound: int


@dataclass(frozen=True, eq=False)
class Solution:
    u: IntField
    mask: DomainMask
    cutoff: int = 2
    stats: SolveStats | None = None

    def laplacian(self) -> np.ndarray:
        return _laplacian_array(self.u.values)

    def stats_record(self, burn_pass: bool | None = None) -> dict:
        """The JSON stats record written next to solved fields."""
        rec = {
            "n": self.mask.n,
            "members": self.mask.count,
            "sweeps": self.stats.sweeps if self.stats else 0,
            "updates": self.stats.updates if self.stats else 0,
            "wall_ms": round(self.stats.wall_ms, 3) if self.stats else 0.0,
        }
        if burn_pass is None:
            burn_pass = burning_certificate(self).passed
        rec["burn_pass"] = bool(burn_pass)
        return rec


@dataclass(frozen=True)
class BurnReport:
    burned: list = field(default_factory=list)  # (LatticePoint, round), ordered by round
    unburned: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.unburned


@dataclass(frozen=True, eq=False)
class SandpileConfig:
    s: IntField
    mask: DomainMask


def initial_bound(mask: DomainMask, cutoff: int) -> int:
    """Certified upper bound on ``-u`` over the mask.

    With ``d`` the member diameter, ``phi(x) = c/4 (R^2 - |x - x0|^2)`` for
    ``R = d + 1`` and any member ``x0`` satisfies ``-Lap phi = c`` and is
    nonnegative on all members and their neighbours, so ``-u <= c R^2 / 4``.
    """
    d2 = mask.diameter_sq()
    r2 = (math.isqrt(d2) + 2) ** 2  # >= (d + 1)^2
    return max(d2, -(-max(cutoff, 0) * r2 // 4))


def solve_least(mask: DomainMask, cutoff: int = 2, *, schedule: str = "redblack",
                backend: str | None = None, threads: int = 1, seed: int = 0) -> Solution:
    """Pointwise least integer ``u`` with ``Lap u <= cutoff`` on members, 0 elsewhere.

    ``schedule`` picks the relaxation order (``redblack``, ``raster``,
    ``random`` with ``seed``, ``worklist``); the result does not depend on it.
    """
    backend = resolve_backend(backend)
    mem = mask.member
    bound = initial_bound(mask, cutoff)
    v = np.where(mem, bound, 0).astype(np.int64)
    order = None
    if schedule == "random":
        order = np.flatnonzero(mem.ravel())
        np.random.default_rng(seed).shuffle(order)
    parallel = False
    if threads > 1:
        parallel = set_threads(threads) > 1
    t0 = time.perf_counter()
    sweeps, updates = kernels.relax(v, mem, cutoff, schedule=schedule, backend=backend,
                                    order=order, parallel=parallel)
    wall = (time.perf_counter() - t0) * 1e3
    u = IntField(mask.window, -v)
    stats = SolveStats(sweeps, updates, schedule, backend, wall, bound)
    return Solution(u, mask, cutoff, stats)


def _relaxation_lower_bound(mask: DomainMask, cutoff: int) -> np.ndarray:
    """Per-member certified lower bound ``ceil(-w)`` with ``-Lap w = cutoff`` real.

    Any feasible ``u`` satisfies ``Lap (u + w) <= 0`` on members with zero
    exterior data, hence ``u >= -w`` by the maximum principle.
    """
    pts = mask.points()
    idx = {p: k for k, p in enumerate(pts)}
    m = len(pts)
    A = np.zeros((m, m))
    for p, k in idx.items():
        A[k, k] = 4.0
        for q in ((p.x + 1, p.y), (p.x - 1, p.y), (p.x, p.y + 1), (p.x, p.y - 1)):
            j = idx.get(q)
            if j is not None:
                A[k, j] = -1.0
    w = np.linalg.solve(A, np.full(m, float(cutoff)))
    return np.ceil(-w - 1e-6).astype(np.int64)  # a lower bound may only err downwards


def brute_force_least(mask: DomainMask, cutoff: int = 2, lo: int | None = None,
                      max_box: int = 20_000_000) -> Solution:
    """Exhaustive search for the least feasible field (independent oracle).

    Enumerates every assignment in ``{lo..0}^members`` (``lo`` per member
    defaults to the real relaxation bound) and returns the coordinatewise
    minimum of the feasible ones, which is itself feasible.
    """
    m = mask.count
    if m > 12:
        raise DomainError(f"brute force refuses {m} members (limit 12)")
    win = mask.window
    if m == 0:
        return Solution(IntField.zeros(win), mask, cutoff)
    pts = mask.points()
    if lo is None:
        lows = _relaxation_lower_bound(mask, cutoff)
    else:
        lows = np.full(m, int(lo), dtype=np.int64)
    lows = np.minimum(lows, 0)
    box = int(np.prod([1 - int(a) for a in lows], dtype=object))
    if box > max_box:
        raise DomainError(f"search box of {box} assignments is too large")
    idx = {p: k for k, p in enumerate(pts)}
    nbrs = [[idx.get(q, -1) for q in ((p.x + 1, p.y), (p.x - 1, p.y), (p.x, p.y + 1), (p.x, p.y - 1))]
            for p in pts]
    ranges = [range(int(a), 1) for a in lows]
    best = None
    chunk = 1 << 16
    it = itertools.product(*ranges)
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            break
        U = np.array(block, dtype=np.int64)
        ok = np.ones(len(U), dtype=bool)
        for k in range(m):
            s = -4 * U[:, k]
            for j in nbrs[k]:
                if j >= 0:
                    s = s + U[:, j]
            ok &= s <= cutoff
        if ok.any():
            cand = U[ok].min(axis=0)
            best = cand if best is None else np.minimum(best, cand)
    if best is None:  # pragma: no cover - u = 0 is always feasible
        raise DomainError("no feasible assignment in the search box")
    vals = np.zeros(win.shape, dtype=np.int64)
    for p, k in idx.items():
        vals[p.y - win.y0, p.x - win.x0] = best[k]
    return Solution(IntField(win, vals), mask, cutoff)


def check_feasible(sol: Solution) -> bool:
    mem = sol.mask.member
    lap = sol.laplacian()
    return bool(np.all(lap[mem] <= sol.cutoff) and np.all(sol.u.values[~mem] == 0))


def burning_certificate(sol: Solution, backend: str | None = None) -> BurnReport:
    """Dhar-style burning test certifying that ``sol.u`` is the least solution.

    Sites of ``Y`` (initially all members) burn when lowering ``u`` by one on
    the whole current ``Y`` would break the constraint there, i.e. when
    ``Lap u(p) + 4 - #(neighbours in Y) > cutoff``.  The field is least iff
    everything burns.
    """
    mem = sol.mask.member
    lap = sol.laplacian()
    if np.any(lap[mem] > sol.cutoff):
        raise DomainError("field violates Lap u <= cutoff on the mask")
    rounds = kernels.burn_rounds(lap, mem, sol.cutoff, backend=backend)
    win = sol.mask.window
    ys, xs = np.nonzero(mem & (rounds > 0))
    order = np.lexsort((xs, ys, rounds[ys, xs]))
    burned = [(LatticePoint(int(xs[k]) + win.x0, int(ys[k]) + win.y0), int(rounds[ys[k], xs[k]]))
              for k in order]
    uy, ux = np.nonzero(mem & (rounds == 0))
    unburned = [LatticePoint(int(x) + win.x0, int(y) + win.y0) for y, x in zip(uy, ux)]
    return BurnReport(burned, unburned)


def stabilize(config: SandpileConfig, cutoff: int = 2, order: str = "stack",
              backend: str | None = None) -> tuple[IntField, IntField]:
    """Topple every member holding more than ``cutoff`` grains until stable.

    A toppling removes four grains and sends one to each neighbour; grains
    leaving the mask vanish.  Returns ``(odometer, final configuration)``.
    """
    mask = config.mask
    s = config.s.crop(mask.window).values.copy()
    mem = mask.member
    if np.any(s[mem] < 0):
        raise DomainError("configuration must be nonnegative on the mask")
    s[~mem] = 0
    odo = kernels.topple(s, mem, cutoff, order=order, backend=backend)
    return IntField(mask.window, odo), IntField(mask.window, s)
