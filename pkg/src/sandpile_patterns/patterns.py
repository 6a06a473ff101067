"""Doubly periodic integer patterns, r-matching, V-norms and structure checks."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .grid import DomainError, IntField, LatticePoint, Window

Q2 = ((0, 1), (-1, 0))
Q3 = ((0, 1, -1), (-1, 0, 1), (1, -1, 0))


# --------------------------------------------------------------------------
# 2-D integer lattices
# --------------------------------------------------------------------------

def hnf(vectors: Sequence[Sequence[int]]) -> tuple[tuple[int, int], tuple[int, int]]:
    """Hermite normal form ``((a, 0), (b, c))`` of the lattice spanned by ``vectors``.

    ``a, c > 0`` and ``0 <= b < a``; two generating sets span the same lattice
    iff their forms agree.  Raises if the span has rank < 2.
    """
    vs = [(int(x), int(y)) for x, y in vectors]
    # gcd-eliminate the y coordinate to get one vector (b, c) and x-only rest
    pivot = None
    rest_x = 0
    for v in vs:
        if pivot is None:
            if v[1] != 0:
                pivot = v
            else:
                rest_x = math.gcd(rest_x, v[0])
            continue
        a, b = pivot, v
        while b[1] != 0:
            q = a[1] // b[1]
            a, b = b, (a[0] - q * b[0], a[1] - q * b[1])
        pivot = a
        rest_x = math.gcd(rest_x, b[0])
    if pivot is None or rest_x == 0:
        raise DomainError("vectors do not span a rank-2 lattice")
    if pivot[1] < 0:
        pivot = (-pivot[0], -pivot[1])
    a = abs(rest_x)
    return ((a, 0), (pivot[0] % a, pivot[1]))


def gauss_reduce(v1: Sequence[int], v2: Sequence[int]) -> tuple[tuple[int, int], tuple[int, int]]:
    """Lagrange-Gauss reduced basis, shortest first, with a fixed sign convention.

    Each vector is made lexicographically positive (first nonzero coordinate
    > 0), then ties among equally short choices resolve by lexicographic order.
    """
    u = (int(v1[0]), int(v1[1]))
    w = (int(v2[0]), int(v2[1]))
    if u[0] * w[1] - u[1] * w[0] == 0:
        raise DomainError("basis vectors are linearly dependent")

    def n2(p):
        return p[0] * p[0] + p[1] * p[1]

    if n2(u) > n2(w):
        u, w = w, u
    while True:
        d = u[0] * u[0] + u[1] * u[1]
        m = round(Fraction(u[0] * w[0] + u[1] * w[1], d))
        w = (w[0] - m * u[0], w[1] - m * u[1])
        if n2(w) >= n2(u):
            break
        u, w = w, u
    # among w + k u of equal length pick the canonical one
    cands = []
    for k in (-1, 0, 1):
        c = (w[0] + k * u[0], w[1] + k * u[1])
        if n2(c) == n2(w):
            cands.append(_lexpos(c))
    u = _lexpos(u)
    w = min(cands)
    if n2(u) == n2(w) and w < u:
        u, w = w, u
    return u, w


def _lexpos(p):
    return p if (p[0] > 0 or (p[0] == 0 and p[1] > 0)) else (-p[0], -p[1])


@dataclass(frozen=True, eq=False)
class PeriodicPattern:
    """``p(x) = tile(x mod Lambda)`` with tile indexed by HNF coset representatives.

    With HNF ``((a, 0), (b, c))`` the representatives are ``0 <= i < a``,
    ``0 <= j < c`` and ``tile`` has shape ``(c, a)``.
    """

    basis: tuple
    tile: np.ndarray

    def __post_init__(self):
        h = hnf(self.basis)
        object.__setattr__(self, "basis", tuple(tuple(int(t) for t in v) for v in self.basis))
        object.__setattr__(self, "_hnf", h)
        t = np.asarray(self.tile, dtype=np.int64)
        if t.shape != (h[1][1], h[0][0]):
            raise DomainError(f"tile shape {t.shape} does not match lattice {h}")
        object.__setattr__(self, "tile", t)

    @property
    def hnf(self):
        return self._hnf

    @property
    def covolume(self) -> int:
        return self._hnf[0][0] * self._hnf[1][1]

    def reduce(self, x, y):
        """Canonical coset representative(s) of ``(x, y)``; works on arrays."""
        (a, _), (b, c) = self._hnf
        k = np.floor_divide(y, c)
        return np.mod(x - k * b, a), y - k * c

    def __call__(self, x, y):
        i, j = self.reduce(x, y)
        return self.tile[j, i]

    def representatives(self) -> list[tuple[int, int]]:
        """Coset representatives in lexicographic order."""
        (a, _), (_, c) = self._hnf
        return [(i, j) for i in range(a) for j in range(c)]

    def synthesize(self, window: Window) -> IntField:
        X, Y = window.coords()
        X, Y = np.broadcast_arrays(X, Y)
        return IntField(window, np.ascontiguousarray(self(X, Y), dtype=np.int64))

    @classmethod
    def from_cells(cls, basis, cells: dict) -> "PeriodicPattern":
        """Build from any fundamental domain given as ``{(x, y): value}``."""
        h = hnf(basis)
        tile = np.zeros((h[1][1], h[0][0]), dtype=np.int64)
        seen = np.zeros(tile.shape, dtype=bool)
        probe = cls(basis, tile)
        for (x, y), v in cells.items():
            i, j = probe.reduce(int(x), int(y))
            if seen[j, i]:
                raise DomainError("tile cells repeat a lattice coset")
            seen[j, i] = True
            tile[j, i] = int(v)
        if not seen.all():
            raise DomainError("tile does not cover every lattice coset")
        return cls(basis, tile)

    def to_json(self) -> dict:
        (a, _), (_, c) = self._hnf
        return {
            "basis": [list(self.basis[0]), list(self.basis[1])],
            "tile": [{"x": i, "y": j, "v": int(self.tile[j, i])} for i in range(a) for j in range(c)],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PeriodicPattern":
        cells = {(int(t["x"]), int(t["y"])): int(t["v"]) for t in obj["tile"]}
        return cls.from_cells(tuple(tuple(v) for v in obj["basis"]), cells)

    def __eq__(self, other):
        return (isinstance(other, PeriodicPattern) and self._hnf == other._hnf
                and np.array_equal(self.tile, other.tile))


def _det2(u, v) -> int:
    return u[0] * v[1] - u[1] * v[0]


# --------------------------------------------------------------------------
# norms
# --------------------------------------------------------------------------

def v_norm(V, x) -> int:
    """``|x|_V = |V^T x|_inf``."""
    V = np.asarray(V, dtype=np.int64)
    if not V.any():
        raise DomainError("V must be nonzero")
    return int(np.abs(V.T @ np.asarray(x, dtype=np.int64)).max())


def _check_v(V) -> np.ndarray:
    V = np.asarray(V, dtype=np.int64)
    if V.shape != (2, 3):
        raise DomainError("V must be 2x3")
    if V.sum(axis=1).any():
        raise DomainError("V must annihilate (1, 1, 1)")
    if _det2(V[:, 0], V[:, 1]) == 0:
        raise DomainError("V must have rank 2")
    return V


def vinv_norm(V, x) -> int | None:
    """``min |y|_1`` over integer ``y`` with ``V y = x``; ``None`` if infeasible.

    Since the third column is minus the sum of the others, ``V y = x`` reads
    ``(y1 - y3) v1 + (y2 - y3) v2 = x``.  Solving for ``(alpha, beta)`` leaves
    the line ``(alpha, beta, 0) + t (1, 1, 1)``, whose l1 norm is minimised at
    ``t = -median(alpha, beta, 0)``.
    """
    V = _check_v(V)
    v1, v2 = V[:, 0].tolist(), V[:, 1].tolist()
    d = _det2(v1, v2)
    x0, x1 = int(x[0]), int(x[1])
    an, bn = x0 * v2[1] - x1 * v2[0], v1[0] * x1 - v1[1] * x0
    if an % d or bn % d:
        return None
    alpha, beta = an // d, bn // d
    t = -sorted((alpha, beta, 0))[1]
    return abs(alpha + t) + abs(beta + t) + abs(t)


def vinv_norm_bruteforce(V, x, radius: int = 6) -> int | None:
    """Enumerate ``|y|_1 <= radius``; independent oracle for :func:`vinv_norm`."""
    V = np.asarray(V, dtype=np.int64)
    r = range(-radius, radius + 1)
    ys = np.array([(a, b, c) for a in r for b in r for c in r
                   if abs(a) + abs(b) + abs(c) <= radius], dtype=np.int64)
    hit = np.all(ys @ V.T == np.asarray(x, dtype=np.int64), axis=1)
    if not hit.any():
        return None
    return int(np.abs(ys[hit]).sum(axis=1).min())


# --------------------------------------------------------------------------
# structure identities
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PatternData:
    P: tuple  # 2x2 Fractions
    A: np.ndarray
    V: np.ndarray
    tile: dict | None = None  # {(x, y): Lap o}

    def to_json(self) -> dict:
        out = {
            "P": [[str(v) for v in row] for row in self.P],
            "A": np.asarray(self.A).tolist(),
            "V": np.asarray(self.V).tolist(),
        }
        if self.tile is not None:
            out["tile"] = [{"x": x, "y": y, "v": int(v)} for (x, y), v in sorted(self.tile.items())]
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "PatternData":
        P = tuple(tuple(Fraction(v) for v in row) for row in obj["P"])
        tile = None
        if obj.get("tile") is not None:
            tile = {(int(t["x"]), int(t["y"])): int(t["v"]) for t in obj["tile"]}
        return cls(P, np.array(obj["A"], dtype=np.int64), np.array(obj["V"], dtype=np.int64), tile)


@dataclass
class StructureReport:
    violations: list = field(default_factory=list)
    covolume: float = 0.0
    norm_ratio: float = 0.0  # |V|^2 / sqrt(det V V^T), reported only

    @property
    def ok(self) -> bool:
        return not self.violations


def _matmul(A, B):
    return [[sum(A[i][k] * B[k][j] for k in range(len(B))) for j in range(len(B[0]))]
            for i in range(len(A))]


def _transpose(A):
    return [list(r) for r in zip(*A)]


def validate_structure(data: PatternData, window: Window | None = None) -> StructureReport:
    """Check the exact identities tying ``P``, ``A``, ``V`` (and an optional tile)."""
    rep = StructureReport()
    P = [[Fraction(v) for v in row] for row in data.P]
    A = [[int(v) for v in row] for row in np.asarray(data.A)]
    V = [[int(v) for v in row] for row in np.asarray(data.V)]
    if P[0][1] != P[1][0]:
        rep.violations.append("P is not symmetric")
    if _matmul(P, V) != A:
        rep.violations.append("PV != A")
    if any(sum(row) for row in A):
        rep.violations.append("A (1,1,1) != 0")
    if any(sum(row) for row in V):
        rep.violations.append("V (1,1,1) != 0")
    lhs = [[a + b for a, b in zip(r1, r2)] for r1, r2 in
           zip(_matmul(_matmul(_transpose(A), Q2), V), _matmul(_matmul(_transpose(V), Q2), A))]
    if lhs != [list(r) for r in Q3]:
        rep.violations.append("A^T Q V + V^T Q A != Q'")
    gram = _matmul(V, _transpose(V))
    gdet = gram[0][0] * gram[1][1] - gram[0][1] * gram[1][0]
    if gdet <= 0:
        rep.violations.append("det(V V^T) <= 0")
    else:
        rep.covolume = math.sqrt(gdet)
        opnorm2 = float(np.linalg.norm(np.asarray(V, dtype=float), 2)) ** 2
        rep.norm_ratio = opnorm2 / rep.covolume
    if data.tile is not None:
        rep.violations.extend(_tile_violations(data.tile, V, window))
    return rep


def _tile_violations(tile: dict, V, window: Window | None) -> list[str]:
    cells = set(tile)
    out = []
    boundary = {p for p in cells
                if any((p[0] + dx, p[1] + dy) not in cells for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)))}
    bad = sorted(p for p in boundary if tile[p] != 2)
    if bad:
        out.append(f"Lap o != 2 at {len(bad)} tile boundary sites")
    cols = [(V[0][k], V[1][k]) for k in range(3)]
    if _det2(cols[0], cols[1]) == 0:
        return out
    if window is None:
        xs = [p[0] for p in cells]
        ys = [p[1] for p in cells]
        span = max(max(xs) - min(xs), max(ys) - min(ys)) + 1
        window = Window(min(xs) - span, min(ys) - span, 3 * span, 3 * span)
    # translates T + a v1 + b v2 (v3 is dependent) that can touch the window
    v1, v2 = cols[0], cols[1]
    xs = [p[0] for p in cells]
    ys = [p[1] for p in cells]
    box = [(window.x0 - max(xs), window.y0 - max(ys)), (window.x1 - min(xs), window.y0 - max(ys)),
           (window.x0 - max(xs), window.y1 - min(ys)), (window.x1 - min(xs), window.y1 - min(ys))]
    inv = np.linalg.inv(np.array([[v1[0], v2[0]], [v1[1], v2[1]]], dtype=float))
    ab = np.array([inv @ np.array(c, dtype=float) for c in box])
    lo = np.floor(ab.min(axis=0)).astype(int) - 1
    hi = np.ceil(ab.max(axis=0)).astype(int) + 1
    cover: dict = {}
    for a in range(lo[0], hi[0] + 1):
        for b in range(lo[1], hi[1] + 1):
            sx, sy = a * v1[0] + b * v2[0], a * v1[1] + b * v2[1]
            for p in cells:
                q = (p[0] + sx, p[1] + sy)
                if window.contains(q):
                    cover.setdefault(q, []).append(p in boundary)
    missing = sum(1 for q in window.points() if tuple(q) not in cover)
    if missing:
        out.append(f"tile translates miss {missing} window sites")
    interior_overlap = sum(1 for flags in cover.values() if len(flags) > 1 and not all(flags))
    if interior_overlap:
        out.append(f"tile translates overlap off the boundary at {interior_overlap} sites")
    return out


# --------------------------------------------------------------------------
# regions and matching
# --------------------------------------------------------------------------

def ball_offsets(r: int) -> list[tuple[int, int]]:
    """Lattice points of the closed Euclidean ball of radius ``r``."""
    return [(dx, dy) for dx in range(-r, r + 1) for dy in range(-r, r + 1) if dx * dx + dy * dy <= r * r]


def _erode(mask: np.ndarray, r: int) -> np.ndarray:
    if r <= 0:
        return mask.copy()
    H, W = mask.shape
    pad = np.zeros((H + 2 * r, W + 2 * r), dtype=bool)
    pad[r:r + H, r:r + W] = mask
    out = mask.copy()
    for dx, dy in ball_offsets(r):
        out &= pad[r + dy:r + dy + H, r + dx:r + dx + W]
    return out


@dataclass(frozen=True, eq=False)
class Region:
    """A finite set of lattice points held as a boolean mask over a window."""

    window: Window
    mask: np.ndarray
    descriptor: dict = field(default_factory=dict)

    @classmethod
    def from_mask(cls, window: Window, mask: np.ndarray, descriptor: dict | None = None) -> "Region":
        return cls(window, np.asarray(mask, dtype=bool), descriptor or {"kind": "mask"})

    @classmethod
    def box(cls, window: Window) -> "Region":
        return cls(window, np.ones(window.shape, dtype=bool), {"kind": "box"})

    @classmethod
    def polygon(cls, vertices: Sequence, n: int = 1, margin: int = 0) -> "Region":
        """Lattice points strictly inside ``n * polygon``, eroded by ``margin``.

        Vertices may be rationals; membership is decided exactly.
        """
        vs = [(Fraction(x) * n, Fraction(y) * n) for x, y in vertices]
        area2 = sum(vs[i - 1][0] * vs[i][1] - vs[i][0] * vs[i - 1][1] for i in range(len(vs)))
        if area2 == 0:
            raise DomainError("degenerate polygon")
        if area2 < 0:
            vs = vs[::-1]
        x0 = math.floor(min(v[0] for v in vs))
        y0 = math.floor(min(v[1] for v in vs))
        x1 = math.ceil(max(v[0] for v in vs))
        y1 = math.ceil(max(v[1] for v in vs))
        window = Window(x0, y0, x1 - x0 + 1, y1 - y0 + 1)
        X, Y = window.coords()
        mask = np.ones(window.shape, dtype=bool)
        for i in range(len(vs)):
            (ax, ay), (bx, by) = vs[i - 1], vs[i]
            # strict left of a->b, cleared of denominators
            den = math.lcm(ax.denominator, ay.denominator, bx.denominator, by.denominator)
            ex, ey = int((bx - ax) * den), int((by - ay) * den)
            axi, ayi = ax * den, ay * den
            cst = -ex * ayi + ey * axi  # ex (Y den - ay) - ey (X den - ax) > 0
            cst_num, cst_den = cst.numerator, cst.denominator
            val = (ex * den * cst_den) * Y - (ey * den * cst_den) * X + cst_num
            mask &= val > 0
        mask = _erode(mask, margin)
        desc = {"kind": "polygon", "n": n, "margin": margin,
                "vertices": [[str(Fraction(x)), str(Fraction(y))] for x, y in vertices]}
        return cls(window, mask, desc)

    def erode(self, r: int) -> "Region":
        d = dict(self.descriptor)
        d["margin"] = d.get("margin", 0) + r
        return Region(self.window, _erode(self.mask, r), d)

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    def points(self) -> list[LatticePoint]:
        ys, xs = np.nonzero(self.mask)
        return [LatticePoint(int(x) + self.window.x0, int(y) + self.window.y0) for y, x in zip(ys, xs)]


@dataclass(frozen=True)
class MatchReport:
    region: dict
    r: int
    total: int
    matched: int
    fraction: float
    offsets: dict

    def to_json(self) -> dict:
        return {"r": self.r, "total": self.total, "matched": self.matched, "fraction": self.fraction}


def match_at(image: IntField, pattern: PeriodicPattern, x, r: int):
    """Least offset ``y`` (coset representative) with ``s(x+z) = p(y+z)`` on ``B_r``."""
    if r < 1:
        raise DomainError("r must be >= 1")
    x = LatticePoint(int(x[0]), int(x[1]))
    ball = ball_offsets(r)
    win = image.window
    if not all(win.contains((x.x + dx, x.y + dy)) for dx, dy in ball):
        raise DomainError("matching ball leaves the image window")
    svals = np.array([image.values[x.y + dy - win.y0, x.x + dx - win.x0] for dx, dy in ball])
    dx = np.array([b[0] for b in ball])
    dy = np.array([b[1] for b in ball])
    for y in pattern.representatives():
        if np.array_equal(pattern(y[0] + dx, y[1] + dy), svals):
            return LatticePoint(*y)
    return None


def _matched_offsets(image: IntField, pattern: PeriodicPattern, r: int):
    """Per-cell canonical offset index (into ``representatives()``), -1 if none.

    Only cells whose whole ball lies in the window are evaluated.
    """
    win = image.window
    X, Y = win.coords()
    X, Y = np.broadcast_arrays(X, Y)
    reps = pattern.representatives()
    inside = _erode(np.ones(win.shape, dtype=bool), r)
    best = np.full(win.shape, -1, dtype=np.int64)
    # class d: s(w) == p(w + d) for all w in the ball around x; offset y = x + d
    for d in reps:
        agree = image.values == pattern(X + d[0], Y + d[1])
        ok = _erode(agree, r) & inside
        if not ok.any():
            continue
        ri, rj = pattern.reduce(X + d[0], Y + d[1])
        c = pattern.hnf[1][1]
        idx = ri * c + rj  # lexicographic rank of (i, j)
        upd = ok & ((best < 0) | (idx < best))
        best[upd] = idx[upd]
    return best


def match_fraction(image: IntField, pattern: PeriodicPattern, region: Region, r: int,
                   erode: bool = True) -> MatchReport:
    """Fraction of points of ``region`` eroded by ``r`` where the pattern r-matches.

    With ``erode=False`` the region is scored as given; the caller guarantees
    the balls stay inside the image.
    """
    if r < 1:
        raise DomainError("r must be >= 1")
    er = region.erode(r) if erode else region
    if er.count == 0:
        raise DomainError("region is empty after erosion")
    win = image.window
    sub = er.window
    pts_mask = np.zeros(win.shape, dtype=bool)
    ys, xs = np.nonzero(er.mask)
    gx, gy = xs + sub.x0 - win.x0, ys + sub.y0 - win.y0
    valid = (gx >= 0) & (gx < win.width) & (gy >= 0) & (gy < win.height)
    if not valid.all():
        raise DomainError("region is not contained in the image window")
    pts_mask[gy, gx] = True
    best = _matched_offsets(image, pattern, r)
    hit = pts_mask & (best >= 0)
    reps = pattern.representatives()
    hist = {}
    for k, cnt in zip(*np.unique(best[hit], return_counts=True)):
        hist[f"{reps[int(k)][0]},{reps[int(k)][1]}"] = int(cnt)
    total = er.count
    matched = int(hit.sum())
    return MatchReport(er.descriptor, r, total, matched, matched / total, hist)


# --------------------------------------------------------------------------
# empirical extraction
# --------------------------------------------------------------------------

def _restrict(image: IntField, region: Region):
    win = image.window
    vals = np.zeros(region.window.shape, dtype=np.int64)
    inside = np.zeros(region.window.shape, dtype=bool)
    X, Y = region.window.coords()
    X, Y = np.broadcast_arrays(X, Y)
    ok = region.mask & (X >= win.x0) & (X < win.x1) & (Y >= win.y0) & (Y < win.y1)
    vals[ok] = image.values[Y[ok] - win.y0, X[ok] - win.x0]
    inside[ok] = True
    return vals, inside


def _shift_agreement(vals, mask, t):
    """(agreeing pairs, overlapping pairs) for the shift ``t = (tx, ty)``."""
    tx, ty = t
    H, W = vals.shape
    if abs(tx) >= W or abs(ty) >= H:
        return 0, 0
    a = slice(max(0, -ty), H - max(0, ty)), slice(max(0, -tx), W - max(0, tx))
    b = slice(max(0, ty), H - max(0, -ty)), slice(max(0, tx), W - max(0, -tx))
    both = mask[a] & mask[b]
    tot = int(both.sum())
    if tot == 0:
        return 0, 0
    return int((both & (vals[a] == vals[b])).sum()), tot


def detect_period(image: IntField, region: Region, bound: int | None = None,
                  tolerance: float = 0.0, min_overlap: float = 0.5) -> PeriodicPattern | None:
    """Smallest period lattice of the image inside ``region``, or ``None``.

    A shift ``t`` with ``|t|_inf <= bound`` counts as a period when the image
    agrees with its translate on the overlap (exactly, or up to a
    ``tolerance`` fraction of disagreeing pairs).  The overlap must cover at
    least ``min_overlap`` of the region.
    """
    vals, inside = _restrict(image, region)
    count = int(inside.sum())
    if count == 0:
        return None
    ys, xs = np.nonzero(inside)
    diam = max(xs.max() - xs.min(), ys.max() - ys.min()) + 1
    if bound is None:
        bound = max(1, min(12, int(diam) // 8))
    periods = []
    for tx in range(0, bound + 1):
        for ty in range(-bound, bound + 1):
            if tx == 0 and ty <= 0:
                continue
            agree, tot = _shift_agreement(vals, inside, (tx, ty))
            if tot < min_overlap * count:
                continue
            if tot - agree <= tolerance * tot:
                periods.append((tx, ty))
    if not periods:
        return None
    try:
        h = hnf(periods)
    except DomainError:
        return None
    u, w = gauss_reduce(*h)
    pset = set(periods) | {(-p[0], -p[1]) for p in periods}
    if u not in pset or w not in pset:
        return None
    probe = PeriodicPattern(h, np.zeros((h[1][1], h[0][0]), dtype=np.int64))
    X = xs + region.window.x0
    Y = ys + region.window.y0
    i, j = probe.reduce(X, Y)
    v = vals[ys, xs]
    a, c = h[0][0], h[1][1]
    tile = np.zeros((c, a), dtype=np.int64)
    for jj in range(c):
        for ii in range(a):
            sel = (i == ii) & (j == jj)
            if not sel.any():
                return None
            got, cnt = np.unique(v[sel], return_counts=True)
            if len(got) > 1 and tolerance == 0.0:
                return None
            tile[jj, ii] = got[np.argmax(cnt)]  # ties -> smallest value
    return PeriodicPattern((u, w), tile)


def fit_quadratic(field: IntField, region: Region, max_den: int = 10):
    """Least-squares ``x.P x / 2 + b.x + c`` over the region.

    ``P`` is rounded to the nearest rationals with denominator ``<= max_den``
    and ``b, c`` are refitted with ``P`` fixed.  Returns
    ``(P, b, c, residual)`` with ``residual`` the max absolute deviation.
    """
    vals, inside = _restrict(field, region)
    ys, xs = np.nonzero(inside)
    if len(xs) < 6:
        raise DomainError("need at least 6 points")
    X = (xs + region.window.x0).astype(np.float64)
    Y = (ys + region.window.y0).astype(np.float64)
    cx, cy = X.mean(), Y.mean()
    x, y = X - cx, Y - cy
    f = vals[ys, xs].astype(np.float64)
    D = np.column_stack([x * x / 2, x * y, y * y / 2, x, y, np.ones_like(x)])
    if np.linalg.matrix_rank(D) < 6:
        raise DomainError("rank-deficient design")
    coef = np.linalg.lstsq(D, f, rcond=None)[0]
    p11, p12, p22 = (Fraction(float(c)).limit_denominator(max_den) for c in coef[:3])
    P = ((p11, p12), (p12, p22))
    # refit b, c in absolute coordinates with P fixed
    Xi = xs + region.window.x0
    Yi = ys + region.window.y0
    quad = np.array([float(p11 * int(a) * int(a) / 2 + p12 * int(a) * int(b) + p22 * int(b) * int(b) / 2)
                     for a, b in zip(Xi, Yi)])
    D2 = np.column_stack([Xi.astype(float), Yi.astype(float), np.ones(len(Xi))])
    bc = np.linalg.lstsq(D2, f - quad, rcond=None)[0]
    b = (Fraction(float(bc[0])).limit_denominator(max_den), Fraction(float(bc[1])).limit_denominator(max_den))
    c = float(bc[2])
    resid = float(np.abs(f - quad - D2 @ np.array([float(b[0]), float(b[1]), c])).max())
    return P, b, c, resid


# --------------------------------------------------------------------------
# JSON files
# --------------------------------------------------------------------------

def dumps_pattern(p: PeriodicPattern) -> str:
    return json.dumps(p.to_json(), sort_keys=True)


def loads_pattern(s: str) -> PeriodicPattern:
    obj = json.loads(s)
    if not isinstance(obj, dict) or "basis" not in obj or "tile" not in obj:
        raise DomainError("pattern JSON needs 'basis' and 'tile'")
    return PeriodicPattern.from_json(obj)


def dumps_pattern_data(d: PatternData) -> str:
    return json.dumps(d.to_json(), sort_keys=True)


def loads_pattern_data(s: str) -> PatternData:
    return PatternData.from_json(json.loads(s))
