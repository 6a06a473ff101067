"""Exact piecewise-quadratic supersolutions on the square ``(-1, 1)^2``.

Triangle maps are produced by an iterated function system over complex
triples; each map linearly interpolates vertex gradients, later layers
overwrite earlier ones, and the assembled gradient field ``G`` plus
``diag(1, 0) x`` is the gradient of a ``C^1`` function ``v`` on the first
quadrant, extended to the square by reflection and by zero outside.

Everything here is exact: coordinates are :class:`fractions.Fraction` and no
floating point enters a construction, a lookup or a value.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .grid import DomainError, Window

Rat = Fraction
IfsWord = tuple

MAX_DEPTH = 12


@dataclass(frozen=True, slots=True)
class CxPoint:
    re: Fraction
    im: Fraction = Fraction(0)

    @classmethod
    def of(cls, re, im=0) -> "CxPoint":
        return cls(Fraction(re), Fraction(im))

    def __add__(self, o: "CxPoint") -> "CxPoint":
        return CxPoint(self.re + o.re, self.im + o.im)

    def __sub__(self, o: "CxPoint") -> "CxPoint":
        return CxPoint(self.re - o.re, self.im - o.im)

    def __mul__(self, o: "CxPoint") -> "CxPoint":
        return CxPoint(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    def scale(self, k) -> "CxPoint":
        return CxPoint(self.re * k, self.im * k)

    def conj(self) -> "CxPoint":
        return CxPoint(self.re, -self.im)

    def astuple(self) -> tuple[Fraction, Fraction]:
        return (self.re, self.im)


def _cmat(rows, den=1) -> tuple:
    return tuple(tuple(CxPoint(Fraction(a, den), Fraction(b, den)) for a, b in row) for row in rows)


def _apply(m, v) -> tuple:
    return tuple(m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2] for i in range(3))


def _conj_mat(m) -> tuple:
    return tuple(tuple(x.conj() for x in row) for row in m)


Z_ROOT = (CxPoint.of(1), CxPoint.of(1, 1), CxPoint.of(0, 1))
A_ROOT = (CxPoint.of(0), CxPoint.of(-1), CxPoint.of(0, 1))
Q = _cmat([[(3, 0), (0, 0), (0, 0)], [(1, 1), (1, -1), (1, 0)], [(1, -1), (1, 0), (1, 1)]], 3)
S = _cmat([[(1, 0), (1, 1), (1, -1)], [(1, -1), (1, 0), (1, 1)], [(1, 1), (1, -1), (1, 0)]], 3)
# cyclic vertex shift, (R v)_i = v_{i+1}; R^3 = I so the three children differ
R = _cmat([[(0, 0), (1, 0), (0, 0)], [(0, 0), (0, 0), (1, 0)], [(1, 0), (0, 0), (0, 0)]])
Q_BAR = _conj_mat(Q)
S_BAR = _conj_mat(S)


def _rotate(v, k):
    for _ in range(k % 3):
        v = _apply(R, v)
    return v


def _cross(o, a, b) -> Fraction:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def interpolate(z: Sequence[CxPoint], a: Sequence[CxPoint], x: CxPoint) -> CxPoint:
    """Barycentric image of ``x`` under the map sending ``z[k]`` to ``a[k]``."""
    p = [q.astuple() for q in z]
    area2 = _cross(p[0], p[1], p[2])
    if area2 == 0:
        raise DomainError("degenerate triangle")
    xt = x.astuple()
    t0 = _cross(xt, p[1], p[2]) / area2
    t1 = _cross(p[0], xt, p[2]) / area2
    t2 = 1 - t0 - t1
    if t0 < 0 or t1 < 0 or t2 < 0:
        raise DomainError("point lies outside the closed triangle")
    return a[0].scale(t0) + a[1].scale(t1) + a[2].scale(t2)


@dataclass(frozen=True, eq=False)
class TriangleMap:
    z: tuple
    a: tuple
    word: IfsWord
    family: str  # "z" or "w"
    layer: int

    def __post_init__(self):
        if self.area2 == 0:
            raise DomainError(f"degenerate triangle for word {self.word}")
        m = self.matrix
        if m[0][1] != m[1][0]:
            raise DomainError(f"non-symmetric gradient for word {self.word}")

    @cached_property
    def verts(self) -> tuple:
        return tuple(p.astuple() for p in self.z)

    @cached_property
    def area2(self) -> Fraction:
        """Twice the signed area of the domain triangle."""
        p = self.verts
        return _cross(p[0], p[1], p[2])

    @property
    def area(self) -> Fraction:
        return abs(self.area2) / 2

    @cached_property
    def ccw(self) -> tuple:
        v = self.verts
        return v if self.area2 > 0 else (v[0], v[2], v[1])

    @cached_property
    def matrix(self) -> tuple:
        """The 2x2 Jacobian of the interpolating affine map."""
        z, a = self.z, self.a
        d1, d2 = z[1] - z[0], z[2] - z[0]
        e1, e2 = a[1] - a[0], a[2] - a[0]
        det = d1.re * d2.im - d1.im * d2.re
        inv = ((d2.im / det, -d2.re / det), (-d1.im / det, d1.re / det))
        return ((e1.re * inv[0][0] + e2.re * inv[1][0], e1.re * inv[0][1] + e2.re * inv[1][1]),
                (e1.im * inv[0][0] + e2.im * inv[1][0], e1.im * inv[0][1] + e2.im * inv[1][1]))

    @cached_property
    def offset(self) -> tuple:
        m = self.matrix
        z0, a0 = self.z[0], self.a[0]
        return (a0.re - m[0][0] * z0.re - m[0][1] * z0.im,
                a0.im - m[1][0] * z0.re - m[1][1] * z0.im)

    @cached_property
    def bbox(self) -> tuple:
        xs = [p[0] for p in self.verts]
        ys = [p[1] for p in self.verts]
        return (min(xs), min(ys), max(xs), max(ys))

    def contains(self, x) -> bool:
        """Closed-triangle membership of the point ``x = (x1, x2)``."""
        a, b, c = self.ccw
        return _cross(a, b, x) >= 0 and _cross(b, c, x) >= 0 and _cross(c, a, x) >= 0

    def __call__(self, x) -> tuple:
        m, d = self.matrix, self.offset
        return (m[0][0] * x[0] + m[0][1] * x[1] + d[0], m[1][0] * x[0] + m[1][1] * x[1] + d[1])

    @property
    def label(self) -> str:
        return "".join(map(str, self.word))


BASE_MATRIX = ((Fraction(0), Fraction(0)), (Fraction(0), Fraction(1)))


@dataclass(frozen=True)
class QuadraticPiece:
    """``v(x) = x.P x / 2 + b.x + c`` on the visible part of ``region``."""

    family: str
    word: IfsWord
    P: tuple
    b: tuple
    c: Fraction | None
    region: tuple | None  # triangle vertices, None for the base piece
    visible: bool = True

    @property
    def trace(self) -> Fraction:
        return self.P[0][0] + self.P[1][1]

    def value(self, x) -> Fraction:
        P, b = self.P, self.b
        q = (P[0][0] * x[0] * x[0] + 2 * P[0][1] * x[0] * x[1] + P[1][1] * x[1] * x[1]) / 2
        return q + b[0] * x[0] + b[1] * x[1] + (self.c or 0)

    def to_json(self) -> dict:
        s = str
        return {
            "word": "".join(map(str, self.word)),
            "family": self.family,
            "P": [[s(self.P[0][0]), s(self.P[0][1])], [s(self.P[1][0]), s(self.P[1][1])]],
            "b": [s(self.b[0]), s(self.b[1])],
            "c": None if self.c is None else s(self.c),
            "vertices": [] if self.region is None else [[s(x), s(y)] for x, y in self.region],
        }


def ifs_generate(depth: int) -> "SuperSolution":
    """Build the depth-``depth`` supersolution from the triangle recurrences.

    Children: ``z_{sk} = Q R^k z_s`` and ``a_{sk} = conj(Q) R^k a_s``; the
    overwrite triangles of a node are ``w_s = S z_s`` with values
    ``b_s = conj(S) a_s``.
    """
    if not 0 <= depth <= MAX_DEPTH:
        raise DomainError(f"depth must be in [0, {MAX_DEPTH}], got {depth}")
    patches: list[TriangleMap] = []
    level = {(): (Z_ROOT, A_ROOT)}
    for k in range(depth):
        for word in sorted(level):
            z, a = level[word]
            patches.append(TriangleMap(_apply(S, z), _apply(S_BAR, a), word, "w", k))
        nxt = {}
        for word, (z, a) in level.items():
            for j in (1, 2, 3):
                nxt[word + (j,)] = (_apply(Q, _rotate(z, j)), _apply(Q_BAR, _rotate(a, j)))
        level = nxt
    for word in sorted(level):
        z, a = level[word]
        patches.append(TriangleMap(z, a, word, "z", depth))
    return SuperSolution(depth, tuple(patches))


def fold(x) -> tuple[Fraction, Fraction]:
    return (abs(Fraction(x[0])), abs(Fraction(x[1])))


@dataclass(frozen=True, eq=False)
class SuperSolution:
    """Patches in ascending precedence: w layers ``0..depth-1``, then the z layer.

    Within a layer patches are ordered by word, so on shared edges the
    lexicographically largest word wins; the base map ``diag(0, 1) x`` applies
    wherever no patch does.
    """

    depth: int
    patches: tuple
    _rows: dict = field(default_factory=dict, repr=False)

    GRID = 81

    @cached_property
    def _index(self) -> dict:
        g = self.GRID
        cells: dict = {}
        for rank, t in enumerate(self.patches):
            x0, y0, x1, y1 = t.bbox
            for i in range(_cell(x0, g), _cell(x1, g) + 1):
                for j in range(_cell(y0, g), _cell(y1, g) + 1):
                    cells.setdefault((i, j), []).append(rank)
        for v in cells.values():
            v.reverse()
        return cells

    @cached_property
    def _ybounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([float(t.bbox[1]) for t in self.patches]) - 1e-9
        hi = np.array([float(t.bbox[3]) for t in self.patches]) + 1e-9
        return lo, hi

    def owner_rank(self, x) -> int:
        """Rank of the patch owning the quadrant point ``x``; -1 for the base map."""
        g = self.GRID
        for rank in self._index.get((_cell(x[0], g), _cell(x[1], g)), ()):
            if self.patches[rank].contains(x):
                return rank
        return -1

    def owner(self, x) -> TriangleMap | None:
        r = self.owner_rank(x)
        return None if r < 0 else self.patches[r]

    def map_at(self, x) -> tuple:
        """``G_n(x)`` for ``x`` in the closed first quadrant square."""
        t = self.owner(x)
        if t is None:
            return (Fraction(0), Fraction(x[1]))
        return t(x)

    def _d1(self, rank: int, t: Fraction, y: Fraction) -> Fraction:
        # x1-derivative of v along a row, owner fixed
        if rank < 0:
            return t
        p = self.patches[rank]
        m, d = p.matrix, p.offset
        return m[0][0] * t + m[0][1] * y + d[0] + t

    def row_profile(self, y: Fraction):
        """Breakpoints, owners and values of ``v(., y)`` on ``[0, 1]``.

        Between consecutive breakpoints the owner is constant, so the
        x1-derivative is affine and the trapezoid rule integrates it exactly
        from the boundary value ``v(1, y) = 0``.
        """
        y = Fraction(y)
        hit = self._rows.get(y)
        if hit is not None:
            return hit
        lo, hi = self._ybounds
        yf = float(y)
        cand = np.flatnonzero((lo <= yf) & (hi >= yf))
        spans = []
        pts = {Fraction(0), Fraction(1)}
        for rank in cand.tolist():
            iv = _row_interval(self.patches[rank], y)
            if iv is not None:
                spans.append((rank, iv[0], iv[1]))
                pts.add(iv[0])
                pts.add(iv[1])
        breaks = sorted(p for p in pts if 0 <= p <= 1)
        owners = [-1] * (len(breaks) - 1)
        for rank, a, b in spans:  # ascending rank: later overwrite earlier
            i = bisect.bisect_left(breaks, max(a, Fraction(0)))
            k = bisect.bisect_left(breaks, min(b, Fraction(1)))
            for s in range(i, k):
                owners[s] = rank
        vals = [Fraction(0)] * len(breaks)
        for s in range(len(breaks) - 2, -1, -1):
            a, b = breaks[s], breaks[s + 1]
            r = owners[s]
            vals[s] = vals[s + 1] - (self._d1(r, a, y) + self._d1(r, b, y)) * (b - a) / 2
        prof = (breaks, owners, vals)
        self._rows[y] = prof
        return prof

    def _row_value(self, prof, t: Fraction, y: Fraction) -> Fraction:
        breaks, owners, vals = prof
        s = min(bisect.bisect_right(breaks, t) - 1, len(owners) - 1)
        b = breaks[s + 1]
        r = owners[s]
        return vals[s + 1] - (self._d1(r, t, y) + self._d1(r, b, y)) * (b - t) / 2

    def clear_cache(self) -> None:
        self._rows.clear()


def _cell(v: Fraction, g: int) -> int:
    c = (v * g).__floor__()
    return 0 if c < 0 else (g - 1 if c >= g else c)


def _row_interval(t: TriangleMap, y: Fraction):
    """Closed interval of x1 where the row ``x2 = y`` meets the triangle."""
    ts = []
    v = t.verts
    for i in range(3):
        (px, py), (qx, qy) = v[i], v[(i + 1) % 3]
        if py == qy:
            if py == y:
                ts.extend((px, qx))
            continue
        if (py - y) * (qy - y) <= 0:
            ts.append(px + (y - py) * (qx - px) / (qy - py))
    if len(ts) < 2:
        return None
    a, b = min(ts), max(ts)
    if a == b:
        return None
    return a, b


def _as_point(x) -> tuple[Fraction, Fraction]:
    if isinstance(x, CxPoint):
        return x.astuple()
    return (Fraction(x[0]), Fraction(x[1]))


def gradient_at(ss: SuperSolution, x) -> CxPoint:
    """Exact gradient of ``v`` at ``x``; zero outside the closed square.

    Computed at the folded point ``(|x1|, |x2|)`` as ``G_n + (x1, 0)`` and then
    reflected back, so it is the true gradient of the reflected function.
    """
    x = _as_point(x)
    if abs(x[0]) > 1 or abs(x[1]) > 1:
        return CxPoint.of(0, 0)
    f = fold(x)
    g = ss.map_at(f)
    gx, gy = g[0] + f[0], g[1]
    if x[0] < 0:
        gx = -gx
    if x[1] < 0:
        gy = -gy
    return CxPoint(gx, gy)


def value_at(ss: SuperSolution, x) -> Fraction:
    """Exact ``v(x)``: zero off the open square, else integrated along the row."""
    x = _as_point(x)
    f = fold(x)
    if f[0] >= 1 or f[1] >= 1:
        return Fraction(0)
    prof = ss.row_profile(f[1])
    return ss._row_value(prof, f[0], f[1])


def value_grid(ss: SuperSolution, xs: Sequence, ys: Sequence) -> list[list[Fraction]]:
    """Exact values on the tensor grid ``xs x ys`` (rows indexed by ``ys``)."""
    fx = [abs(Fraction(v)) for v in xs]
    out = []
    for yv in ys:
        y = abs(Fraction(yv))
        if y >= 1:
            out.append([Fraction(0)] * len(fx))
            continue
        prof = ss.row_profile(y)
        out.append([Fraction(0) if t >= 1 else ss._row_value(prof, t, y) for t in fx])
    return out


def hessian(t: TriangleMap | None) -> tuple:
    m = BASE_MATRIX if t is None else t.matrix
    return ((m[0][0] + 1, m[0][1]), (m[1][0], m[1][1]))


def _visible_point(ss: SuperSolution, rank: int):
    t = ss.patches[rank]
    v = t.verts
    for m in (3, 6, 12, 24):
        for i in range(1, m):
            for j in range(1, m - i):
                k = m - i - j
                p = ((v[0][0] * i + v[1][0] * j + v[2][0] * k) / m,
                     (v[0][1] * i + v[1][1] * j + v[2][1] * k) / m)
                if 0 < p[0] < 1 and 0 < p[1] < 1 and ss.owner_rank(p) == rank:
                    return p
    frags = ss_visible(ss)[rank]
    if frags:
        big = max(frags, key=_poly_area)
        return _centroid(big)
    return None


def pieces(ss: SuperSolution, constants: bool = True) -> list[QuadraticPiece]:
    """Base piece followed by one quadratic piece per patch, in precedence order.

    ``P`` is the patch Jacobian plus ``diag(1, 0)``, ``b`` the affine offset of
    the patch map and ``c`` is fixed by one exact value at a visible point.
    """
    out = []
    base_c = None
    if constants:
        p = _base_point(ss)
        base_c = None if p is None else value_at(ss, p) - (p[0] * p[0] + p[1] * p[1]) / 2
    out.append(QuadraticPiece("base", (), hessian(None), (Fraction(0), Fraction(0)), base_c, None))
    for rank, t in enumerate(ss.patches):
        P = hessian(t)
        b = t.offset
        c = None
        visible = True
        if constants:
            p = _visible_point(ss, rank)
            if p is None:
                visible = False
            else:
                q = QuadraticPiece(t.family, t.word, P, b, Fraction(0), t.verts)
                c = value_at(ss, p) - q.value(p)
        out.append(QuadraticPiece(t.family, t.word, P, b, c, t.verts, visible))
    return out


def _base_point(ss: SuperSolution):
    for k in range(1, 200):
        p = (Fraction(1, 3 * k + 1), Fraction(1, 3 * k + 2))
        if ss.owner_rank(p) < 0:
            return p
    return None


# --------------------------------------------------------------------------
# exact visible regions
# --------------------------------------------------------------------------

def _poly_area(poly) -> Fraction:
    s = Fraction(0)
    for i in range(len(poly)):
        (ax, ay), (bx, by) = poly[i - 1], poly[i]
        s += ax * by - bx * ay
    return abs(s) / 2


def _centroid(poly):
    n = len(poly)
    return (sum(p[0] for p in poly) / n, sum(p[1] for p in poly) / n)


def _clip(poly, a, b, c):
    """Part of convex ``poly`` with ``a x + b y + c >= 0``."""
    out = []
    n = len(poly)
    vals = [a * p[0] + b * p[1] + c for p in poly]
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        vp, vq = vals[i], vals[(i + 1) % n]
        if vp >= 0:
            out.append(p)
        if (vp > 0 and vq < 0) or (vp < 0 and vq > 0):
            s = vp / (vp - vq)
            out.append((p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])))
    return out if len(out) >= 3 else []


def _halfplanes(tri):
    a, b, c = tri  # counter-clockwise
    hs = []
    for p, q in ((a, b), (b, c), (c, a)):
        # left of p->q:  (q-p) x (x-p) >= 0
        hs.append((-(q[1] - p[1]), q[0] - p[0], (q[1] - p[1]) * p[0] - (q[0] - p[0]) * p[1]))
    return hs


def _subtract(poly, tri_h):
    """Convex ``poly`` minus a convex triangle, as convex pieces."""
    out = []
    rest = poly
    for a, b, c in tri_h:
        outside = _clip(rest, -a, -b, -c)
        if outside and _poly_area(outside) > 0:
            out.append(outside)
        rest = _clip(rest, a, b, c)
        if not rest:
            break
    return out


def _bbox(poly):
    xs = [p[0] for p in poly]
    ys = [p[1] for p in poly]
    return (min(xs), min(ys), max(xs), max(ys))


def _overlap(b1, b2) -> bool:
    return b1[0] < b2[2] and b2[0] < b1[2] and b1[1] < b2[3] and b2[1] < b1[3]


def subtract_triangles(poly, triangles: Iterable[TriangleMap], cells: int = 27) -> list:
    """Exact decomposition of ``poly`` minus the union of ``triangles``.

    The polygon is first cut along a ``cells x cells`` grid so each subtraction
    only touches nearby fragments.
    """
    g = cells
    frags: dict = {}
    pb = _bbox(poly)
    for i in range(_cell(pb[0], g), _cell(pb[2], g) + 1):
        for j in range(_cell(pb[1], g), _cell(pb[3], g) + 1):
            piece = _clip(poly, Fraction(1), Fraction(0), -Fraction(i, g))
            piece = _clip(piece, Fraction(-1), Fraction(0), Fraction(i + 1, g)) if piece else []
            piece = _clip(piece, Fraction(0), Fraction(1), -Fraction(j, g)) if piece else []
            piece = _clip(piece, Fraction(0), Fraction(-1), Fraction(j + 1, g)) if piece else []
            if piece and _poly_area(piece) > 0:
                frags[(i, j)] = [(piece, _bbox(piece))]
    for t in triangles:
        tb = t.bbox
        hs = None
        for i in range(_cell(tb[0], g), _cell(tb[2], g) + 1):
            for j in range(_cell(tb[1], g), _cell(tb[3], g) + 1):
                cell = frags.get((i, j))
                if not cell:
                    continue
                new = []
                for piece, bb in cell:
                    if not _overlap(bb, tb):
                        new.append((piece, bb))
                        continue
                    if hs is None:
                        hs = _halfplanes(t.ccw)
                    for q in _subtract(piece, hs):
                        new.append((q, _bbox(q)))
                frags[(i, j)] = new
    return [p for cell in frags.values() for p, _ in cell]


def ss_visible(ss: SuperSolution) -> list:
    """Visible convex fragments of every patch (index = precedence rank)."""
    cached = ss.__dict__.get("_visible")
    if cached is not None:
        return cached
    layers: dict = {}
    for rank, t in enumerate(ss.patches):
        layers.setdefault(t.layer, []).append(rank)
    out = []
    for rank, t in enumerate(ss.patches):
        later = [ss.patches[r] for L, rs in layers.items() if L > t.layer for r in rs
                 if _overlap(ss.patches[r].bbox, t.bbox)]
        out.append(subtract_triangles(list(t.ccw), later, cells=_cells_for(t)) if later else [list(t.ccw)])
    ss.__dict__["_visible"] = out
    return out


def _cells_for(t: TriangleMap) -> int:
    w = max(t.bbox[2] - t.bbox[0], t.bbox[3] - t.bbox[1])
    return max(1, min(81, int(27 * w) + 1))


def visible_areas(ss: SuperSolution) -> list[Fraction]:
    return [sum((_poly_area(p) for p in frags), Fraction(0)) for frags in ss_visible(ss)]


def base_visible_area(ss: SuperSolution) -> Fraction:
    """Area of the unit square left to the base map, by direct subtraction."""
    sq = [(Fraction(0), Fraction(0)), (Fraction(1), Fraction(0)),
          (Fraction(1), Fraction(1)), (Fraction(0), Fraction(1))]
    frags = subtract_triangles(sq, ss.patches, cells=27)
    return sum((_poly_area(p) for p in frags), Fraction(0))


def sample_field(ss: SuperSolution, n: int, window: Window, exact: bool = False):
    """``n^2 v(p / n)`` at every lattice point ``p`` of the window.

    Float64 by default (row-major, rows increasing y); ``exact=True`` returns
    a list of rows of Fractions instead.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    xs = [Fraction(x, n) for x in range(window.x0, window.x1)]
    ys = [Fraction(y, n) for y in range(window.y0, window.y1)]
    grid = value_grid(ss, xs, ys)
    n2 = n * n
    if exact:
        return [[v * n2 for v in row] for row in grid]
    return np.array([[float(v * n2) for v in row] for row in grid], dtype=np.float64).reshape(window.shape)
