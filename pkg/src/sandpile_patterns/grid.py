"""Lattice geometry, integer fields and the discrete Laplacian."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, NamedTuple, Sequence

import numpy as np


class DomainError(ValueError):
    """An input violates an operation's precondition."""


class LatticePoint(NamedTuple):
    x: int
    y: int


@dataclass(frozen=True)
class Window:
    x0: int
    y0: int
    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise DomainError(f"window must be at least 1x1, got {self.width}x{self.height}")

    @property
    def shape(self) -> tuple[int, int]:
        """Array shape ``(height, width)``; rows are increasing y."""
        return (self.height, self.width)

    @property
    def x1(self) -> int:
        return self.x0 + self.width

    @property
    def y1(self) -> int:
        return self.y0 + self.height

    def contains(self, p) -> bool:
        return self.x0 <= p[0] < self.x1 and self.y0 <= p[1] < self.y1

    def contains_window(self, other: "Window") -> bool:
        return (self.x0 <= other.x0 and self.y0 <= other.y0
                and other.x1 <= self.x1 and other.y1 <= self.y1)

    def shrink(self, k: int = 1) -> "Window":
        return Window(self.x0 + k, self.y0 + k, self.width - 2 * k, self.height - 2 * k)

    def grow(self, k: int = 1) -> "Window":
        return Window(self.x0 - k, self.y0 - k, self.width + 2 * k, self.height + 2 * k)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Broadcastable ``(X, Y)`` integer coordinate grids of the window."""
        xs = np.arange(self.x0, self.x1, dtype=np.int64)
        ys = np.arange(self.y0, self.y1, dtype=np.int64)
        return xs[None, :], ys[:, None]

    def points(self) -> Iterator[LatticePoint]:
        for y in range(self.y0, self.y1):
            for x in range(self.x0, self.x1):
                yield LatticePoint(x, y)


@dataclass(frozen=True, eq=False)
class IntField:
    """Integer lattice function stored on a window, zero outside it."""

    window: Window
    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.int64)
        if vals.shape != self.window.shape:
            raise DomainError(f"values shape {vals.shape} does not match window {self.window.shape}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, window: Window) -> "IntField":
        return cls(window, np.zeros(window.shape, dtype=np.int64))

    def __getitem__(self, p) -> int:
        x, y = p
        w = self.window
        if w.x0 <= x < w.x1 and w.y0 <= y < w.y1:
            return int(self.values[y - w.y0, x - w.x0])
        return 0

    def __eq__(self, other):
        if not isinstance(other, IntField):
            return NotImplemented
        return self.window == other.window and np.array_equal(self.values, other.values)

    def crop(self, window: Window) -> "IntField":
        """Restrict/extend to ``window`` using the zero-exterior rule."""
        out = np.zeros(window.shape, dtype=np.int64)
        w = self.window
        xa, xb = max(w.x0, window.x0), min(w.x1, window.x1)
        ya, yb = max(w.y0, window.y0), min(w.y1, window.y1)
        if xa < xb and ya < yb:
            out[ya - window.y0:yb - window.y0, xa - window.x0:xb - window.x0] = \
                self.values[ya - w.y0:yb - w.y0, xa - w.x0:xb - w.x0]
        return IntField(window, out)


@dataclass(frozen=True)
class ShapeSpec:
    """A convex planar domain.

    ``unit-square`` is ``(0,1)^2``; ``rectangle`` takes ``vertices`` as the two
    opposite corners ``(xmin, ymin), (xmax, ymax)``; ``polygon`` takes its
    vertices in either orientation.  All coordinates are exact rationals and the
    domain is scaled about the origin (``n * Omega``) with no translation.
    """

    kind: str
    vertices: tuple = ()

    def __post_init__(self):
        if self.kind not in ("unit-square", "rectangle", "polygon"):
            raise DomainError(f"unknown shape kind {self.kind!r}")
        verts = tuple((Fraction(x), Fraction(y)) for x, y in self.vertices)
        object.__setattr__(self, "vertices", verts)

    @classmethod
    def unit_square(cls) -> "ShapeSpec":
        return cls("unit-square")

    @classmethod
    def square2(cls) -> "ShapeSpec":
        """The square ``(-1, 1)^2``."""
        return cls("rectangle", ((-1, -1), (1, 1)))

    def polygon(self) -> list[tuple[Fraction, Fraction]]:
        """Counter-clockwise vertex list; raises on degenerate or non-convex input."""
        if self.kind == "unit-square":
            pts = [(0, 0), (1, 0), (1, 1), (0, 1)]
        elif self.kind == "rectangle":
            if len(self.vertices) != 2:
                raise DomainError("rectangle needs exactly two corner points")
            (ax, ay), (bx, by) = self.vertices
            xa, xb = sorted((ax, bx))
            ya, yb = sorted((ay, by))
            pts = [(xa, ya), (xb, ya), (xb, yb), (xa, yb)]
        else:
            pts = list(self.vertices)
        pts = [(Fraction(x), Fraction(y)) for x, y in pts]
        if len(pts) < 3:
            raise DomainError("polygon needs at least three vertices")
        area2 = sum(pts[i - 1][0] * pts[i][1] - pts[i][0] * pts[i - 1][1] for i in range(len(pts)))
        if area2 == 0:
            raise DomainError("degenerate shape (zero area)")
        if area2 < 0:
            area2 = -area2
            pts.reverse()
        k = len(pts)
        turns = []
        for i in range(k):
            (ax, ay), (bx, by), (cx, cy) = pts[i], pts[(i + 1) % k], pts[(i + 2) % k]
            turns.append((bx - ax) * (cy - by) - (by - ay) * (cx - bx))
        if any(t < 0 for t in turns):
            raise DomainError("polygon must be convex")
        # all-left turns with total turning 2*pi means the polygon is simple
        turning = 0.0
        for i in range(k):
            (ax, ay), (bx, by), (cx, cy) = pts[i - 1], pts[i], pts[(i + 1) % k]
            e1 = (float(bx - ax), float(by - ay))
            e2 = (float(cx - bx), float(cy - by))
            turning += math.atan2(e1[0] * e2[1] - e1[1] * e2[0], e1[0] * e2[0] + e1[1] * e2[1])
        if abs(turning - 2 * math.pi) > 1e-6:
            raise DomainError("polygon must be simple")
        return pts


@dataclass(frozen=True, eq=False)
class DomainMask:
    window: Window
    member: np.ndarray
    n: int
    shape: ShapeSpec | None = field(default=None)

    def __post_init__(self):
        m = np.ascontiguousarray(self.member, dtype=np.bool_)
        if m.shape != self.window.shape:
            raise DomainError("member array does not match window")
        if m.any():
            if m[0, :].any() or m[-1, :].any() or m[:, 0].any() or m[:, -1].any():
                raise DomainError("mask window needs a one-cell margin of non-members")
        object.__setattr__(self, "member", m)

    @classmethod
    def from_points(cls, points: Sequence, n: int = 1, shape: ShapeSpec | None = None) -> "DomainMask":
        pts = [tuple(map(int, p)) for p in points]
        if not pts:
            return cls(Window(0, 0, 1, 1), np.zeros((1, 1), np.bool_), n, shape)
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        win = Window(min(xs) - 1, min(ys) - 1, max(xs) - min(xs) + 3, max(ys) - min(ys) + 3)
        mem = np.zeros(win.shape, np.bool_)
        for x, y in pts:
            mem[y - win.y0, x - win.x0] = True
        return cls(win, mem, n, shape)

    @property
    def count(self) -> int:
        return int(self.member.sum())

    def points(self) -> list[LatticePoint]:
        ys, xs = np.nonzero(self.member)
        return [LatticePoint(int(x) + self.window.x0, int(y) + self.window.y0) for y, x in zip(ys, xs)]

    def contains(self, p) -> bool:
        w = self.window
        if not w.contains(p):
            return False
        return bool(self.member[p[1] - w.y0, p[0] - w.x0])

    def diameter_sq(self) -> int:
        """Squared Euclidean diameter of the member set (exact)."""
        ys, xs = np.nonzero(self.member)
        if xs.size == 0:
            return 0
        # the diameter is attained between convex hull vertices
        hull = _hull(np.stack([xs, ys], axis=1).astype(np.int64))
        d = hull[:, None, :] - hull[None, :, :]
        return int((d * d).sum(axis=2).max())


def _hull(pts: np.ndarray) -> np.ndarray:
    """Monotone-chain convex hull of integer points."""
    p = sorted(set(map(tuple, pts.tolist())))
    if len(p) <= 2:
        return np.array(p, dtype=np.int64)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for q in p:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], q) <= 0:
            lower.pop()
        lower.append(q)
    for q in reversed(p):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], q) <= 0:
            upper.pop()
        upper.append(q)
    return np.array(lower[:-1] + upper[:-1], dtype=np.int64)


def laplacian_at(field: IntField, p) -> int:
    x, y = p
    return (field[(x + 1, y)] + field[(x - 1, y)] + field[(x, y + 1)] + field[(x, y - 1)]
            - 4 * field[(x, y)])


def _laplacian_array(u: np.ndarray) -> np.ndarray:
    """Laplacian of a zero-padded array, same shape as ``u``."""
    pad = np.pad(u, 1)
    return pad[:-2, 1:-1] + pad[2:, 1:-1] + pad[1:-1, :-2] + pad[1:-1, 2:] - 4 * u


def laplacian_field(field: IntField, window: Window | None = None) -> IntField:
    window = field.window if window is None else window
    if not field.window.contains_window(window):
        raise DomainError("laplacian window must lie inside the field window")
    lap = _laplacian_array(field.values)
    w = field.window
    return IntField(window, lap[window.y0 - w.y0:window.y1 - w.y0, window.x0 - w.x0:window.x1 - w.x0])


def build_mask(shape: ShapeSpec, n: int) -> DomainMask:
    """Lattice sites ``p`` with ``p / n`` strictly inside the shape."""
    if n < 1:
        raise DomainError("scale n must be >= 1")
    poly = shape.polygon()
    den = math.lcm(*(v.denominator for xy in poly for v in xy))
    # scaled integer vertices of (den * n) * Omega; test den * p strictly inside
    verts = [(int(x * den) * n, int(y * den) * n) for x, y in poly]
    xs_v = [v[0] for v in verts]
    ys_v = [v[1] for v in verts]
    xlo, xhi = math.floor(min(xs_v) / den), math.ceil(max(xs_v) / den)
    ylo, yhi = math.floor(min(ys_v) / den), math.ceil(max(ys_v) / den)
    win = Window(xlo - 1, ylo - 1, xhi - xlo + 3, yhi - ylo + 3)
    X, Y = win.coords()
    big = max(abs(c) for v in verts for c in v) + den * (max(abs(xlo), abs(xhi), abs(ylo), abs(yhi)) + 2)
    if big * big > 2 ** 61:
        X, Y = X.astype(object), Y.astype(object)
    X, Y = X * den, Y * den
    inside = np.ones(win.shape, dtype=bool)
    k = len(verts)
    for i in range(k):
        (ax, ay), (bx, by) = verts[i], verts[(i + 1) % k]
        inside &= ((bx - ax) * (Y - ay) - (by - ay) * (X - ax)) > 0
    ys, xs = np.nonzero(inside)
    if xs.size == 0:
        return DomainMask(Window(0, 0, 1, 1), np.zeros((1, 1), bool), n, shape)
    tight = Window(int(xs.min()) + win.x0 - 1, int(ys.min()) + win.y0 - 1,
                   int(xs.max() - xs.min()) + 3, int(ys.max() - ys.min()) + 3)
    mem = np.zeros(tight.shape, bool)
    mem[ys - (tight.y0 - win.y0), xs - (tight.x0 - win.x0)] = True
    return DomainMask(tight, mem, n, shape)


def cutoff_quadratic(window: Window) -> np.ndarray:
    """``x1 (x1 + 1) / 2`` on the window: integer valued with Laplacian 1."""
    X, Y = window.coords()
    q = X * (X + 1) // 2
    return np.broadcast_to(q, window.shape).copy()


def shift_cutoff(field: IntField, alpha: int) -> IntField:
    return IntField(field.window, field.values + int(alpha) * cutoff_quadratic(field.window))
