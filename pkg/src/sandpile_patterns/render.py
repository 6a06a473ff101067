"""PPM/PGM raster export of Laplacian fields and continuum piece maps."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .continuum import SuperSolution, hessian
from .grid import DomainError, IntField

BLACK = (0, 0, 0)


@dataclass(frozen=True)
class Palette:
    colors: dict = field(default_factory=lambda: {
        -1: (0, 0, 255),
        0: (0, 255, 255),
        1: (255, 255, 0),
        2: (255, 0, 0),
    })
    default: tuple = BLACK

    def __call__(self, v: int) -> tuple:
        return self.colors.get(int(v), self.default)

    def lut(self, values: np.ndarray) -> np.ndarray:
        """RGB array of shape ``values.shape + (3,)``."""
        out = np.empty(values.shape + (3,), dtype=np.uint8)
        out[...] = self.default
        for k, rgb in self.colors.items():
            out[values == k] = rgb
        return out


SANDPILE = Palette()
GRAY = Palette({-1: (0, 0, 0), 0: (85, 85, 85), 1: (170, 170, 170), 2: (255, 255, 255)}, (255, 0, 255))
PALETTES = {"sandpile": SANDPILE, "gray": GRAY}


@dataclass(frozen=True, eq=False)
class Raster:
    """RGB image; row 0 is the top row."""

    rgb: np.ndarray  # (h, w, 3) uint8

    @property
    def width(self) -> int:
        return self.rgb.shape[1]

    @property
    def height(self) -> int:
        return self.rgb.shape[0]

    def __eq__(self, other):
        return isinstance(other, Raster) and np.array_equal(self.rgb, other.rgb)


def render_field(f: IntField, palette: Palette = SANDPILE) -> Raster:
    """One pixel per cell; image row ``i`` is lattice row ``y0 + i``."""
    return Raster(np.ascontiguousarray(palette.lut(f.values)))


def render_pieces(ss: SuperSolution, resolution: int, palette: Palette = SANDPILE) -> Raster:
    """Colour each pixel of ``(0, 1)^2`` by ``round(trace P)`` of the piece owning its centre.

    Pixel ``(i, j)`` has centre ``((2j + 1) / 2N, (2i + 1) / 2N)``.  Ownership
    is decided with exact integer arithmetic after scaling by ``2N * 3^(d+1)``.
    """
    N = int(resolution)
    if N < 16:
        raise DomainError("resolution must be >= 16")
    D = 3 ** (ss.depth + 1)
    S = 2 * N * D
    # trace per owner (-1 = base) rounded half up
    traces = [hessian(None)] + [hessian(t) for t in ss.patches]
    tr = np.array([_round(h[0][0] + h[1][1]) for h in traces], dtype=np.int64)
    owner = np.full((N, N), -1, dtype=np.int64)
    # products of two scaled coordinates must fit in int64, else use Python ints
    dt = np.int64 if 4 * S * S < 2 ** 62 else object
    c = (2 * np.arange(N, dtype=np.int64) + 1).astype(dt) * D  # centre coordinate times S
    CX = c[None, :]
    CY = c[:, None]
    for rank, t in enumerate(ss.patches):
        (ax, ay), (bx, by), (cx, cy) = [(_exact(x * S), _exact(y * S)) for x, y in t.ccw]
        x0, y0, x1, y1 = (int(v * S) for v in t.bbox)
        j0 = max(0, (x0 // D - 1) // 2)
        j1 = min(N, (x1 // D + 1) // 2 + 1)
        i0 = max(0, (y0 // D - 1) // 2)
        i1 = min(N, (y1 // D + 1) // 2 + 1)
        if j0 >= j1 or i0 >= i1:
            continue
        X, Y = CX[:, j0:j1], CY[i0:i1, :]
        inside = ((bx - ax) * (Y - ay) - (by - ay) * (X - ax) >= 0) \
            & ((cx - bx) * (Y - by) - (cy - by) * (X - bx) >= 0) \
            & ((ax - cx) * (Y - cy) - (ay - cy) * (X - cx) >= 0)
        owner[i0:i1, j0:j1][inside] = rank
    return Raster(np.ascontiguousarray(palette.lut(tr[owner + 1])))


def _exact(q: Fraction) -> int:
    if q.denominator != 1:
        raise DomainError("vertex is not on the render lattice")
    return q.numerator


def _round(q: Fraction) -> int:
    return int((q + Fraction(1, 2)).__floor__())


def encode_ppm(img: Raster) -> bytes:
    return f"P6\n{img.width} {img.height}\n255\n".encode() + img.rgb.tobytes()


_HEADER = re.compile(rb"(P[56])\n((?:#[^\n]*\n)*)(\d+) (\d+)\n(\d+)\n")


def decode_ppm(data: bytes) -> Raster:
    m = _HEADER.match(data)
    if not m or m.group(1) != b"P6":
        raise DomainError("not a binary PPM (P6) image")
    w, h, mx = int(m.group(3)), int(m.group(4)), int(m.group(5))
    if mx != 255:
        raise DomainError("only maxval 255 is supported")
    body = data[m.end():]
    if len(body) != 3 * w * h:
        raise DomainError("PPM payload size mismatch")
    return Raster(np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3).copy())


def encode_pgm(values: np.ndarray, lo: float | None = None, hi: float | None = None) -> bytes:
    """Grey map of a real field; ``gray = round(255 (v - lo) / (hi - lo))``.

    The affine scaling is recorded in a header comment.
    """
    v = np.asarray(values, dtype=np.float64)
    lo = float(v.min()) if lo is None else float(lo)
    hi = float(v.max()) if hi is None else float(hi)
    span = hi - lo if hi > lo else 1.0
    g = np.clip(np.rint(255.0 * (v - lo) / span), 0, 255).astype(np.uint8)
    h, w = g.shape
    head = f"P5\n# gray = 255 * (value - {lo!r}) / {span!r}\n{w} {h}\n255\n"
    return head.encode() + g.tobytes()


def decode_pgm(data: bytes) -> tuple[np.ndarray, str]:
    """Return the grey bytes and the header comment text."""
    m = _HEADER.match(data)
    if not m or m.group(1) != b"P5":
        raise DomainError("not a binary PGM (P5) image")
    w, h = int(m.group(3)), int(m.group(4))
    body = data[m.end():]
    if len(body) != w * h:
        raise DomainError("PGM payload size mismatch")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w).copy(), m.group(2).decode()
