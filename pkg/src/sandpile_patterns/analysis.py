"""Desk-scale experiments comparing solved fields with the continuum construction."""
from __future__ import annotations

import hashlib
import json
import math
import platform
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .continuum import SuperSolution, base_visible_area, ifs_generate, value_grid, visible_areas
from .grid import DomainError, IntField, ShapeSpec, Window, build_mask
from .io import atomic_write, encode_igf
from .patterns import Region, detect_period, match_fraction
from .solver import Solution, burning_certificate, solve_least

UNIT = ShapeSpec.unit_square()
SQUARE2 = ShapeSpec.square2()


def _scale_kind(shape: ShapeSpec) -> str:
    poly = shape.polygon()
    if poly == UNIT.polygon():
        return "unit"
    if poly == SQUARE2.polygon():
        return "square2"
    raise DomainError("continuum comparisons exist only for the square")


def reference_field(ss: SuperSolution, n: int, window: Window, shape: ShapeSpec = UNIT) -> np.ndarray:
    """Continuum prediction of ``u_n`` on the window, as float64.

    For ``(-1, 1)^2`` this is ``n^2 v(p / n)``; for the unit square the
    lattice is mapped by ``x = (2p - n) / n`` and values scale by ``n^2 / 4``.
    """
    if _scale_kind(shape) == "square2":
        xs = [Fraction(x, n) for x in range(window.x0, window.x1)]
        ys = [Fraction(y, n) for y in range(window.y0, window.y1)]
        k = Fraction(n * n)
    else:
        xs = [Fraction(2 * x - n, n) for x in range(window.x0, window.x1)]
        ys = [Fraction(2 * y - n, n) for y in range(window.y0, window.y1)]
        k = Fraction(n * n, 4)
    g = value_grid(ss, xs, ys)
    return np.array([[float(v * k) for v in row] for row in g], dtype=np.float64).reshape(window.shape)


def to_lattice(x, n: int, shape: ShapeSpec = UNIT) -> tuple[Fraction, Fraction]:
    """Continuum point of ``(-1, 1)^2`` to lattice coordinates at scale ``n``."""
    if _scale_kind(shape) == "square2":
        return (Fraction(x[0]) * n, Fraction(x[1]) * n)
    return (Fraction(n) * (Fraction(x[0]) + 1) / 2, Fraction(n) * (Fraction(x[1]) + 1) / 2)


# --------------------------------------------------------------------------
# convergence
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    depth: int
    sup_error: float
    normalized: float
    exponent: float | None
    sup_error_prev_depth: float | None  # same n against depth - 1


def sup_error(sol: Solution, ss: SuperSolution, shape: ShapeSpec = UNIT) -> float:
    m = sol.mask
    ref = reference_field(ss, m.n, m.window, shape)
    return float(np.abs(sol.u.values - ref)[m.member].max()) if m.count else 0.0


def convergence_report(shape: ShapeSpec, ns: Sequence[int], depth: int,
                       solutions: dict | None = None, backend: str | None = None,
                       threads: int = 1) -> list[ConvergenceRow]:
    """Sup errors ``max |u_n - n^2 v(./n)|`` with successive log-ratio exponents."""
    _scale_kind(shape)
    ns = list(ns)
    if ns != sorted(set(ns)):
        raise DomainError("ns must be strictly increasing")
    ss = ifs_generate(depth)
    ss_prev = ifs_generate(depth - 1) if depth > 0 else None
    rows = []
    prev = None
    for n in ns:
        sol = (solutions or {}).get(n)
        if sol is None:
            sol = solve_least(build_mask(shape, n), backend=backend, threads=threads)
        e = sup_error(sol, ss, shape)
        e_prev = sup_error(sol, ss_prev, shape) if ss_prev is not None else None
        expo = None
        if prev is not None and prev[1] > 0 and e > 0:
            expo = math.log(e / prev[1]) / math.log(n / prev[0])
        rows.append(ConvergenceRow(n, depth, e, e / (n * n), expo, e_prev))
        prev = (n, e)
    return rows


# --------------------------------------------------------------------------
# defects
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DefectReport:
    k: int
    word: str
    polygon: list
    r: int
    eroded_points: int
    matched: int
    fraction: float
    covolume: int | None
    basis: list | None
    detected: bool
    fallback: bool
    skipped: bool = False


def ranked_w_pieces(ss: SuperSolution) -> list[tuple[int, Fraction]]:
    """``(rank, visible area)`` of w-family patches by decreasing area, then word."""
    areas = visible_areas(ss)
    ws = [(r, areas[r]) for r, t in enumerate(ss.patches) if t.family == "w"]
    ws.sort(key=lambda ra: (-ra[1], ss.patches[ra[0]].word))
    return ws


def patch_region(ss: SuperSolution, rank: int, n: int, shape: ShapeSpec = UNIT) -> Region:
    """Lattice points strictly inside a patch triangle at scale ``n`` that the
    patch owns under the precedence rule (its visible part)."""
    t = ss.patches[rank]
    tri = Region.polygon([to_lattice(p, n, shape) for p in t.ccw])
    square2 = _scale_kind(shape) == "square2"
    mask = tri.mask.copy()
    ys, xs = np.nonzero(mask)
    for y, x in zip(ys.tolist(), xs.tolist()):
        px, py = x + tri.window.x0, y + tri.window.y0
        c = (Fraction(px, n), Fraction(py, n)) if square2 else (Fraction(2 * px - n, n), Fraction(2 * py - n, n))
        if ss.owner_rank(c) != rank:
            mask[y, x] = False
    return Region.from_mask(tri.window, mask, {"kind": "patch", "word": t.label, "n": n})


def laplacian_image(sol: Solution) -> IntField:
    return IntField(sol.mask.window, sol.laplacian())


def defect_report(sol: Solution, ss: SuperSolution, rs: Sequence[int], k_max: int,
                  margin: int = 2, shape: ShapeSpec = UNIT, tolerance: float = 0.02) -> list[DefectReport]:
    """Pattern match fractions of ``Lap u_n`` inside the largest w-family patches.

    For each patch the period is detected once inside the region eroded by
    ``min(rs) + margin``.  All radii are scored on the same point set, the
    region eroded by ``max(rs) + margin``, so fractions are nested in ``r``.
    """
    rs = sorted(int(r) for r in rs)
    n = sol.mask.n
    image = laplacian_image(sol)
    rows = []
    for k, (rank, _area) in enumerate(ranked_w_pieces(ss)[:k_max]):
        t = ss.patches[rank]
        poly = [[str(a), str(b)] for a, b in (to_lattice(p, n, shape) for p in t.ccw)]
        reg = patch_region(ss, rank, n, shape)
        detect_reg = reg.erode(rs[0] + margin)
        score_reg = reg.erode(rs[-1] + margin)
        if score_reg.count == 0 or detect_reg.count == 0:
            for r in rs:
                rows.append(DefectReport(k, t.label, poly, r, 0, 0, 0.0, None, None, False, False, True))
            continue
        pat = detect_period(image, detect_reg)
        fallback = False
        if pat is None:
            pat = detect_period(image, detect_reg, tolerance=tolerance)
            fallback = pat is not None
        for r in rs:
            if pat is None:
                rows.append(DefectReport(k, t.label, poly, r, score_reg.count, 0, 0.0,
                                         None, None, False, False))
                continue
            rep = match_fraction(image, pat, score_reg, r, erode=False)
            rows.append(DefectReport(k, t.label, poly, r, rep.total, rep.matched, rep.fraction,
                                     pat.covolume, [list(pat.basis[0]), list(pat.basis[1])],
                                     True, fallback))
    return rows


def deficit_slope(rows: Sequence[DefectReport]) -> float | None:
    """Log-log slope of ``1 - fraction`` against ``r`` (reported, never asserted)."""
    pts = [(math.log(r.r), math.log(1 - r.fraction)) for r in rows
           if r.detected and 0 < 1 - r.fraction and r.r > 0]
    if len(pts) < 2:
        return None
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])


def perfect_check(ms: Sequence[int], min_patch: int = 20, r: int = 2, depth: int = 6,
                  contrast: Sequence[int] = (200,), backend: str | None = None,
                  tolerance: float = 0.35) -> dict:
    """Per-patch defect counts at ``n = 3^m`` plus non-power contrast sizes.

    A patch whose image is not exactly periodic gets its pattern from the
    tolerant detector (``fallback`` is set); ``undetected`` counts patches
    where even that fails, and those never contribute to ``total_defects``.
    """
    if any(m > 6 or m < 0 for m in ms):
        raise DomainError("each m must lie in [0, 6]")
    ss = ifs_generate(depth)
    out = {"r": r, "min_patch": min_patch, "depth": depth, "tolerance": tolerance, "rows": []}
    sizes = [(3 ** m, m) for m in ms] + [(c, None) for c in contrast]
    for n, m in sizes:
        sol = solve_least(build_mask(UNIT, n), backend=backend)
        image = laplacian_image(sol)
        patches = []
        for k, (rank, _area) in enumerate(ranked_w_pieces(ss)):
            reg = patch_region(ss, rank, n).erode(r)
            if reg.count < min_patch:
                continue
            pat = detect_period(image, reg)
            fallback = False
            if pat is None:
                pat = detect_period(image, reg, tolerance=tolerance)
                fallback = pat is not None
            row = {"k": k, "word": ss.patches[rank].label, "points": reg.count, "fallback": fallback,
                   "defects": None, "covolume": None}
            if pat is not None:
                rep = match_fraction(image, pat, reg, r, erode=False)
                row.update(defects=rep.total - rep.matched, covolume=pat.covolume)
            patches.append(row)
        out["rows"].append({"n": n, "m": m, "patches": patches,
                            "total_defects": sum(p["defects"] for p in patches if p["defects"] is not None),
                            "undetected": sum(p["defects"] is None for p in patches)})
    return out


# --------------------------------------------------------------------------
# patch measure
# --------------------------------------------------------------------------

def patch_measure_decay(ss: SuperSolution) -> dict:
    """Visible patch areas, a geometric decay fit, and exact area accounting.

    The base region is measured independently by subtracting every patch
    from the unit square, so the identity ``w + z + base = 1`` is a real
    check rather than a definition.
    """
    areas = visible_areas(ss)
    w = sorted((areas[r] for r, t in enumerate(ss.patches) if t.family == "w"), reverse=True)
    z_area = sum((areas[r] for r, t in enumerate(ss.patches) if t.family == "z"), Fraction(0))
    base = base_visible_area(ss)
    w_total = sum(w, Fraction(0))
    pos = [a for a in w if a > 0]
    ratio = None
    if len(pos) >= 2:
        slope = np.polyfit(np.arange(len(pos)), np.log([float(a) for a in pos]), 1)[0]
        ratio = float(math.exp(slope))
    layer = {}
    for r, t in enumerate(ss.patches):
        if t.family == "w":
            layer[t.layer] = layer.get(t.layer, Fraction(0)) + areas[r]
    lt = [layer[k] for k in sorted(layer)]
    layer_ratio = None
    if len(lt) >= 2 and all(a > 0 for a in lt):
        layer_ratio = float(math.exp(np.polyfit(np.arange(len(lt)), np.log([float(a) for a in lt]), 1)[0]))
    return {
        "depth": ss.depth,
        "pieces": len(w),
        "w_areas": [str(a) for a in w],
        "w_total": str(w_total),
        "base_area": str(base),
        "unresolved_area": str(z_area),
        "sum": str(w_total + base + z_area),
        "exact_total_is_one": w_total + base + z_area == 1,
        "ratio": ratio,
        "layer_totals": [str(a) for a in lt],
        "layer_ratio": layer_ratio,
    }


# --------------------------------------------------------------------------
# experiment manifest
# --------------------------------------------------------------------------

def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, Fraction):
        return str(o)
    if hasattr(o, "__dataclass_fields__"):
        return asdict(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def run_experiments(outdir, ns: Sequence[int] = (27, 81, 243), depth: int = 8,
                    rs: Sequence[int] = (2, 3, 5, 8), k_max: int = 3, ms: Sequence[int] = (3, 4, 5),
                    backend: str | None = None, threads: int = 1) -> dict:
    """Run the standard experiment set and write every artifact plus a manifest."""
    out = Path(outdir)
    files = {}

    def put(name, data):
        atomic_write(out / name, data)
        files[name] = sha256(data if isinstance(data, bytes) else data.encode())

    sols = {}
    for n in ns:
        sol = solve_least(build_mask(UNIT, n), backend=backend, threads=threads)
        sols[n] = sol
        put(f"u_{n}.igf", encode_igf(sol.u))
        rec = sol.stats_record(burning_certificate(sol).passed)
        rec["wall_ms"] = 0.0  # keep archived bytes reproducible
        put(f"u_{n}.stats.json", dumps(rec))
    conv = convergence_report(UNIT, ns, depth, solutions=sols)
    put("convergence.json", dumps([asdict(r) for r in conv]))
    ss = ifs_generate(depth)
    defects = defect_report(sols[max(ns)], ss, rs, k_max)
    put("defects.json", dumps({"rows": [asdict(r) for r in defects],
                               "deficit_slope": deficit_slope([r for r in defects if r.k == 0])}))
    put("perfect.json", dumps(perfect_check(ms, backend=backend)))
    put("decay.json", dumps(patch_measure_decay(ss)))
    manifest = {
        "inputs": {"shape": "unit-square", "ns": list(ns), "depth": depth, "rs": list(rs),
                   "k_max": k_max, "ms": list(ms)},
        "versions": {"sandpile_patterns": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
        "files": files,
    }
    atomic_write(out / "manifest.json", dumps(manifest))
    return manifest
