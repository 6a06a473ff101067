"""Command-line entry point: ``sandpile-patterns <subcommand> [flags]``.

Every run prints one JSON manifest line on stdout listing the outputs and
their SHA-256 hashes.  Exit status is 0 on success, 2 on a domain error
(bad input, infeasible request) and 1 on anything else.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from fractions import Fraction
from pathlib import Path

from . import __version__, analysis, continuum, io, patterns, render
from ._accel import BACKENDS
from .grid import DomainError, IntField, ShapeSpec, Window, build_mask, laplacian_field, shift_cutoff
from .solver import Solution, burning_certificate, solve_least


def _int_list(s: str) -> list[int]:
    try:
        return [int(t) for t in s.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}")


def parse_shape(s: str) -> ShapeSpec:
    """``unit-square``, ``square2`` or ``polygon:<file>`` (JSON list of [x, y])."""
    if s == "unit-square":
        return ShapeSpec.unit_square()
    if s == "square2":
        return ShapeSpec.square2()
    if s.startswith("polygon:"):
        path = Path(s[len("polygon:"):])
        try:
            verts = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise DomainError(f"cannot read polygon file {path}: {e}")
        shape = ShapeSpec("polygon", tuple((Fraction(str(x)), Fraction(str(y))) for x, y in verts))
        shape.polygon()
        return shape
    raise DomainError(f"unknown shape {s!r}")


class _Run:
    def __init__(self, command: str):
        self.command = command
        self.outputs: dict[str, str] = {}
        self.extra: dict = {}

    def write(self, path, data: bytes | str) -> None:
        raw = data.encode() if isinstance(data, str) else data
        io.atomic_write(path, raw)
        self.outputs[str(path)] = analysis.sha256(raw)

    def manifest(self, status: str, error: str | None = None) -> str:
        rec = {"command": self.command, "status": status, "version": __version__,
               "outputs": self.outputs}
        rec.update(self.extra)
        if error:
            rec["error"] = error
        return json.dumps(rec, sort_keys=True)


def _need(args, *names):
    for n in names:
        if getattr(args, n) is None:
            raise DomainError(f"--{n.replace('_', '-')} is required for {args.command}")


def _read_field(path) -> IntField:
    try:
        return io.read_igf(path)
    except OSError as e:
        raise DomainError(f"cannot read {path}: {e}")


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_solve(args, run: _Run):
    _need(args, "n", "out")
    mask = build_mask(parse_shape(args.shape), args.n)
    sol = solve_least(mask, args.cutoff, schedule=args.schedule, backend=args.backend,
                      threads=args.threads)
    run.write(args.out, io.encode_igf(sol.u))
    if args.stats:
        rec = sol.stats_record(burning_certificate(sol, backend=args.backend).passed)
        run.write(args.stats, json.dumps(rec, sort_keys=True) + "\n")
        run.extra["burn_pass"] = rec["burn_pass"]


def cmd_laplacian(args, run: _Run):
    _need(args, "inp", "out")
    run.write(args.out, io.encode_igf(laplacian_field(_read_field(args.inp))))


def cmd_shift(args, run: _Run):
    _need(args, "inp", "out")
    run.write(args.out, io.encode_igf(shift_cutoff(_read_field(args.inp), args.alpha)))


def cmd_continuum(args, run: _Run):
    _need(args, "depth", "n", "out")
    ss = continuum.ifs_generate(args.depth)
    shape = parse_shape(args.shape)
    if analysis._scale_kind(shape) == "square2":
        win = Window(-args.n, -args.n, 2 * args.n + 1, 2 * args.n + 1)
        vals = continuum.sample_field(ss, args.n, win)
    else:
        win = Window(0, 0, args.n + 1, args.n + 1)
        vals = analysis.reference_field(ss, args.n, win, shape)
    run.write(args.out, io.encode_fgf(win, vals))


def cmd_pieces(args, run: _Run):
    _need(args, "depth", "out")
    ss = continuum.ifs_generate(args.depth)
    ps = continuum.pieces(ss)
    run.write(args.out, "[\n" + ",\n".join(json.dumps(p.to_json()) for p in ps) + "\n]\n")
    run.extra["pieces"] = len(ps)


def cmd_match(args, run: _Run):
    _need(args, "inp", "pattern", "out")
    image = _read_field(args.inp)
    pat = patterns.loads_pattern(Path(args.pattern).read_text())
    region = patterns.Region.box(image.window)
    reps = [patterns.match_fraction(image, pat, region, r).to_json() for r in (args.r or [1])]
    run.write(args.out, json.dumps(reps, indent=1) + "\n")


def cmd_detect_period(args, run: _Run):
    _need(args, "inp", "out")
    image = _read_field(args.inp)
    region = patterns.Region.box(image.window)
    if args.box:
        if len(args.box) != 4:
            raise DomainError("--box takes x0,y0,x1,y1")
        x0, y0, x1, y1 = args.box
        region = patterns.Region.box(Window(x0, y0, x1 - x0, y1 - y0))
    pat = patterns.detect_period(image, region, bound=args.bound)
    if pat is None:
        run.write(args.out, json.dumps({"failure": True}) + "\n")
        run.extra["detected"] = False
    else:
        run.write(args.out, patterns.dumps_pattern(pat) + "\n")
        run.extra["detected"] = True


def cmd_analyze_convergence(args, run: _Run):
    _need(args, "ns", "depth", "out")
    rows = analysis.convergence_report(parse_shape(args.shape), args.ns, args.depth,
                                       backend=args.backend, threads=args.threads)
    run.write(args.out, analysis.dumps([asdict(r) for r in rows]))


def cmd_analyze_defects(args, run: _Run):
    _need(args, "depth", "out")
    shape = parse_shape(args.shape)
    if args.inp:
        u = _read_field(args.inp)
        _need(args, "n")
        mask = build_mask(shape, args.n)
        if u.window != mask.window:
            u = u.crop(mask.window)
        sol = Solution(u, mask, args.cutoff)
    else:
        _need(args, "n")
        sol = solve_least(build_mask(shape, args.n), args.cutoff, backend=args.backend,
                          threads=args.threads)
    ss = continuum.ifs_generate(args.depth)
    rows = analysis.defect_report(sol, ss, args.r or [2, 3, 5, 8], args.k_max, shape=shape)
    slope = analysis.deficit_slope([r for r in rows if r.k == 0])
    run.write(args.out, analysis.dumps({"rows": [asdict(r) for r in rows], "deficit_slope": slope}))


def cmd_analyze_perfect(args, run: _Run):
    _need(args, "out")
    rep = analysis.perfect_check(args.ms, min_patch=args.min_patch, r=(args.r or [2])[0],
                                 backend=args.backend)
    run.write(args.out, analysis.dumps(rep))


def cmd_analyze_decay(args, run: _Run):
    _need(args, "depth", "out")
    rep = analysis.patch_measure_decay(continuum.ifs_generate(args.depth))
    run.write(args.out, analysis.dumps(rep))
    run.extra["exact_total_is_one"] = rep["exact_total_is_one"]


def cmd_render(args, run: _Run):
    _need(args, "out")
    pal = render.PALETTES[args.palette]
    if args.inp:
        f = _read_field(args.inp)
        if str(args.out).endswith(".pgm"):
            run.write(args.out, render.encode_pgm(f.values))
        else:
            run.write(args.out, render.encode_ppm(render.render_field(f, pal)))
    else:
        _need(args, "depth")
        img = render.render_pieces(continuum.ifs_generate(args.depth), args.resolution, pal)
        run.write(args.out, render.encode_ppm(img))


def cmd_experiments(args, run: _Run):
    _need(args, "out")
    man = analysis.run_experiments(args.out, ns=args.ns or [27, 81, 243],
                                   depth=8 if args.depth is None else args.depth,
                                   rs=args.r or [2, 3, 5, 8], ms=args.ms,
                                   backend=args.backend, threads=args.threads)
    for name, digest in man["files"].items():
        run.outputs[str(Path(args.out) / name)] = digest


COMMANDS = {
    "solve": cmd_solve,
    "laplacian": cmd_laplacian,
    "continuum": cmd_continuum,
    "pieces": cmd_pieces,
    "match": cmd_match,
    "detect-period": cmd_detect_period,
    "analyze-convergence": cmd_analyze_convergence,
    "analyze-defects": cmd_analyze_defects,
    "analyze-perfect": cmd_analyze_perfect,
    "analyze-decay": cmd_analyze_decay,
    "render": cmd_render,
    "shift": cmd_shift,
    "experiments": cmd_experiments,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sandpile-patterns", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--shape", default="unit-square")
        p.add_argument("--n", type=int)
        p.add_argument("--cutoff", type=int, default=2)
        p.add_argument("--depth", type=int)
        p.add_argument("--r", type=_int_list)
        p.add_argument("--in", dest="inp")
        p.add_argument("--out")
        p.add_argument("--stats")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--palette", choices=sorted(render.PALETTES), default="sandpile")
        p.add_argument("--backend", choices=BACKENDS)
        if name == "solve":
            p.add_argument("--schedule", choices=("redblack", "raster", "random", "worklist"),
                           default="redblack")
        if name in ("analyze-convergence", "experiments"):
            p.add_argument("--ns", type=_int_list)
        if name in ("analyze-perfect", "experiments"):
            p.add_argument("--ms", type=_int_list, default=[3, 4, 5])
        if name == "analyze-perfect":
            p.add_argument("--min-patch", type=int, default=20)
        if name == "analyze-defects":
            p.add_argument("--k-max", type=int, default=3)
        if name == "match":
            p.add_argument("--pattern")
        if name == "detect-period":
            p.add_argument("--box", type=_int_list, help="x0,y0,x1,y1 (exclusive upper corner)")
            p.add_argument("--bound", type=int)
        if name == "render":
            p.add_argument("--resolution", type=int, default=512)
        if name == "shift":
            p.add_argument("--alpha", type=int, default=1)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    run = _Run(args.command)
    try:
        if args.threads < 1:
            raise DomainError("--threads must be >= 1")
        COMMANDS[args.command](args, run)
    except (DomainError, json.JSONDecodeError, KeyError) as e:
        print(run.manifest("domain-error", str(e)))
        return 2
    except Exception as e:  # noqa: BLE001 - reported, exit 1
        print(run.manifest("error", f"{type(e).__name__}: {e}"))
        return 1
    print(run.manifest("ok"))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
