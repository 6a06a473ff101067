import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sandpile_patterns._accel import HAVE_NUMBA
from sandpile_patterns.grid import DomainError, DomainMask, IntField, ShapeSpec, build_mask
from sandpile_patterns.solver import (SandpileConfig, Solution, brute_force_least, burning_certificate,
                                      check_feasible, initial_bound, solve_least, stabilize)

BACKENDS = ["numba", "numpy"] if HAVE_NUMBA else ["numpy"]
SCHEDULES = ["redblack", "raster", "random", "worklist"]


def square_mask(k, x0=0, y0=0):
    return DomainMask.from_points([(x0 + i, y0 + j) for i in range(k) for j in range(k)])


def test_single_site():
    m = DomainMask.from_points([(0, 0)])
    assert solve_least(m).u[(0, 0)] == 0
    assert brute_force_least(m).u[(0, 0)] == 0


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("schedule", SCHEDULES)
def test_two_by_two(backend, schedule):
    sol = solve_least(square_mask(2), schedule=schedule, backend=backend)
    assert all(sol.u[p] == -1 for p in sol.mask.points())
    assert all(sol.laplacian()[sol.mask.member] == 2)
    rep = burning_certificate(sol, backend=backend)
    assert rep.passed and {r for _, r in rep.burned} == {1}


def test_empty_mask():
    m = build_mask(ShapeSpec.unit_square(), 1)
    sol = solve_least(m)
    assert not sol.u.values.any()
    assert burning_certificate(sol).passed
    assert not brute_force_least(m).u.values.any()


def test_strip_matches_oracle():
    m = DomainMask.from_points([(0, 0), (1, 0), (2, 0)])
    assert solve_least(m).u == brute_force_least(m).u


def test_brute_force_refuses_large():
    with pytest.raises(DomainError):
        brute_force_least(square_mask(4))


def test_brute_force_explicit_lo():
    m = square_mask(2)
    assert brute_force_least(m, lo=-4).u == solve_least(m).u


def test_initial_bound_dominates(solved):
    for n in (9, 27, 81):
        sol = solved(n)
        assert initial_bound(sol.mask, 2) >= -sol.u.values.min()


connected_sets = st.sets(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=8)


@given(connected_sets, st.integers(0, 3))
def test_oracle_on_random_masks(points, cutoff):
    m = DomainMask.from_points(sorted(points))
    assert solve_least(m, cutoff).u == brute_force_least(m, cutoff).u


@given(st.integers(3, 20), st.integers(3, 20), st.integers(0, 2 ** 16))
def test_schedules_and_backends_agree(w, h, seed):
    pts = [(i, j) for i in range(w) for j in range(h)]
    m = DomainMask.from_points(pts)
    ref = solve_least(m, schedule="raster", backend=BACKENDS[-1])
    for be in BACKENDS:
        for sch in SCHEDULES:
            assert solve_least(m, schedule=sch, backend=be, seed=seed).u == ref.u


def test_parallel_threads_identical():
    m = build_mask(ShapeSpec.unit_square(), 40)
    a = solve_least(m, threads=1)
    b = solve_least(m, threads=4)
    assert a.u == b.u


@pytest.mark.parametrize("n", [9, 27])
def test_feasible_and_certified(solved, n):
    sol = solved(n)
    assert check_feasible(sol)
    for be in BACKENDS:
        assert burning_certificate(sol, backend=be).passed


def test_burn_fails_on_shift_nine_square():
    sol = solve_least(square_mask(9))
    bumped = Solution(IntField(sol.u.window, sol.u.values + sol.mask.member), sol.mask)
    assert check_feasible(bumped)
    for be in BACKENDS:
        rep = burning_certificate(bumped, backend=be)
        assert not rep.passed
        assert (4, 4) in rep.unburned
        assert len(rep.burned) + len(rep.unburned) == sol.mask.count


def test_burn_rejects_infeasible():
    sol = solve_least(square_mask(3))
    bad = Solution(IntField(sol.u.window, sol.u.values - 5 * sol.mask.member), sol.mask)
    bad.u.values[2, 2] -= 50
    with pytest.raises(DomainError):
        burning_certificate(bad)


def test_stats_record(solved):
    rec = solved(27).stats_record()
    assert set(rec) == {"n", "members", "sweeps", "updates", "wall_ms", "burn_pass"}
    assert rec["n"] == 27 and rec["members"] == 26 * 26 and rec["burn_pass"] is True


# toppling

def _config(mask, vals):
    s = np.zeros(mask.window.shape, dtype=np.int64)
    for p, v in vals.items():
        s[p[1] - mask.window.y0, p[0] - mask.window.x0] = v
    return SandpileConfig(IntField(mask.window, s), mask)


def test_stable_single_site():
    m = DomainMask.from_points([(0, 0)])
    odo, fin = stabilize(_config(m, {(0, 0): 1}))
    assert odo[(0, 0)] == 0 and fin[(0, 0)] == 1


def test_single_topple():
    m = DomainMask.from_points([(0, 0)])
    odo, fin = stabilize(_config(m, {(0, 0): 4}))
    assert odo[(0, 0)] == 1 and fin[(0, 0)] == 0


def test_centre_of_five_square():
    # three grains exceed the cutoff; one toppling leaves 3 - 4 = -1 behind
    m = square_mask(5, -2, -2)
    odo, fin = stabilize(_config(m, {(0, 0): 3}))
    assert odo[(0, 0)] == 1 and odo.values.sum() == 1
    assert fin[(0, 0)] == -1
    assert all(fin[p] == 1 for p in [(1, 0), (-1, 0), (0, 1), (0, -1)])


def test_negative_input_rejected():
    m = square_mask(2)
    with pytest.raises(DomainError):
        stabilize(_config(m, {(0, 0): -1}))


@pytest.mark.parametrize("backend", BACKENDS)
@given(st.integers(0, 2 ** 32), st.integers(0, 3))
def test_abelian_property(backend, seed, cutoff):
    rng = np.random.default_rng(seed)
    m = square_mask(9)
    s = IntField(m.window, np.where(m.member, rng.integers(0, 12, m.window.shape), 0))
    results = [stabilize(SandpileConfig(s, m), cutoff, order=o, backend=backend)
               for o in ("stack", "sweep", "parallel")]
    for odo, fin in results[1:]:
        assert odo == results[0][0] and fin == results[0][1]
    odo, fin = results[0]
    assert np.all(fin.values[m.member] <= cutoff)


@given(st.integers(3, 14), st.integers(3, 14))
def test_odometer_route_reproduces_least_solution(w, h):
    # u = h0 + odometer(stabilize(Lap h0)) whenever h0 <= u and Lap h0 >= 2 >= 0
    pts = [(i, j) for i in range(w) for j in range(h)]
    m = DomainMask.from_points(pts)
    X, Y = m.window.coords()
    cx, cy = w // 2, h // 2
    R2 = (w + 1) ** 2 + (h + 1) ** 2
    h0 = np.where(m.member, -(R2 - (X - cx) ** 2 - (Y - cy) ** 2), 0).astype(np.int64)
    pad = np.pad(h0, 1)
    lap = pad[:-2, 1:-1] + pad[2:, 1:-1] + pad[1:-1, :-2] + pad[1:-1, 2:] - 4 * h0
    assert np.all(lap[m.member] >= 2)
    s = IntField(m.window, np.where(m.member, lap, 0))
    odo, _ = stabilize(SandpileConfig(s, m))
    u = h0 + odo.values
    assert np.array_equal(u, solve_least(m).u.values)


def test_unit_square_laplacian_range_observed(solved):
    for n in (9, 27, 81):
        sol = solved(n)
        vals = set(np.unique(sol.laplacian()[sol.mask.member]).tolist())
        assert vals <= {-1, 0, 1, 2}
