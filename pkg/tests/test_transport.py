import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tracelab import transport as tr
from tracelab.errors import LevelMismatch, OutsideSlab, TimeOutOfRange
from tracelab.testfunctions import SpaceTimeTestFunction


def test_pattern_examples():
    assert tr.pattern(0).value_at((0.25, 0.9)) == 1.0
    assert tr.pattern(1).value_at((0.75, 0.1)) == -1.0
    for k in range(1, 8):
        p = tr.pattern(k)
        assert p.mean() == 0.0
        assert p.l2_mean() == 1.0


def test_stripe_sign_matches_pattern():
    rng = np.random.default_rng(0)
    pts = rng.random((5000, 2))
    for k in (1, 3, 6):
        assert np.array_equal(
            tr.stripe_sign(k, pts), tr.pattern(k).batch_values(pts)
        )


def test_evolve_eight_columns():
    # enumerated column-swap oracle: +-+-+-+- becomes ++--++--
    p3 = tr.pattern(3)
    out = tr.evolve_exact(p3, 2)
    assert list(p3.values[:, 0]) == [1, -1, 1, -1, 1, -1, 1, -1]
    assert list(out.values[:, 0]) == [1, 1, -1, -1, 1, 1, -1, -1]
    # independent permutation oracle: explicit swap of columns (4a+1, 4a+2)
    perm = np.arange(8)
    for a in range(2):
        perm[[4 * a + 1, 4 * a + 2]] = perm[[4 * a + 2, 4 * a + 1]]
    assert np.array_equal(out.values, p3.values[perm, :])


def test_constant_block_unchanged():
    vals = np.ones((8, 8), dtype=np.int8)
    p = tr.DyadicPattern(3, vals)
    out = tr.evolve_exact(p, 2)
    assert np.array_equal(out.values, vals)


def test_cascade_composition():
    # composing slabs k..1 maps pattern(k+1) to pattern(1)
    p = tr.pattern(7)
    for k in range(6, 0, -1):
        p = tr.evolve_exact(p, k).coarsen()
    assert np.array_equal(p.values, tr.pattern(1).values)
    assert np.array_equal(tr.cascade_pattern(7, 1).values, tr.pattern(1).values)


def test_level_mismatch():
    with pytest.raises(LevelMismatch):
        tr.evolve_exact(tr.pattern(2), 2)  # needs level >= 3


@settings(max_examples=20, deadline=None)
@given(level=st.integers(3, 6), slab=st.integers(1, 4), seed=st.integers(0, 10_000))
def test_measure_preservation_random_patterns(level, slab, seed):
    if level < slab + 1:
        level = slab + 1
    rng = np.random.default_rng(seed)
    vals = rng.choice(np.array([-1, 1], dtype=np.int8), size=(2**level, 2**level))
    p = tr.DyadicPattern(level, vals)
    q = tr.evolve_exact(p, slab)
    assert Counter(p.values.ravel().tolist()) == Counter(q.values.ravel().tolist())


def test_slab_field_examples():
    # block centers are stagnation points
    assert np.allclose(tr.slab_field_eval(1, (0.5, 0.25), 0.3), [0.0, 0.0])
    # right-edge midpoint at sup radius m moves straight up at speed 4m/tau
    k, m = 1, 0.125
    v = tr.slab_field_eval(k, (0.5 + m, 0.25), 0.3)
    assert np.allclose(v, [0.0, 4.0 * m / 2.0 ** -(k + 1)])
    with pytest.raises(OutsideSlab):
        tr.slab_field_eval(1, (0.5, 0.25), 0.6)


def test_field_uniform_bound():
    rng = np.random.default_rng(5)
    for k in range(1, 13):
        pts = rng.random((100_000, 2))
        b = tr.slab_field_eval(k, pts, 0.75 * 2.0**-k)
        assert np.linalg.norm(b, axis=1).max() <= 4.0 + 1e-12


def test_solution_at_slab_ends_matches_automaton():
    rng = np.random.default_rng(6)
    pts = rng.random((20_000, 2))
    for k in (1, 2, 3, 5):
        v = tr.solution_eval(tr.CASCADE, pts, 2.0**-k)
        assert np.array_equal(v, tr.stripe_sign(k, pts))


def test_solution_examples():
    assert tr.solution_eval(tr.TRIVIAL, (0.3, 0.4), 0.7) == 0.0
    # mid-slab block center is a fixed point of the contour shift
    center = (0.5, 0.25)  # slab-1 block center
    v = tr.solution_eval(tr.CASCADE, center, 0.3)
    assert v == tr.stripe_sign(2, np.array([center]))[0]
    with pytest.raises(TimeOutOfRange):
        tr.solution_eval(tr.CASCADE, (0.5, 0.5), 0.0)
    with pytest.raises(TimeOutOfRange):
        tr.solution_eval(tr.CASCADE, (0.5, 0.5), 1.5)


def test_frozen_tail():
    rng = np.random.default_rng(8)
    pts = rng.random((1000, 2))
    a = tr.solution_eval(tr.CASCADE, pts, 0.6)
    b = tr.solution_eval(tr.CASCADE, pts, 0.99)
    assert np.array_equal(a, b)
    assert np.array_equal(a, tr.stripe_sign(1, pts))


@settings(max_examples=40, deadline=None)
@given(
    m=st.floats(1e-6, 0.5),
    frac=st.floats(0, 1),
    delta_frac=st.floats(-3, 3),
)
def test_contour_shift_roundtrip(m, frac, delta_frac):
    # point on the contour at arclength fraction frac, shifted and unshifted
    s = np.array([frac * 8.0 * m])
    xi = tr._contour_point(s, np.array([m]))
    delta = np.array([delta_frac * m])
    out = tr.contour_shift(xi, np.array([m]), delta)
    back = tr.contour_shift(out, np.array([m]), -delta)
    assert np.max(np.abs(back - xi)) < 1e-12


def test_contour_shift_half_turn_exact():
    rng = np.random.default_rng(9)
    m = rng.random(1000) * 0.4 + 0.01
    side = rng.integers(0, 8, 1000)
    s = side / 8.0 * 8.0 * m
    xi = tr._contour_point(s, m)
    out = tr.contour_shift(xi, m, 4.0 * m)
    assert np.array_equal(out, -xi)


def test_weak_residual_trivial_zero_exact():
    phi = SpaceTimeTestFunction(t0=0.0625, t1=1.0)
    r, trunc = tr.weak_residual(tr.TRIVIAL, phi, level=5)
    assert r == 0.0
    assert trunc == 0.0


def test_weak_residual_cascade_converges():
    phi = SpaceTimeTestFunction(cx=0.37, cy=0.613, t0=0.0625, t1=1.0)
    coarse, _ = tr.weak_residual(tr.CASCADE, phi, level=5)
    fine, _ = tr.weak_residual(tr.CASCADE, phi, level=7)
    assert fine <= 5e-3
    assert fine <= 0.5 * coarse or coarse < 1e-6


def test_weak_residual_truncation_bound_linear():
    phi = SpaceTimeTestFunction(t0=0.0, t1=0.5)  # active at t = 0
    _, trunc1 = tr.weak_residual(tr.CASCADE, phi, level=4, t_cut=2.0**-5)
    _, trunc2 = tr.weak_residual(tr.CASCADE, phi, level=4, t_cut=2.0**-7)
    assert trunc1 > 0 and trunc2 > 0
    assert trunc2 == pytest.approx(trunc1 / 4.0)


def test_renormalization_defect_values():
    times = [0.5, 0.25, 0.125, 0.1875]
    vals, jump = tr.renormalization_defect(tr.CASCADE, lambda s: s**2, times)
    for t, v, exact in vals:
        if exact:
            assert v == 1.0
        else:
            assert abs(v - 1.0) < 1e-12  # rearrangement preserves cell sums
    assert jump == 1.0
    vals_id, jump_id = tr.renormalization_defect(tr.CASCADE, lambda s: s, times)
    assert all(v == 0.0 for _, v, ex in vals_id if ex)
    assert jump_id == 0.0
    _, jump_triv = tr.renormalization_defect(tr.TRIVIAL, lambda s: s**2, times)
    assert jump_triv == 0.0


def test_lifted_solution_examples():
    assert tr.lifted_solution_eval((0.3, 0.4, 0.5), 0.4) == 0.0  # r >= t
    assert tr.lifted_solution_eval((0.3, 0.4, 1.2), 0.9) == 0.0  # r >= 1
    v = tr.lifted_solution_eval((0.3, 0.4, 0.2), 0.7)
    assert v == tr.solution_eval(tr.CASCADE, (0.3, 0.4), 0.2)


def test_total_variation_growth_slope():
    ks = list(range(2, 8))
    tvs = [tr.total_variation_estimate(k) for k in ks]
    slope = float(np.polyfit(ks, np.log2(tvs), 1)[0])
    assert abs(slope - 1.0) < 0.1


def test_slab_of_time():
    assert tr.slab_of_time(1.0) == 0
    assert tr.slab_of_time(0.6) == 0
    assert tr.slab_of_time(0.5) == 1
    assert tr.slab_of_time(0.3) == 1
    assert tr.slab_of_time(0.25) == 2
    with pytest.raises(TimeOutOfRange):
        tr.slab_of_time(0.0)
