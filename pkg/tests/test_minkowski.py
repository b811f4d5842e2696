import math

import numpy as np
import pytest

from tracelab import minkowski
from tracelab.geometry import Domain, circle_patch, empty_patch, segment_patch
from tracelab.quadrature import RadiusSchedule
from tracelab.testfunctions import TestFunction

DISK = Domain.unit_disk()
SQUARE = Domain.unit_square()


def test_content_circle_example():
    c = minkowski.content(circle_patch(DISK), "inner", 0.1)
    assert abs(c - math.pi * (2.0 - 0.1)) < 1e-10


def test_content_square_bottom_edge_exact():
    seg = segment_patch(SQUARE, 0.0, 1.0)
    for r in (0.01, 0.003):
        assert minkowski.content(seg, "inner", r) == pytest.approx(1.0, abs=1e-12)


def test_content_empty_patch():
    assert minkowski.content(empty_patch(DISK), "inner", 0.1) == 0.0


def test_content_limits_circle():
    sched = RadiusSchedule(0.125, 0.5, 8)
    est_in = minkowski.content_limit(circle_patch(DISK), "inner", sched)
    est_out = minkowski.content_limit(circle_patch(DISK), "outer", sched)
    assert est_in.classification == "convergent"
    assert abs(est_in.limit - 2 * math.pi) < 1e-6
    assert abs(est_out.limit - 2 * math.pi) < 1e-6
    # outer samples follow pi(2 + r)
    for r, v, _ in est_out.samples:
        assert abs(v - math.pi * (2.0 + r)) < 1e-8


def test_content_limit_quarter_arc():
    sched = RadiusSchedule(0.0625, 0.5, 6)
    quarter = circle_patch(DISK, 0.0, math.pi / 2)
    est = minkowski.content_limit(quarter, "inner", sched)
    assert est.classification == "convergent"
    assert abs(est.limit - math.pi / 2) < 5e-3  # O(r) end caps extrapolate out


def test_splitting_identity():
    # inner + outer = 2 x both-sided content at each radius
    full = circle_patch(DISK)
    for r in (0.1, 0.05):
        ci = minkowski.content(full, "inner", r)
        co = minkowski.content(full, "outer", r)
        cb = minkowski.content(full, "both", r)
        assert ci + co == pytest.approx(2.0 * cb, rel=1e-10)


def test_lower_semicontinuity_surrogate():
    sched = RadiusSchedule(0.125, 0.5, 8)
    full = circle_patch(DISK)
    est = minkowski.content_limit(full, "inner", sched)
    measure = full.measure
    for r, v, e in est.samples[-4:]:
        assert v >= measure - 1e-3 - e - math.pi * r  # annulus deficit is pi r


def test_monotone_subpatch():
    sched_r = 0.05
    quarter = circle_patch(DISK, 0.0, math.pi / 2)
    full = circle_patch(DISK)
    assert minkowski.content(quarter, "inner", sched_r) <= minkowski.content(
        full, "inner", sched_r
    )


def test_weak_convergence_check_symmetry_and_square():
    sched = RadiusSchedule(0.125, 0.5, 8)
    full = circle_patch(DISK)
    est_x, target_x = minkowski.weak_convergence_check(
        full, "inner", TestFunction(poly=((1.0, (1, 0)),)), sched
    )
    assert abs(target_x) < 1e-12
    assert abs(est_x.limit) < 1e-6
    est_sq, target_sq = minkowski.weak_convergence_check(
        full, "inner", TestFunction(poly=((1.0, (2, 0)),)), sched
    )
    assert abs(target_sq - math.pi) < 1e-8
    assert abs(est_sq.limit - math.pi) < 1e-3


def test_weak_convergence_constant_reduces_to_content():
    sched = RadiusSchedule(0.125, 0.5, 6)
    full = circle_patch(DISK)
    est, target = minkowski.weak_convergence_check(
        full, "inner", TestFunction(), sched
    )
    cont = minkowski.content_limit(full, "inner", sched)
    assert est.limit == pytest.approx(cont.limit, abs=1e-9)
    assert target == pytest.approx(2 * math.pi, abs=1e-10)


def test_segment_outer_tube_with_caps():
    # outer tube of the square's bottom edge: the strip below plus one half
    # disk around each corner (all of {x1 < 0} near (0,0) is outside)
    seg = segment_patch(SQUARE, 0.0, 1.0)
    r = 0.05
    c = minkowski.content(seg, "outer", r)
    expected = (1.0 * r + math.pi * r**2) / r
    assert c == pytest.approx(expected, rel=1e-8)
