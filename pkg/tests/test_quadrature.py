import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tracelab.errors import BadRegion, TolNotReached, TooFewSamples
from tracelab.geometry import Domain, circle_patch, segment_patch
from tracelab.quadrature import (
    RadiusSchedule,
    RegionSpec,
    integrate,
    limit_estimate,
)

DISK = Domain.unit_disk()
HALF_DISK = Domain.half_disk()


def one(pts):
    return np.ones(len(pts))


def test_disk_area():
    v, e = integrate(one, RegionSpec.whole(DISK), tol=1e-9)
    assert abs(v - math.pi) < 1e-9
    assert e < 1e-9


def test_half_ball_singular_integrand():
    # int over B1 cap {y>0} of y/|x|^2: the polar closed form gives
    # int_0^pi sin(theta) dtheta * int_0^1 dr = 2; scipy cross-checks it
    scipy = pytest.importorskip("scipy.integrate")
    oracle, _ = scipy.dblquad(
        lambda y, x: y / (x * x + y * y),
        -1.0,
        1.0,
        lambda x: 0.0,
        lambda x: math.sqrt(max(1.0 - x * x, 0.0)),
        epsabs=1e-9,
    )
    assert abs(oracle - 2.0) < 1e-7

    def f(pts):
        return pts[:, 1] / (pts[:, 0] ** 2 + pts[:, 1] ** 2)

    region = RegionSpec.whole(HALF_DISK, singular_point=(0.0, 0.0))
    v, e = integrate(f, region, tol=1e-6)
    assert abs(v - 2.0) < 1e-6


def test_inner_tube_annulus_area():
    region = RegionSpec.inner_tube(circle_patch(DISK), 0.1)
    v, e = integrate(one, region, tol=1e-8)
    assert abs(v - math.pi * (1.0 - 0.81)) < 1e-8


def test_determinism_bit_identical():
    def f(pts):
        return np.sin(3.0 * pts[:, 0]) * pts[:, 1] ** 2 + 0.25

    region = RegionSpec.whole(DISK)
    a = integrate(f, region, tol=1e-7, workers=1)
    b = integrate(f, region, tol=1e-7, workers=1)
    c = integrate(f, region, tol=1e-7, workers=4)
    assert a == b == c


def test_monte_carlo_determinism_and_accuracy():
    def f(pts):
        return pts[:, 0] ** 2

    region = RegionSpec.whole(DISK)
    a = integrate(f, region, tol=5e-3, mode="monte-carlo", seed=11, budget=400_000)
    b = integrate(f, region, tol=5e-3, mode="monte-carlo", seed=11, budget=400_000)
    assert a == b
    assert abs(a[0] - math.pi / 4) < max(a[1], 5e-3)
    other = integrate(f, region, tol=5e-3, mode="monte-carlo", seed=12, budget=400_000)
    assert other[0] != a[0]


def test_linearity_within_bounds():
    f = lambda pts: pts[:, 0] ** 2
    g = lambda pts: np.cos(pts[:, 1])
    region = RegionSpec.whole(DISK)
    vf, ef = integrate(f, region, tol=1e-9)
    vg, eg = integrate(g, region, tol=1e-9)
    vb, eb = integrate(lambda p: 2.0 * f(p) - 3.0 * g(p), region, tol=1e-9)
    assert abs(vb - (2 * vf - 3 * vg)) <= 2 * ef + 3 * eg + eb + 1e-12


def test_monotone_tube_regions():
    f = lambda pts: pts[:, 0] ** 2 + 0.5
    small, _ = integrate(f, RegionSpec.inner_tube(circle_patch(DISK), 0.05), tol=1e-8)
    large, _ = integrate(f, RegionSpec.inner_tube(circle_patch(DISK), 0.1), tol=1e-8)
    assert small <= large


def test_tol_not_reached_carries_estimate():
    def nasty(pts):
        return np.sin(1.0 / (1.0 - np.linalg.norm(pts, axis=1) + 1e-9))

    with pytest.raises(TolNotReached) as info:
        integrate(nasty, RegionSpec.whole(DISK), tol=1e-14, budget=30_000)
    assert np.isfinite(info.value.value)
    assert info.value.error_bound > 1e-14


def test_bad_region():
    with pytest.raises(BadRegion):
        RegionSpec.ball(DISK, (0.0, 0.0), 0.0)
    with pytest.raises(BadRegion):
        RegionSpec.inner_tube(circle_patch(DISK), -1.0)


def test_spacetime_slab_polynomial():
    hw = Domain.half_plane_window(0.0, 1.0, 1.0)
    region = RegionSpec.spacetime_slab(hw, 0.25, 0.75)

    def f(pts):  # x * t over the box x,y in [0,1], t in (1/4, 3/4)
        return pts[:, 0] * pts[:, 2]

    v, e = integrate(f, region, tol=1e-10)
    assert abs(v - 0.5 * (0.75**2 - 0.25**2) / 2) < 1e-9


def test_ball_region_at_boundary_half_plane():
    hw = Domain.half_plane_window(-1.0, 2.0, 1.0)
    region = RegionSpec.ball(hw, (0.5, 0.0), 0.25)
    v, _ = integrate(one, region, tol=1e-9)
    assert abs(v - math.pi * 0.25**2 / 2) < 1e-8


# -- limit estimation -------------------------------------------------------


def test_limit_estimate_linear_model_exact():
    sched = RadiusSchedule(0.5, 0.5, 12)
    est = limit_estimate(lambda r: 2 * math.pi - math.pi * r, sched)
    assert est.classification == "convergent"
    assert abs(est.limit - 2 * math.pi) < 1e-6
    assert est.liminf_band[0] <= est.limit <= est.liminf_band[1]
    assert est.limsup_band[0] <= est.limit <= est.limsup_band[1]


def test_limit_estimate_oscillatory():
    sched = RadiusSchedule(0.5, 0.5, 12)
    est = limit_estimate(lambda r: math.sin(1.0 / r), sched)
    assert est.classification == "oscillatory"
    assert est.limit is None
    assert -1.01 <= est.liminf_band[0] <= est.limsup_band[1] <= 1.01
    assert est.limsup_band[1] - est.liminf_band[0] > 0.5


def test_limit_estimate_constant():
    sched = RadiusSchedule(0.5, 0.5, 8)
    est = limit_estimate(lambda r: 3.25, sched)
    assert est.classification == "convergent"
    assert est.limit == pytest.approx(3.25)


def test_limit_estimate_too_few_samples():
    with pytest.raises(TooFewSamples):
        limit_estimate(lambda r: r, RadiusSchedule(0.5, 0.5, 3))


@settings(max_examples=25, deadline=None)
@given(
    L=st.floats(-5, 5),
    a=st.floats(-3, 3),
)
def test_limit_estimate_recovers_linear(L, a):
    sched = RadiusSchedule(0.25, 0.5, 10)
    est = limit_estimate(lambda r: L + a * r, sched)
    assert est.classification == "convergent"
    assert abs(est.limit - L) < 1e-6 * max(1.0, abs(L), abs(a))


def test_schedule_radii_geometric():
    sched = RadiusSchedule(1.0, 0.5, 5)
    assert np.allclose(sched.radii(), [1.0, 0.5, 0.25, 0.125, 0.0625])
    with pytest.raises(ValueError):
        RadiusSchedule(1.0, 1.5, 5)
