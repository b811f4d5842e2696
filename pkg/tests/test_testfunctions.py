import math

import numpy as np
import pytest

from tracelab.geometry import Domain
from tracelab.testfunctions import (
    SpaceTimeTestFunction,
    TestFunction,
    bump_at,
    monomials,
    plateau_menu,
)


def _fd_gradient(fn, pts, h=1e-7):
    g = np.zeros_like(pts)
    for ax in range(pts.shape[1]):
        e = np.zeros(pts.shape[1])
        e[ax] = h
        g[:, ax] = (fn(pts + e) - fn(pts - e)) / (2 * h)
    return g


def test_plateau_is_one_on_domain():
    disk = Domain.unit_disk()
    phi = plateau_menu(1, disk)[0]
    rng = np.random.default_rng(0)
    pts = rng.random((500, 2)) * 2 - 1
    pts = pts[np.linalg.norm(pts, axis=1) < 1.0]
    assert np.allclose(phi.value(pts), 1.0)
    assert np.allclose(phi.gradient(pts), 0.0)


def test_plateau_vanishes_outside():
    disk = Domain.unit_disk()
    phi = plateau_menu(1, disk)[0]
    far = np.array([[5.0, 0.0], [0.0, -4.0]])
    assert np.allclose(phi.value(far), 0.0)
    assert np.allclose(phi.gradient(far), 0.0)


def test_bump_peak_and_support():
    phi = bump_at((0.2, 0.1), 0.25)
    assert phi.value(np.array([[0.2, 0.1]]))[0] == pytest.approx(1.0)
    assert phi.value(np.array([[0.2 + 0.25, 0.1]]))[0] == 0.0
    assert phi.support_radius == 0.25


@pytest.mark.parametrize(
    "phi",
    [
        bump_at((0.1, -0.2), 0.4),
        TestFunction(poly=((2.0, (1, 1)), (1.0, (0, 2))), cutoff="bump",
                     center=(0.0, 0.1), r_outer=0.7),
        TestFunction(poly=((1.0, (2, 0)),), cutoff="plateau", center=(0.0, 0.0),
                     r_inner=0.8, r_outer=1.4),
        TestFunction(poly=((1.0, (3, 1)),)),
    ],
)
def test_gradients_match_finite_differences(phi):
    rng = np.random.default_rng(5)
    pts = rng.random((200, 2)) * 2.4 - 1.2
    g = phi.gradient(pts)
    g_fd = _fd_gradient(phi.value, pts)
    assert np.allclose(g, g_fd, atol=1e-5)


def test_monomials_ordering():
    first = monomials(6)
    assert first[0] == (0, 0)
    assert set(first[1:3]) == {(1, 0), (0, 1)}
    assert len(monomials(20)) == 20


def test_space_time_function_derivatives():
    phi = SpaceTimeTestFunction(cx=0.3, cy=0.6, kx=2.0, ky=3.0, t0=0.1, t1=0.9)
    rng = np.random.default_rng(9)
    pts = rng.random((100, 2))
    t = 0.4
    g = phi.grad(pts, t)
    h = 1e-7
    for ax in range(2):
        e = np.zeros(2)
        e[ax] = h
        fd = (phi.value(pts + e, t) - phi.value(pts - e, t)) / (2 * h)
        assert np.allclose(g[:, ax], fd, atol=1e-5)
    fd_t = (phi.value(pts, t + h) - phi.value(pts, t - h)) / (2 * h)
    assert np.allclose(phi.dt(pts, t), fd_t, atol=1e-5)


def test_space_time_support():
    phi = SpaceTimeTestFunction(t0=0.25, t1=0.75)
    pts = np.array([[0.3, 0.3]])
    assert phi.value(pts, 0.2)[0] == 0.0
    assert phi.value(pts, 0.5)[0] != 0.0
    assert phi.active_between(0.3, 0.4)
    assert not phi.active_between(0.8, 0.9)


def test_space_time_periodicity():
    phi = SpaceTimeTestFunction(cx=0.37, cy=0.61)
    pts = np.array([[0.1, 0.9], [0.8, 0.2]])
    shifted = pts + np.array([1.0, -1.0])
    assert np.allclose(phi.value(pts, 0.5), phi.value(shifted, 0.5), atol=1e-14)
