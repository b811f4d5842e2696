"""One- and two-sided Minkowski content estimators.

Codimension-1 only: the one-sided content of a boundary patch at width r is
H^d(tube)/r; the two-sided content divides H^d of the full tube by 2r.  For
closed patches both one-sided contents converge to the surface measure of
the patch, and the weak form pairs the tube average against test functions.
"""

from __future__ import annotations

import numpy as np

from .errors import TolNotReached
from .quadrature import RegionSpec, integrate, limit_estimate


def _tube_volume(patch, side, r, tol, budget):
    def one(pts):
        return np.ones(len(pts))

    total = 0.0
    err = 0.0
    if side in ("inner", "both"):
        try:
            v, e = integrate(one, RegionSpec.inner_tube(patch, r), tol=tol, budget=budget)
        except TolNotReached as exc:
            v, e = exc.value, exc.error_bound
        total += v
        err += e
    if side in ("outer", "both"):
        try:
            v, e = integrate(one, RegionSpec.outer_tube(patch, r), tol=tol, budget=budget)
        except TolNotReached as exc:
            v, e = exc.value, exc.error_bound
        total += v
        err += e
    return total, err


def content(patch, side, r, tol=1e-9, budget=None):
    """Minkowski content of the patch at width r, from the given side."""
    if not patch.pieces:
        return 0.0
    if side not in ("inner", "outer", "both"):
        raise ValueError("side must be 'inner', 'outer' or 'both'")
    vol, _ = _tube_volume(patch, side, r, tol, budget)
    return vol / (2.0 * r if side == "both" else r)


def content_limit(patch, side, schedule, tol=1e-9, budget=None):
    """Limit estimate of the content along a radius schedule."""

    def sampler(r):
        if not patch.pieces:
            return 0.0, 0.0
        vol, err = _tube_volume(patch, side, r, tol * r, budget)
        denom = 2.0 * r if side == "both" else r
        return vol / denom, err / denom

    return limit_estimate(sampler, schedule)


def weak_convergence_check(patch, side, testfn, schedule, tol=1e-9,
                           budget=None, boundary_nodes=4096):
    """Tube averages of a test function vs its surface integral.

    Returns (LimitEstimate of (1/r) int_tube phi, target int_patch phi dH).
    """
    if side not in ("inner", "outer"):
        raise ValueError("weak convergence is one-sided")
    maker = RegionSpec.inner_tube if side == "inner" else RegionSpec.outer_tube

    def sampler(r):
        try:
            v, e = integrate(
                lambda pts: testfn.value(pts), maker(patch, r), tol=tol * r,
                budget=budget,
            )
        except TolNotReached as exc:
            v, e = exc.value, exc.error_bound
        return v / r, e / r

    est = limit_estimate(sampler, schedule)
    pts, w, _ = patch.quadrature(boundary_nodes)
    target = float(np.dot(w, testfn.value(pts)))
    return est, target
