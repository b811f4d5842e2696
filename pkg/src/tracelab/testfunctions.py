"""Smooth test functions with closed-form gradients.

The menu is polynomials times radial cutoffs, in two flavors: a plateau
cutoff that is identically 1 on a ball (so pairings over a domain see the
bare polynomial) and a standard bump with value 1 at its center.  Gradients
are exact, never finite differences, so Gauss-Green residuals measure only
quadrature error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def _poly_eval(terms, pts):
    out = np.zeros(len(pts))
    for c, exps in terms:
        term = np.full(len(pts), float(c))
        for ax, e in enumerate(exps):
            if e:
                term = term * pts[:, ax] ** e
        out += term
    return out


def _poly_grad(terms, pts):
    dim = pts.shape[1]
    out = np.zeros_like(pts)
    for c, exps in terms:
        for ax in range(dim):
            if exps[ax] == 0:
                continue
            term = np.full(len(pts), float(c) * exps[ax])
            for bx, e in enumerate(exps):
                pw = e - 1 if bx == ax else e
                if pw:
                    term = term * pts[:, bx] ** pw
            out[:, ax] += term
    return out


def _h(s):
    """exp(-1/s) for s > 0, zero otherwise; the C-infinity step ingredient."""
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def _h_prime(s):
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos]) / s[pos] ** 2
    return out


@dataclass(frozen=True)
class TestFunction:
    """phi(x) = p(x) * cutoff(|x - center|), with exact gradient.

    cutoff kinds: 'plateau' (1 for rho <= r_inner, 0 for rho >= r_outer),
    'bump' (value 1 at the center, support rho < r_outer), or 'none'.
    """

    __test__ = False  # not a pytest class

    poly: tuple = ((1.0, (0, 0)),)
    cutoff: str = "none"
    center: tuple = (0.0, 0.0)
    r_inner: float = 0.0
    r_outer: float = math.inf
    label: str = ""

    @property
    def support_radius(self):
        return self.r_outer

    def _c(self):
        return np.asarray(self.center, dtype=float)

    def _cut(self, pts):
        """Returns (cutoff values, radial factor g with grad cutoff = g*(x-c))."""
        rel = pts - self._c()
        rho2 = np.einsum("ij,ij->i", rel, rel)
        if self.cutoff == "none":
            return np.ones(len(pts)), np.zeros(len(pts))
        if self.cutoff == "bump":
            t = rho2 / self.r_outer**2
            val = np.zeros(len(pts))
            g = np.zeros(len(pts))
            live = t < 1.0
            with np.errstate(over="ignore"):
                val[live] = np.exp(1.0 - 1.0 / (1.0 - t[live]))
            g[live] = val[live] * (-1.0 / (1.0 - t[live]) ** 2) * (
                2.0 / self.r_outer**2
            )
            return val, g
        if self.cutoff == "plateau":
            rho = np.sqrt(rho2)
            span = self.r_outer - self.r_inner
            u = (self.r_outer - rho) / span
            hu = _h(u)
            h1u = _h(1.0 - u)
            denom = hu + h1u
            val = np.where(denom > 0, hu / np.where(denom > 0, denom, 1.0), 0.0)
            # d(eta)/du, then chain through u(rho) and rho(x)
            detadu = np.zeros(len(pts))
            mid = (u > 0) & (u < 1)
            detadu[mid] = (
                _h_prime(u[mid]) * h1u[mid] + hu[mid] * _h_prime(1.0 - u[mid])
            ) / denom[mid] ** 2
            dudrho = -1.0 / span
            safe_rho = np.where(rho > 0, rho, 1.0)
            g = detadu * dudrho / safe_rho
            g[rho == 0.0] = 0.0
            return val, g
        raise ValueError(f"unknown cutoff {self.cutoff!r}")

    def value(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        cut, _ = self._cut(pts)
        return _poly_eval(self.poly, pts) * cut

    def gradient(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        cut, g = self._cut(pts)
        rel = pts - self._c()
        pv = _poly_eval(self.poly, pts)
        return _poly_grad(self.poly, pts) * cut[:, None] + (pv * g)[:, None] * rel


def monomials(max_count, dim=2):
    """The first monomial exponent tuples, ordered by total degree."""
    out = []
    deg = 0
    while len(out) < max_count:
        combos = []
        for exps in _exponents_of_degree(deg, dim):
            combos.append(exps)
        out.extend(sorted(combos, reverse=True))
        deg += 1
    return out[:max_count]


def _exponents_of_degree(deg, dim):
    if dim == 1:
        yield (deg,)
        return
    for head in range(deg, -1, -1):
        for rest in _exponents_of_degree(deg - head, dim - 1):
            yield (head,) + rest


def plateau_menu(count, domain, margin=0.25):
    """Monomials times a plateau covering the closed domain.

    Pairings over the domain then see the bare polynomials: the cutoff only
    provides the formal compact support outside.
    """
    lo, hi = domain.bounding_box()
    center = 0.5 * (lo + hi)
    circum = 0.5 * float(np.linalg.norm(hi - lo))
    fns = []
    for exps in monomials(count, domain.dim):
        fns.append(
            TestFunction(
                poly=((1.0, exps),),
                cutoff="plateau",
                center=tuple(center),
                r_inner=circum + margin,
                r_outer=circum + 2.0 * margin,
                label="x^" + "".join(map(str, exps)),
            )
        )
    return fns


def bump_at(center, radius, poly=None, dim=2):
    poly = poly or ((1.0, (0,) * dim),)
    return TestFunction(
        poly=tuple(poly), cutoff="bump", center=tuple(center), r_outer=float(radius),
        label=f"bump@{tuple(center)}r{radius:g}",
    )


def constant_one(dim=2):
    return TestFunction(poly=((1.0, (0,) * dim),), label="one")


# ---------------------------------------------------------------------------
# space-time test functions for the transport weak formulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpaceTimeTestFunction:
    """Smooth 1-periodic space-time test function for the unit cell.

    phi(x, y, t) = exp(kx (cos 2 pi (x - cx) - 1)) *
                   exp(ky (cos 2 pi (y - cy) - 1)) * eta(t),
    a periodic bump centered at (cx, cy), times a smooth time bump eta
    supported in (t0, t1).  Off-lattice centers keep the midpoint grids from
    hitting symmetry cancellations, so residual convergence is visible.
    """

    cx: float = 0.37
    cy: float = 0.613
    kx: float = 3.0
    ky: float = 2.0
    t0: float = 0.0625
    t1: float = 1.0
    label: str = ""

    def _space(self, pts):
        ax = 2 * math.pi * (pts[:, 0] - self.cx)
        ay = 2 * math.pi * (pts[:, 1] - self.cy)
        sx = np.exp(self.kx * (np.cos(ax) - 1.0))
        sy = np.exp(self.ky * (np.cos(ay) - 1.0))
        return sx, sy, ax, ay

    def _eta(self, t):
        z = (2.0 * t - self.t0 - self.t1) / (self.t1 - self.t0)
        if abs(z) >= 1.0:
            return 0.0, 0.0
        val = math.exp(1.0 - 1.0 / (1.0 - z * z))
        dz = val * (-2.0 * z / (1.0 - z * z) ** 2)
        return val, dz * 2.0 / (self.t1 - self.t0)

    def value(self, pts, t):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        sx, sy, _, _ = self._space(pts)
        eta, _ = self._eta(float(t))
        return sx * sy * eta

    def dt(self, pts, t):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        sx, sy, _, _ = self._space(pts)
        _, deta = self._eta(float(t))
        return sx * sy * deta

    def grad(self, pts, t):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        sx, sy, ax, ay = self._space(pts)
        eta, _ = self._eta(float(t))
        gx = -2 * math.pi * self.kx * np.sin(ax) * sx * sy * eta
        gy = -2 * math.pi * self.ky * np.sin(ay) * sx * sy * eta
        return np.stack([gx, gy], axis=1)

    def active_between(self, lo, hi):
        return hi > self.t0 and lo < self.t1

    @property
    def lip_x(self):
        return 2.0 * math.pi * max(self.kx, self.ky)
