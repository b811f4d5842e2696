"""The gallery of vector fields under study.

Every field evaluates in closed form on batches of points.  Null sets (the
radial field's origin, the tiled field's horizontal tile edges, the shear
menu's y = 0 line) raise OnNullSet instead of being silently perturbed; the
quadrature charts are laid out so their midpoint nodes never land there.

The Depauw slab family is built in :mod:`tracelab.transport` and re-exported
here behind the same field interface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import transport
from .errors import OnNullSet, OutsideDomain


@dataclass(frozen=True)
class DivergenceInfo:
    """Divergence metadata: 'zero', 'absolutely-continuous', or 'unknown'."""

    tag: str
    density: object = None  # callable (N, d) -> (N,) when absolutely continuous


ZERO_DIV = DivergenceInfo("zero")


def _batch(points, dim):
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != dim:
        raise ValueError(f"expected dimension {dim}, got {pts.shape}")
    return pts, single


class Field:
    """Base interface: vectorized eval plus divergence metadata."""

    kind = "abstract"
    dim = 2
    time_dependent = False
    singular_point = None

    def eval(self, points, t=None):
        raise NotImplementedError

    def divergence_info(self):
        return ZERO_DIV

    def config(self):
        return {"kind": self.kind}


class PolynomialField(Field):
    """Componentwise polynomial field; divergence is exact."""

    kind = "polynomial"

    def __init__(self, components):
        # components[i] = list of (coeff, exponent-tuple) terms
        self.components = [
            [(float(c), tuple(int(e) for e in exps)) for c, exps in comp]
            for comp in components
        ]
        self.dim = len(self.components)

    def eval(self, points, t=None):
        pts, single = _batch(points, self.dim)
        out = np.zeros_like(pts)
        for i, comp in enumerate(self.components):
            for c, exps in comp:
                term = np.full(len(pts), c)
                for ax, e in enumerate(exps):
                    if e:
                        term = term * pts[:, ax] ** e
                out[:, i] += term
        return out[0] if single else out

    def divergence_info(self):
        terms = []
        for i, comp in enumerate(self.components):
            for c, exps in comp:
                if exps[i] == 0:
                    continue
                new = list(exps)
                new[i] -= 1
                terms.append((c * exps[i], tuple(new)))
        if not terms:
            return ZERO_DIV

        def density(pts):
            pts = np.atleast_2d(np.asarray(pts, dtype=float))
            out = np.zeros(len(pts))
            for c, exps in terms:
                term = np.full(len(pts), c)
                for ax, e in enumerate(exps):
                    if e:
                        term = term * pts[:, ax] ** e
                out += term
            return out

        return DivergenceInfo("absolutely-continuous", density)

    def config(self):
        return {"kind": self.kind, "components": [
            [[c, list(e)] for c, e in comp] for comp in self.components
        ]}


def identity_field(scale=1.0, dim=2):
    comps = []
    for i in range(dim):
        exps = [0] * dim
        exps[i] = 1
        comps.append([(scale, tuple(exps))])
    return PolynomialField(comps)


class RotationField(Field):
    """u = (-y, x); tangent to every circle around the origin."""

    kind = "rotation"

    def eval(self, points, t=None):
        pts, single = _batch(points, 2)
        out = np.stack([-pts[:, 1], pts[:, 0]], axis=1)
        return out[0] if single else out


class RadialField(Field):
    """u = x / |x|^2; divergence-free away from the origin, unbounded."""

    kind = "radial"
    singular_point = (0.0, 0.0)

    def eval(self, points, t=None):
        pts, single = _batch(points, 2)
        r2 = np.einsum("ij,ij->i", pts, pts)
        if np.any(r2 == 0.0):
            raise OnNullSet("radial field evaluated at the origin")
        out = pts / r2[:, None]
        return out[0] if single else out


_SHEAR_MENU = {
    "sin-inv": (lambda y: np.sin(1.0 / y), True),
    "one": (lambda y: np.ones_like(y), False),
    "linear": (lambda y: y, False),
}


class ShearField(Field):
    """u = (g(y), 0) on the upper half-plane; g from a small menu.

    The 'sin-inv' choice g(y) = sin(1/y) is bounded but not BV near y = 0.
    """

    kind = "shear"

    def __init__(self, profile="sin-inv"):
        if profile not in _SHEAR_MENU:
            raise ValueError(f"unknown shear profile {profile!r}")
        self.profile = profile
        self._g, self._null_at_zero = _SHEAR_MENU[profile]

    def eval(self, points, t=None):
        pts, single = _batch(points, 2)
        if self._null_at_zero and np.any(pts[:, 1] == 0.0):
            raise OnNullSet("shear profile undefined at y = 0")
        out = np.stack([self._g(pts[:, 1]), np.zeros(len(pts))], axis=1)
        return out[0] if single else out

    def config(self):
        return {"kind": self.kind, "profile": self.profile}


def _default_cell_field(xs, ys):
    """The explicit divergence-free base-cell field, tangent to the tile."""
    return np.stack(
        [
            np.sin(2.0 * math.pi * xs) * np.cos(2.0 * math.pi * ys),
            -np.sin(2.0 * math.pi * ys) * np.cos(2.0 * math.pi * xs),
        ],
        axis=1,
    )


def tile_index(point):
    """The unique (i, j) with the point in the half-open dyadic tile Q_{i,j}.

    Raises OnNullSet on tile edges: horizontal edges y = 2^-j (where the
    field jumps) and vertical edges x = i 2^-j of the point's own strip
    (where the index, though not the field, jumps).
    """
    x, y = float(point[0]), float(point[1])
    if y <= 0.0:
        raise OutsideDomain("tile grid lives on the open upper half-plane")
    mant, exp = math.frexp(y)
    if mant == 0.5:
        raise OnNullSet(f"y = {y} lies on a horizontal tile edge")
    j = 1 - exp
    scaled = math.ldexp(x, j)  # 2^j * x, exact
    if scaled == math.floor(scaled):
        raise OnNullSet(f"x = {x} lies on a vertical tile edge at level {j}")
    return int(math.floor(scaled)), j


class TiledField(Field):
    """Self-similar dyadic tiling of a base-cell field over the half-plane.

    On the tile occupying [i 2^-j, (i+1) 2^-j) x [2^-j, 2^-j+1) the value is
    the base-cell field at the rescaled coordinates (2^j x - i, 2^j y).  The
    default base cell is periodic and smooth across vertical edges, so the
    declared null set is the horizontal edges {y = 2^-j} only.
    """

    kind = "tiled"

    def __init__(self, cell_field=None):
        self._v = cell_field or _default_cell_field
        self._custom = cell_field is not None
        self._cell_abs_e2 = None

    def eval(self, points, t=None):
        pts, single = _batch(points, 2)
        y = pts[:, 1]
        if np.any(y <= 0.0):
            raise OutsideDomain("tiled field lives on the open upper half-plane")
        mant, exp = np.frexp(y)
        if np.any(mant == 0.5):
            raise OnNullSet("point on a horizontal tile edge y = 2^-j")
        j = 1 - exp
        xs_scaled = np.ldexp(pts[:, 0], j)
        i = np.floor(xs_scaled)
        xs = xs_scaled - i
        ys = np.ldexp(y, j)
        out = self._v(xs, ys)
        return out[0] if single else out

    # -- exact dyadic structure (used as the tube-average oracle) ----------

    def cell_abs_e2_integral(self, tol=1e-9):
        """Integral of |v . e2| over the base cell, by quadrature (cached)."""
        if self._cell_abs_e2 is None:
            from .quadrature import BoxChart, integrate

            # |v . e2| kinks sit on quarter lines; align panels with them
            chart = BoxChart([0.0, 1.0], [1.0, 2.0], panels=(4, 4))

            def f(p):
                return np.abs(self._v(p[:, 0], p[:, 1])[:, 1])

            val, _ = integrate(f, [chart], tol=tol)
            self._cell_abs_e2 = float(val)
        return self._cell_abs_e2

    def strip_abs_e2_integral(self, j, width=1.0, y_hi=None):
        """Exact integral of |u . e2| over one strip, x-range of given width.

        The strip is 2^-j-periodic in x, so any x-window whose width is an
        integer multiple of 2^-j has the closed-form value width * 2^-j * C
        with C the base-cell constant; a partial strip top y_hi factorizes
        for the default (separable) base cell.
        """
        per_strip = width * 2.0**-j * self.cell_abs_e2_integral()
        if y_hi is None:
            return per_strip
        if self._custom:
            raise ValueError("partial strips supported for the default cell only")
        from .quadrature import BoxChart, integrate

        y_top = min(math.ldexp(y_hi, j), 2.0)  # rescaled strip top in [1, 2]
        if y_top <= 1.0:
            return 0.0
        cx = BoxChart([0.0], [1.0], panels=(4,))
        cy = BoxChart([1.0], [y_top], panels=(4,))
        ix, _ = integrate(lambda p: np.abs(np.cos(2 * math.pi * p[:, 0])), [cx], tol=1e-9)
        iy, _ = integrate(lambda p: np.abs(np.sin(2 * math.pi * p[:, 0])), [cy], tol=1e-9)
        return width * 2.0**-j * ix * iy

    def tube_abs_e2_rows(self, r, width=1.0):
        """Exact integral of |u . e2| over the strip stack {0 < y < r}."""
        total = 0.0
        mant, exp = math.frexp(r)
        j_top = 1 - exp  # strip containing r (starting exactly at r when dyadic)
        if mant != 0.5:
            total += self.strip_abs_e2_integral(j_top, width, y_hi=r)
        # full strips j >= j_top + 1 sum geometrically to width * 2^-j_top * C
        total += width * 2.0**-j_top * self.cell_abs_e2_integral()
        return total


class DepauwSlabField(Field):
    """The time-dependent planar mixing field, assembled over all slabs."""

    kind = "depauw-slab"
    time_dependent = True

    def eval(self, points, t=None):
        if t is None:
            raise ValueError("depauw-slab field needs an evaluation time")
        pts, single = _batch(points, 2)
        out = transport.depauw_field_eval(pts, float(t))
        return out[0] if single else out


class DepauwLiftField(Field):
    """Autonomous 3-d lift: u(y, r) = (b(y, r), 1) for 0 < r < 1, (0,0,1) above."""

    kind = "depauw-lift"
    dim = 3

    def eval(self, points, t=None):
        pts, single = _batch(points, 3)
        r = pts[:, 2]
        if np.any(r <= 0.0):
            raise OutsideDomain("lift field lives in {r > 0}")
        out = np.zeros_like(pts)
        out[:, 2] = 1.0
        live = r < 1.0
        if np.any(live):
            out[live, :2] = transport.field_velocity_times(pts[live, :2], r[live])
        return out[0] if single else out


_FIELD_KINDS = {
    "polynomial": PolynomialField,
    "rotation": RotationField,
    "radial": RadialField,
    "shear": ShearField,
    "tiled": TiledField,
    "depauw-slab": DepauwSlabField,
    "depauw-lift": DepauwLiftField,
}


def field_from_config(cfg):
    """Build a field from its configuration dictionary."""
    cfg = dict(cfg)
    kind = cfg.pop("kind", None)
    if kind == "polynomial":
        comps = cfg.pop("components")
        if cfg:
            raise ValueError(f"unknown field keys {sorted(cfg)}")
        return PolynomialField([[(c, tuple(e)) for c, e in comp] for comp in comps])
    if kind == "shear":
        profile = cfg.pop("profile", "sin-inv")
        if cfg:
            raise ValueError(f"unknown field keys {sorted(cfg)}")
        return ShearField(profile)
    if kind in ("rotation", "radial", "tiled", "depauw-slab", "depauw-lift"):
        if cfg:
            raise ValueError(f"unknown field keys {sorted(cfg)}")
        return _FIELD_KINDS[kind]()
    raise ValueError(f"unknown field kind {kind!r}")
