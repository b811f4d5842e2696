"""Analytic domains, boundary patches and boundary quadrature.

The domain family is fixed and small (disk, square, half-disk, and two
"window" domains standing in for unbounded half-spaces).  Everything here is
closed form: distances, boundary projections, ridge (medial axis) detection,
patch measures.  Unbounded half-space examples are represented by a bounded
window whose flat side is the *physical* boundary; distance and projection
always refer to the physical boundary, while membership refers to the window.

All point-valued operations accept either a single point (1-d array-like) or
an (N, d) batch and are vectorized with numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadRegion

# ---------------------------------------------------------------------------
# ray-casting constraints (used by the quadrature charts)
# ---------------------------------------------------------------------------


class HalfPlaneConstraint:
    """Region {x : n.x <= c}. Interval of admissible ray parameters."""

    def __init__(self, normal, offset):
        self.normal = np.asarray(normal, dtype=float)
        self.offset = float(offset)

    def ray_interval(self, origin, dirs):
        """Admissible [lo, hi] along origin + s*dir, s >= 0, per direction."""
        origin = np.asarray(origin, dtype=float)
        dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
        denom = dirs @ self.normal
        gap = self.offset - origin @ self.normal  # >= 0 iff origin admissible
        n = len(dirs)
        lo = np.zeros(n)
        hi = np.full(n, np.inf)
        with np.errstate(divide="ignore", invalid="ignore"):
            s_cross = gap / denom
        if gap >= 0.0:
            exiting = denom > 0
            hi[exiting] = s_cross[exiting]
        else:
            entering = denom < 0
            lo[entering] = s_cross[entering]
            hi[~entering] = 0.0
        return lo, hi


class DiskConstraint:
    """Region inside (or outside) a disk/ball. Single-interval rays only.

    For ``inside=False`` the origin must lie on or outside the sphere so the
    admissible set along any ray is one interval.
    """

    def __init__(self, center, radius, inside=True):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.inside = bool(inside)

    def ray_interval(self, origin, dirs):
        origin = np.asarray(origin, dtype=float)
        dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
        p = origin - self.center
        b = dirs @ p
        c = p @ p - self.radius**2
        disc = b * b - c  # directions are unit vectors
        n = len(dirs)
        lo = np.zeros(n)
        hi = np.full(n, np.inf)
        root = np.sqrt(np.maximum(disc, 0.0))
        s_minus = -b - root
        s_plus = -b + root
        tol = 1e-9 * self.radius**2
        if self.inside:
            # origin inside the closed ball: admissible until the far root
            hi = np.where(disc >= 0, np.maximum(s_plus, 0.0), 0.0)
            if c > tol:
                raise BadRegion("inside-disk constraint needs origin in the ball")
        else:
            if c < -tol:
                raise BadRegion("outside-disk constraint with interior origin")
            # origin on/outside the sphere.  With the origin essentially on the
            # sphere (the only case the charts produce) the admissible set is a
            # single interval: everything once the ray has left the ball.
            dips = (disc > 0) & (s_plus > 0)
            lo = np.where(dips, s_plus, lo)
        return lo, hi


def intersect_intervals(constraints, origin, dirs):
    """Componentwise intersection of per-ray admissible intervals."""
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    lo = np.zeros(len(dirs))
    hi = np.full(len(dirs), np.inf)
    for con in constraints:
        clo, chi = con.ray_interval(origin, dirs)
        lo = np.maximum(lo, clo)
        hi = np.minimum(hi, chi)
    return lo, hi


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------

_KINDS = (
    "unit-disk",
    "unit-square",
    "half-plane-window",
    "half-disk",
    "half-space-3d-window",
)


def _as_batch(x, dim):
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {pts.shape}")
    return pts, single


def _unbatch(arr, single):
    return arr[0] if single else arr


@dataclass(frozen=True)
class Domain:
    """A bounded open region with the marked (physical) boundary."""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown domain kind {self.kind!r}")

    # -- constructors ------------------------------------------------------

    @classmethod
    def unit_disk(cls, center=(0.0, 0.0), radius=1.0):
        return cls("unit-disk", {"center": tuple(center), "radius": float(radius)})

    @classmethod
    def unit_square(cls):
        return cls("unit-square", {})

    @classmethod
    def half_plane_window(cls, x_min=-1.0, x_max=2.0, height=1.0):
        return cls(
            "half-plane-window",
            {"x_min": float(x_min), "x_max": float(x_max), "height": float(height)},
        )

    @classmethod
    def half_disk(cls):
        return cls("half-disk", {})

    @classmethod
    def half_space_3d_window(cls, x_min=0.0, x_max=1.0, y_min=0.0, y_max=1.0, height=1.0):
        return cls(
            "half-space-3d-window",
            {
                "x_min": float(x_min),
                "x_max": float(x_max),
                "y_min": float(y_min),
                "y_max": float(y_max),
                "height": float(height),
            },
        )

    # -- basic descriptors -------------------------------------------------

    @property
    def dim(self):
        return 3 if self.kind == "half-space-3d-window" else 2

    @property
    def is_window(self):
        return self.kind in ("half-plane-window", "half-space-3d-window")

    @property
    def center(self):
        return np.asarray(self.params.get("center", (0.0, 0.0)), dtype=float)

    @property
    def radius(self):
        return float(self.params.get("radius", 1.0))

    def bounding_box(self):
        if self.kind == "unit-disk":
            c, r = self.center, self.radius
            return c - r, c + r
        if self.kind == "unit-square":
            return np.zeros(2), np.ones(2)
        if self.kind == "half-plane-window":
            p = self.params
            return (
                np.array([p["x_min"], 0.0]),
                np.array([p["x_max"], p["height"]]),
            )
        if self.kind == "half-disk":
            return np.array([-1.0, 0.0]), np.array([1.0, 1.0])
        p = self.params
        return (
            np.array([p["x_min"], p["y_min"], 0.0]),
            np.array([p["x_max"], p["y_max"], p["height"]]),
        )

    def diameter(self):
        lo, hi = self.bounding_box()
        return float(np.linalg.norm(hi - lo))

    # -- membership --------------------------------------------------------

    def contains(self, x):
        """Open-region membership (window kinds: box AND physical side)."""
        pts, single = _as_batch(x, self.dim)
        if self.kind == "unit-disk":
            inside = np.linalg.norm(pts - self.center, axis=1) < self.radius
        elif self.kind == "unit-square":
            inside = np.all((pts > 0.0) & (pts < 1.0), axis=1)
        elif self.kind == "half-plane-window":
            p = self.params
            inside = (
                (pts[:, 0] > p["x_min"])
                & (pts[:, 0] < p["x_max"])
                & (pts[:, 1] > 0.0)
                & (pts[:, 1] < p["height"])
            )
        elif self.kind == "half-disk":
            inside = (np.linalg.norm(pts, axis=1) < 1.0) & (pts[:, 1] > 0.0)
        else:
            p = self.params
            inside = (
                (pts[:, 0] > p["x_min"])
                & (pts[:, 0] < p["x_max"])
                & (pts[:, 1] > p["y_min"])
                & (pts[:, 1] < p["y_max"])
                & (pts[:, 2] > 0.0)
                & (pts[:, 2] < p["height"])
            )
        return _unbatch(inside, single)

    def outside_closure(self, x):
        """Strictly outside the closed region (physical side for windows)."""
        pts, single = _as_batch(x, self.dim)
        if self.kind == "unit-disk":
            out = np.linalg.norm(pts - self.center, axis=1) > self.radius
        elif self.kind == "unit-square":
            out = np.any((pts < 0.0) | (pts > 1.0), axis=1)
        elif self.kind == "half-plane-window":
            out = pts[:, 1] < 0.0
        elif self.kind == "half-disk":
            out = (np.linalg.norm(pts, axis=1) > 1.0) | (pts[:, 1] < 0.0)
        else:
            out = pts[:, 2] < 0.0
        return _unbatch(out, single)

    # -- distance to the physical boundary ---------------------------------

    def _candidate_distances(self, pts):
        """Per-point distances to each boundary component, shape (N, k)."""
        if self.kind == "unit-disk":
            d = np.abs(np.linalg.norm(pts - self.center, axis=1) - self.radius)
            return d[:, None]
        if self.kind == "unit-square":
            x, y = pts[:, 0], pts[:, 1]
            # exact distance to each closed edge segment
            def seg(px, py):
                return np.hypot(px, py)

            d_bottom = seg(np.maximum(np.abs(x - 0.5) - 0.5, 0.0), np.abs(y))
            d_top = seg(np.maximum(np.abs(x - 0.5) - 0.5, 0.0), np.abs(y - 1.0))
            d_left = seg(np.abs(x), np.maximum(np.abs(y - 0.5) - 0.5, 0.0))
            d_right = seg(np.abs(x - 1.0), np.maximum(np.abs(y - 0.5) - 0.5, 0.0))
            return np.stack([d_bottom, d_right, d_top, d_left], axis=1)
        if self.kind == "half-plane-window":
            return np.abs(pts[:, 1])[:, None]
        if self.kind == "half-disk":
            x, y = pts[:, 0], pts[:, 1]
            d_diam = np.hypot(np.maximum(np.abs(x) - 1.0, 0.0), np.abs(y))
            rho = np.linalg.norm(pts, axis=1)
            upper = y >= 0.0
            d_arc = np.where(
                upper,
                np.abs(rho - 1.0),
                np.minimum(np.hypot(x - 1.0, y), np.hypot(x + 1.0, y)),
            )
            return np.stack([d_diam, d_arc], axis=1)
        return np.abs(pts[:, 2])[:, None]

    def distance(self, x):
        """Exact distance to the marked boundary (defined on all of space)."""
        pts, single = _as_batch(x, self.dim)
        d = np.min(self._candidate_distances(pts), axis=1)
        return _unbatch(d, single)

    def distance_margin(self, x):
        """Gap between the two smallest candidate distances (inf if unique)."""
        pts, single = _as_batch(x, self.dim)
        cand = self._candidate_distances(pts)
        if cand.shape[1] == 1:
            m = np.full(len(pts), np.inf)
        else:
            srt = np.sort(cand, axis=1)
            m = srt[:, 1] - srt[:, 0]
        if self.kind == "unit-disk":
            # the disk center is its own ridge point
            m = np.minimum(m, np.linalg.norm(pts - self.center, axis=1))
        if self.kind == "half-disk":
            m = np.minimum(m, np.linalg.norm(pts, axis=1))
        return _unbatch(m, single)

    def on_ridge(self, x):
        """Exact ridge (non-unique nearest boundary point) test."""
        pts, single = _as_batch(x, self.dim)
        margin = np.atleast_1d(self.distance_margin(pts))
        return _unbatch(margin == 0.0, single)

    # -- projection and distance gradient ----------------------------------

    def _project_batch(self, pts):
        """Nearest boundary point per point; ridge rows are arbitrary."""
        if self.kind == "unit-disk":
            v = pts - self.center
            rho = np.linalg.norm(v, axis=1, keepdims=True)
            safe = np.where(rho == 0.0, 1.0, rho)
            return self.center + self.radius * v / safe
        if self.kind == "unit-square":
            cand = self._candidate_distances(pts)
            which = np.argmin(cand, axis=1)
            x, y = pts[:, 0], pts[:, 1]
            cx = np.clip(x, 0.0, 1.0)
            cy = np.clip(y, 0.0, 1.0)
            feet = np.stack(
                [
                    np.stack([cx, np.zeros_like(cy)], axis=1),
                    np.stack([np.ones_like(cx), cy], axis=1),
                    np.stack([cx, np.ones_like(cy)], axis=1),
                    np.stack([np.zeros_like(cx), cy], axis=1),
                ],
                axis=1,
            )
            return feet[np.arange(len(pts)), which]
        if self.kind == "half-plane-window":
            out = pts.copy()
            out[:, 1] = 0.0
            return out
        if self.kind == "half-disk":
            cand = self._candidate_distances(pts)
            which = np.argmin(cand, axis=1)
            x, y = pts[:, 0], pts[:, 1]
            foot_diam = np.stack([np.clip(x, -1.0, 1.0), np.zeros_like(y)], axis=1)
            rho = np.linalg.norm(pts, axis=1, keepdims=True)
            safe = np.where(rho == 0.0, 1.0, rho)
            foot_arc = pts / safe
            below = pts[:, 1] < 0.0
            if np.any(below):
                left_closer = np.hypot(x + 1.0, y) < np.hypot(x - 1.0, y)
                ends = np.where(
                    left_closer[:, None],
                    np.tile([-1.0, 0.0], (len(pts), 1)),
                    np.tile([1.0, 0.0], (len(pts), 1)),
                )
                foot_arc = np.where(below[:, None], ends, foot_arc)
            return np.where((which == 0)[:, None], foot_diam, foot_arc)
        out = pts.copy()
        out[:, 2] = 0.0
        return out

    def project_boundary(self, x):
        """Nearest boundary point, or None on the ridge set (scalar call)."""
        pts, single = _as_batch(x, self.dim)
        proj = self._project_batch(pts)
        if single:
            return None if bool(self.on_ridge(pts[0])) else proj[0]
        return proj

    def grad_distance(self, x):
        """Unit gradient of the boundary distance, None on the ridge."""
        pts, single = _as_batch(x, self.dim)
        if single and bool(self.on_ridge(pts[0])):
            return None
        g = self.grad_distance_ae(pts)
        return _unbatch(g, single)

    def grad_distance_ae(self, x):
        """Vectorized distance gradient; ridge rows use an arbitrary minimizer.

        The ridge has measure zero, so quadrature through this function is
        unaffected by the tie-breaking.
        """
        pts, single = _as_batch(x, self.dim)
        if self.kind == "half-plane-window":
            g = np.tile([0.0, 1.0], (len(pts), 1))
            g[pts[:, 1] < 0.0] = [0.0, -1.0]
        elif self.kind == "half-space-3d-window":
            g = np.tile([0.0, 0.0, 1.0], (len(pts), 1))
            g[pts[:, 2] < 0.0] = [0.0, 0.0, -1.0]
        else:
            proj = self._project_batch(pts)
            v = pts - proj
            norm = np.linalg.norm(v, axis=1, keepdims=True)
            safe = np.where(norm == 0.0, 1.0, norm)
            g = v / safe
            # on the boundary itself the quotient degenerates; use the inward
            # normal there so u . grad(d) matches the one-sided limit
            on_bdry = norm[:, 0] == 0.0
            if np.any(on_bdry):
                g[on_bdry] = self._inward_normal(pts[on_bdry])
        return _unbatch(g, single)

    def _inward_normal(self, pts):
        if self.kind == "unit-disk":
            v = pts - self.center
            n = np.linalg.norm(v, axis=1, keepdims=True)
            n = np.where(n == 0.0, 1.0, n)
            return -v / n
        if self.kind == "half-disk":
            g = np.zeros_like(pts)
            on_diam = pts[:, 1] == 0.0
            g[on_diam] = [0.0, 1.0]
            rho = np.linalg.norm(pts, axis=1)
            on_arc = ~on_diam & (rho > 0)
            g[on_arc] = -pts[on_arc] / rho[on_arc, None]
            return g
        if self.kind == "unit-square":
            cand = self._candidate_distances(pts)
            which = np.argmin(cand, axis=1)
            normals = np.array([[0.0, 1.0], [-1.0, 0.0], [0.0, -1.0], [1.0, 0.0]])
            return normals[which]
        raise AssertionError("flat kinds handled by caller")

    # -- ray casting and constraints ----------------------------------------

    def constraints(self):
        """Convex constraints describing the (physical) region."""
        if self.kind == "unit-disk":
            return [DiskConstraint(self.center, self.radius, inside=True)]
        if self.kind == "unit-square":
            return [
                HalfPlaneConstraint([0.0, -1.0], 0.0),
                HalfPlaneConstraint([1.0, 0.0], 1.0),
                HalfPlaneConstraint([0.0, 1.0], 1.0),
                HalfPlaneConstraint([-1.0, 0.0], 0.0),
            ]
        if self.kind == "half-plane-window":
            p = self.params
            return [
                HalfPlaneConstraint([0.0, -1.0], 0.0),
                HalfPlaneConstraint([0.0, 1.0], p["height"]),
                HalfPlaneConstraint([-1.0, 0.0], -p["x_min"]),
                HalfPlaneConstraint([1.0, 0.0], p["x_max"]),
            ]
        if self.kind == "half-disk":
            return [
                DiskConstraint((0.0, 0.0), 1.0, inside=True),
                HalfPlaneConstraint([0.0, -1.0], 0.0),
            ]
        p = self.params
        return [
            HalfPlaneConstraint([0.0, 0.0, -1.0], 0.0),
            HalfPlaneConstraint([0.0, 0.0, 1.0], p["height"]),
            HalfPlaneConstraint([-1.0, 0.0, 0.0], -p["x_min"]),
            HalfPlaneConstraint([1.0, 0.0, 0.0], p["x_max"]),
            HalfPlaneConstraint([0.0, -1.0, 0.0], -p["y_min"]),
            HalfPlaneConstraint([0.0, 1.0, 0.0], p["y_max"]),
        ]

    def ray_exit(self, origin, dirs):
        """First exit parameter of rays origin + s*dir from the region."""
        _, hi = intersect_intervals(self.constraints(), origin, dirs)
        return hi

    # -- standard patches ----------------------------------------------------

    def full_boundary(self):
        if self.kind == "unit-disk":
            piece = ArcPiece(self.center, self.radius, 0.0, 2.0 * math.pi)
            return BoundaryPatch(self, [piece], closed=True)
        raise BadRegion(f"full_boundary patch not defined for kind {self.kind!r}")


# ---------------------------------------------------------------------------
# boundary pieces and patches
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SegmentPiece:
    """Straight boundary segment with a recorded inward normal."""

    start: tuple
    end: tuple
    inward: tuple  # unit normal pointing into the domain

    @property
    def a(self):
        return np.asarray(self.start, dtype=float)

    @property
    def b(self):
        return np.asarray(self.end, dtype=float)

    @property
    def length(self):
        return float(np.linalg.norm(self.b - self.a))

    @property
    def measure(self):
        return self.length

    def tangent(self):
        return (self.b - self.a) / self.length

    def distance(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        tau = self.tangent()
        rel = pts - self.a
        t = np.clip(rel @ tau, 0.0, self.length)
        foot = self.a + t[:, None] * tau
        return np.linalg.norm(pts - foot, axis=1)

    def quadrature(self, n):
        """Composite midpoint nodes along the segment."""
        t = (np.arange(n) + 0.5) / n * self.length
        tau = self.tangent()
        pts = self.a + t[:, None] * tau
        w = np.full(n, self.length / n)
        normals = np.tile(-np.asarray(self.inward, dtype=float), (n, 1))
        return pts, w, normals

    def endpoints(self):
        return [self.a, self.b]


@dataclass(frozen=True)
class ArcPiece:
    """Circular arc of the boundary of a disk of given center/radius."""

    center: tuple
    radius: float
    theta0: float
    theta1: float  # theta1 > theta0; full circle when span == 2*pi

    @property
    def span(self):
        return self.theta1 - self.theta0

    @property
    def closed_loop(self):
        return abs(self.span - 2.0 * math.pi) < 1e-15

    @property
    def measure(self):
        return self.radius * self.span

    def _c(self):
        return np.asarray(self.center, dtype=float)

    def distance(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        rel = pts - self._c()
        rho = np.linalg.norm(rel, axis=1)
        if self.closed_loop:
            return np.abs(rho - self.radius)
        ang = np.arctan2(rel[:, 1], rel[:, 0])
        # lift angles into [theta0, theta0 + 2*pi)
        ang = self.theta0 + np.mod(ang - self.theta0, 2.0 * math.pi)
        on_arc = ang <= self.theta1
        d_radial = np.abs(rho - self.radius)
        e0 = self._c() + self.radius * np.array([math.cos(self.theta0), math.sin(self.theta0)])
        e1 = self._c() + self.radius * np.array([math.cos(self.theta1), math.sin(self.theta1)])
        d_ends = np.minimum(
            np.linalg.norm(pts - e0, axis=1), np.linalg.norm(pts - e1, axis=1)
        )
        return np.where(on_arc, d_radial, d_ends)

    def quadrature(self, n):
        theta = self.theta0 + (np.arange(n) + 0.5) / n * self.span
        omega = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        pts = self._c() + self.radius * omega
        w = np.full(n, self.measure / n)
        return pts, w, omega  # outward normal of the disk is radial

    def endpoints(self):
        if self.closed_loop:
            return []
        e0 = self._c() + self.radius * np.array([math.cos(self.theta0), math.sin(self.theta0)])
        e1 = self._c() + self.radius * np.array([math.cos(self.theta1), math.sin(self.theta1)])
        return [e0, e1]


@dataclass(frozen=True)
class RectanglePiece:
    """Axis-aligned rectangle in the plane {z = 0} (3-d window bottom face)."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    @property
    def measure(self):
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def distance(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        dx = np.maximum(
            np.maximum(self.x_min - pts[:, 0], pts[:, 0] - self.x_max), 0.0
        )
        dy = np.maximum(
            np.maximum(self.y_min - pts[:, 1], pts[:, 1] - self.y_max), 0.0
        )
        return np.sqrt(dx**2 + dy**2 + pts[:, 2] ** 2)

    def quadrature(self, n):
        # near-square tensor grid with exactly the requested total weight
        nx = max(1, int(round(math.sqrt(n))))
        ny = max(1, n // nx)
        xs = self.x_min + (np.arange(nx) + 0.5) / nx * (self.x_max - self.x_min)
        ys = self.y_min + (np.arange(ny) + 0.5) / ny * (self.y_max - self.y_min)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        pts = np.stack([gx.ravel(), gy.ravel(), np.zeros(nx * ny)], axis=1)
        w = np.full(nx * ny, self.measure / (nx * ny))
        normals = np.tile([0.0, 0.0, -1.0], (nx * ny, 1))
        return pts, w, normals

    def endpoints(self):
        return []


@dataclass(frozen=True)
class BoundaryPatch:
    """A measurable subset of the physical boundary, given by pieces."""

    parent: Domain
    pieces: tuple
    closed: bool = True

    def __init__(self, parent, pieces, closed=True):
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "pieces", tuple(pieces))
        object.__setattr__(self, "closed", bool(closed))

    @property
    def measure(self):
        return float(sum(p.measure for p in self.pieces))

    def distance(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if not self.pieces:
            return np.full(len(pts), np.inf)
        return np.min(np.stack([p.distance(pts) for p in self.pieces]), axis=0)

    def quadrature(self, n):
        """Composite midpoint nodes: (points, weights, outward normals).

        Weights sum to the exact patch measure; nodes are distributed across
        pieces proportionally to their measure.
        """
        if n < 1:
            raise ValueError("need at least one node")
        if not self.pieces:
            d = self.parent.dim
            return np.zeros((0, d)), np.zeros(0), np.zeros((0, d))
        total = self.measure
        pts, ws, norms = [], [], []
        for piece in self.pieces:
            share = max(1, int(round(n * piece.measure / total)))
            p, w, nrm = piece.quadrature(share)
            pts.append(p)
            ws.append(w)
            norms.append(nrm)
        return np.concatenate(pts), np.concatenate(ws), np.concatenate(norms)


# convenience constructors -----------------------------------------------


def circle_patch(domain, theta0=0.0, theta1=2.0 * math.pi):
    """Arc of the disk boundary; the full circle when the span is 2*pi."""
    if domain.kind not in ("unit-disk",):
        raise BadRegion("circle_patch needs a disk domain")
    return BoundaryPatch(
        domain, [ArcPiece(tuple(domain.center), domain.radius, theta0, theta1)]
    )


def segment_patch(domain, x0, x1):
    """Flat physical-boundary segment [x0, x1] x {0}."""
    if domain.kind == "half-plane-window":
        piece = SegmentPiece((x0, 0.0), (x1, 0.0), (0.0, 1.0))
    elif domain.kind == "unit-square":
        piece = SegmentPiece((x0, 0.0), (x1, 0.0), (0.0, 1.0))
    elif domain.kind == "half-disk":
        piece = SegmentPiece((x0, 0.0), (x1, 0.0), (0.0, 1.0))
    else:
        raise BadRegion("segment_patch needs a flat-bottom 2-d domain")
    return BoundaryPatch(domain, [piece])


def bottom_face_patch(domain, x_min=None, x_max=None, y_min=None, y_max=None):
    """Rectangle on the bottom face {z = 0} of the 3-d window."""
    if domain.kind != "half-space-3d-window":
        raise BadRegion("bottom_face_patch needs the 3-d window domain")
    p = domain.params
    piece = RectanglePiece(
        p["x_min"] if x_min is None else float(x_min),
        p["x_max"] if x_max is None else float(x_max),
        p["y_min"] if y_min is None else float(y_min),
        p["y_max"] if y_max is None else float(y_max),
    )
    return BoundaryPatch(domain, [piece])


def empty_patch(domain):
    return BoundaryPatch(domain, [])


# region classification ----------------------------------------------------


def region_classify(domain, patch, x, r):
    """Tag a point relative to the r-tube of a patch.

    Returns one of 'tube-in', 'tube-out', 'deep-interior', 'deep-exterior'.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    pt = np.asarray(x, dtype=float)
    d = float(patch.distance(pt[None, :])[0])
    if bool(domain.outside_closure(pt)):
        return "tube-out" if d < r else "deep-exterior"
    # interior points, plus the measure-zero boundary itself
    return "tube-in" if d < r else "deep-interior"


def patch_measure(patch):
    return patch.measure


def boundary_quadrature(patch, n):
    pts, w, _ = patch.quadrature(n)
    return pts, w


def distance(domain, x):
    return domain.distance(x)


def grad_distance(domain, x):
    return domain.grad_distance(x)


def project_boundary(domain, x):
    return domain.project_boundary(x)
