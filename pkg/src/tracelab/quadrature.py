"""Region integration and radius-schedule limit extrapolation.

Regions are integrated through exact smooth charts: every supported region
(balls clipped to a domain, one-sided tubes of boundary patches, whole
domains, space-time slabs) is decomposed into parametrized pieces whose union
is the region up to null sets.  The deterministic engine runs an adaptive
tensor-midpoint refinement on the parameter boxes with a two-level Richardson
correction; the Monte Carlo engine stratifies the same boxes with
counter-based (Philox) streams so results never depend on evaluation order.

Integrands receive an (N, d) array of ambient points and must return an (N,)
array; they are assumed pure and reentrant.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BadRegion, TolNotReached, TooFewSamples
from .geometry import (
    ArcPiece,
    DiskConstraint,
    HalfPlaneConstraint,
    RectanglePiece,
    SegmentPiece,
    intersect_intervals,
)

_REFINE_FLOOR = 2.0**-40  # smallest relative cell width per axis
_DEFAULT_BUDGET = 4_000_000


def _geometric_breaks(levels=30):
    """Breakpoints 0, 3/4*2^-levels, 2^-levels, ..., 1/2, 1 for a [0, 1] axis.

    The extra break at 3/4 of the floor keeps every midpoint produced by
    later exact bisections off powers of two: descendants of [0, 3h/4] are
    odd multiples of 3h/2^q, and a cell [0, h] would put its midpoint at h/2
    exactly.
    """
    floor = 2.0**-levels
    vals = [0.0, 0.75 * floor] + [2.0**-m for m in range(levels, 0, -1)] + [1.0]
    return np.array(vals)


def _dyadic_breaks_below(r, floor_exp=40):
    """Absolute breakpoints {2^-j < r} in (0, r], plus the ends 0 and r.

    A break at 3/4 of the smallest positive value keeps bisection midpoints
    off the dyadic lines y = 2^-j at every refinement depth (float-exact:
    all the arithmetic stays on small-integer multiples of powers of two).
    """
    out = [0.0]
    j = floor_exp
    while j >= 0:
        v = 2.0**-j
        if v < r:
            out.append(v)
        j -= 1
    out.append(r)
    out.append(0.75 * min(x for x in out if x > 0))
    return np.array(sorted(set(out)))


def _fifth_lattice_breaks(lo, hi):
    """Axis breakpoints every 1/5 unit.

    Bisecting these panels keeps sample phases of dyadically periodic
    integrands on complete orbits of the 1/5 lattice, whose sine and cosine
    sums vanish; a power-of-two panel lattice would instead sample such
    integrands only at their phase-zero slice and converge confidently to a
    biased value.
    """
    n = max(1, round(5.0 * (hi - lo)))
    return np.linspace(lo, hi, n + 1)


# ---------------------------------------------------------------------------
# charts
# ---------------------------------------------------------------------------


class Chart:
    """Parametrization of a region piece over a box in parameter space."""

    lo: np.ndarray
    hi: np.ndarray
    breaks: list  # per-axis initial breakpoints (arrays including lo/hi)

    def evaluate(self, params):
        """params (N, p) -> (points (N, d), jacobian (N,))."""
        raise NotImplementedError

    def _uniform_breaks(self, panels):
        return [
            np.linspace(self.lo[i], self.hi[i], panels[i] + 1)
            for i in range(len(self.lo))
        ]


class BoxChart(Chart):
    """Identity chart over an axis-aligned box, with optional axis breaks."""

    def __init__(self, lo, hi, breaks=None, panels=None):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        if np.any(self.hi <= self.lo):
            raise BadRegion("empty box chart")
        if breaks is None:
            panels = panels or tuple([5] * len(self.lo))
            breaks = self._uniform_breaks(panels)
        self.breaks = breaks

    def evaluate(self, params):
        params = np.atleast_2d(params)
        return params.copy(), np.ones(len(params))


class PolarChart(Chart):
    """Polar chart around a center point, radius set by ray constraints.

    Parameters are (a, theta) with a in [0, 1]; the radius along direction
    omega(theta) runs over the admissible interval of the constraint list
    clipped to [0, clip].  The jacobian is s * (interval length).
    """

    def __init__(self, center, constraints, clip, theta_range=(0.0, 2.0 * math.pi),
                 geometric=False, theta_panels=12):
        self.center = np.asarray(center, dtype=float)
        self.constraints = list(constraints)
        self.clip = float(clip)
        if self.clip <= 0:
            raise BadRegion("polar chart with nonpositive radius")
        self.lo = np.array([0.0, theta_range[0]])
        self.hi = np.array([1.0, theta_range[1]])
        a_breaks = _geometric_breaks() if geometric else np.linspace(0.0, 1.0, 7)
        t_breaks = np.linspace(theta_range[0], theta_range[1], theta_panels + 1)
        self.breaks = [a_breaks, t_breaks]

    def evaluate(self, params):
        params = np.atleast_2d(params)
        a, theta = params[:, 0], params[:, 1]
        omega = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        lo, hi = intersect_intervals(self.constraints, self.center, omega)
        hi = np.minimum(hi, self.clip)
        length = np.maximum(hi - lo, 0.0)
        s = lo + a * length
        pts = self.center + s[:, None] * omega
        return pts, s * length


class SphericalChart(Chart):
    """3-d analogue of PolarChart; parameters (a, theta, phi)."""

    def __init__(self, center, constraints, clip, theta_range=(0.0, math.pi),
                 geometric=False):
        self.center = np.asarray(center, dtype=float)
        self.constraints = list(constraints)
        self.clip = float(clip)
        if self.clip <= 0:
            raise BadRegion("spherical chart with nonpositive radius")
        self.lo = np.array([0.0, theta_range[0], 0.0])
        self.hi = np.array([1.0, theta_range[1], 2.0 * math.pi])
        a_breaks = _geometric_breaks() if geometric else np.linspace(0.0, 1.0, 3)
        self.breaks = [
            a_breaks,
            np.linspace(*theta_range, 4),
            np.linspace(0.0, 2.0 * math.pi, 6),
        ]

    def evaluate(self, params):
        params = np.atleast_2d(params)
        a, theta, phi = params[:, 0], params[:, 1], params[:, 2]
        st = np.sin(theta)
        omega = np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=1)
        lo, hi = intersect_intervals(self.constraints, self.center, omega)
        hi = np.minimum(hi, self.clip)
        length = np.maximum(hi - lo, 0.0)
        s = lo + a * length
        pts = self.center + s[:, None] * omega
        return pts, s * s * st * length


class StripChart(Chart):
    """Normal-offset strip of a straight boundary segment.

    Parameters (t, s): point = start + t * tangent + s * normal, jacobian 1.
    """

    def __init__(self, start, tangent, length, normal, s_max, s_breaks=None):
        self.start = np.asarray(start, dtype=float)
        self.tangent = np.asarray(tangent, dtype=float)
        self.normal = np.asarray(normal, dtype=float)
        if length <= 0 or s_max <= 0:
            raise BadRegion("empty strip chart")
        self.lo = np.array([0.0, 0.0])
        self.hi = np.array([length, s_max])
        t_breaks = np.linspace(0.0, length, 6)
        if s_breaks is None:
            s_breaks = np.linspace(0.0, s_max, 4)
        self.breaks = [t_breaks, np.asarray(s_breaks, dtype=float)]

    def evaluate(self, params):
        params = np.atleast_2d(params)
        t, s = params[:, 0], params[:, 1]
        pts = self.start + t[:, None] * self.tangent + s[:, None] * self.normal
        return pts, np.ones(len(params))


class ArcStripChart(Chart):
    """One-sided tube of a circular arc; parameters (theta, s)."""

    def __init__(self, center, radius, theta0, theta1, s_max, side):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.side = float(side)  # -1: inner offset, +1: outer offset
        if s_max <= 0 or theta1 <= theta0:
            raise BadRegion("empty arc strip chart")
        if side < 0 and s_max >= radius:
            raise BadRegion("inner tube wider than the disk radius")
        self.lo = np.array([theta0, 0.0])
        self.hi = np.array([theta1, s_max])
        self.breaks = [
            np.linspace(theta0, theta1, 9),
            np.linspace(0.0, s_max, 4),
        ]

    def evaluate(self, params):
        params = np.atleast_2d(params)
        theta, s = params[:, 0], params[:, 1]
        rho = self.radius + self.side * s
        omega = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        pts = self.center + rho[:, None] * omega
        return pts, rho


class ProductTimeChart(Chart):
    """Spatial chart crossed with a time interval (space-time slabs)."""

    def __init__(self, spatial, t0, t1, t_panels=4):
        if t1 <= t0:
            raise BadRegion("empty time interval")
        self.spatial = spatial
        self.lo = np.concatenate([spatial.lo, [t0]])
        self.hi = np.concatenate([spatial.hi, [t1]])
        self.breaks = list(spatial.breaks) + [np.linspace(t0, t1, t_panels + 1)]

    def evaluate(self, params):
        params = np.atleast_2d(params)
        pts, jac = self.spatial.evaluate(params[:, :-1])
        return np.concatenate([pts, params[:, -1:]], axis=1), jac


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegionSpec:
    """A measurable integration region given by a domain and a shape."""

    domain: object
    shape: tuple
    singular_point: tuple | None = None

    @classmethod
    def whole(cls, domain, singular_point=None):
        return cls(domain, ("whole",), singular_point)

    @classmethod
    def ball(cls, domain, center, radius, singular_point=None):
        if radius <= 0:
            raise BadRegion("ball region needs positive radius")
        return cls(domain, ("ball", tuple(np.asarray(center, float)), float(radius)),
                   singular_point)

    @classmethod
    def inner_tube(cls, patch, r):
        if r <= 0:
            raise BadRegion("tube region needs positive width")
        if not patch.pieces:
            raise BadRegion("tube of an empty patch")
        return cls(patch.parent, ("inner-tube", patch, float(r)), None)

    @classmethod
    def outer_tube(cls, patch, r):
        if r <= 0:
            raise BadRegion("tube region needs positive width")
        if not patch.pieces:
            raise BadRegion("tube of an empty patch")
        return cls(patch.parent, ("outer-tube", patch, float(r)), None)

    @classmethod
    def spacetime_slab(cls, domain, t0, t1):
        return cls(domain, ("slab", float(t0), float(t1)), None)

    # -- chart assembly -----------------------------------------------------

    def charts(self):
        kind = self.shape[0]
        if kind == "whole":
            return self._whole_charts()
        if kind == "ball":
            return self._ball_charts()
        if kind in ("inner-tube", "outer-tube"):
            return _tube_charts(self.shape[1], self.shape[2], kind == "inner-tube")
        if kind == "slab":
            spatial = self._whole_charts()
            return [ProductTimeChart(ch, self.shape[1], self.shape[2]) for ch in spatial]
        raise BadRegion(f"unknown region shape {kind!r}")

    def _whole_charts(self):
        dom = self.domain
        sing = self.singular_point is not None
        if dom.kind == "unit-disk":
            return [
                PolarChart(dom.center, dom.constraints(), clip=2.0 * dom.radius,
                           geometric=sing)
            ]
        if dom.kind == "unit-square":
            return [BoxChart([0.0, 0.0], [1.0, 1.0])]
        if dom.kind == "half-plane-window":
            p = dom.params
            y_breaks = _dyadic_breaks_below(p["height"])
            return [
                BoxChart(
                    [p["x_min"], 0.0],
                    [p["x_max"], p["height"]],
                    breaks=[_fifth_lattice_breaks(p["x_min"], p["x_max"]), y_breaks],
                )
            ]
        if dom.kind == "half-disk":
            return [
                PolarChart((0.0, 0.0), dom.constraints(), clip=2.0,
                           theta_range=(0.0, math.pi), geometric=sing)
            ]
        p = dom.params
        z_breaks = _dyadic_breaks_below(p["height"])
        return [
            BoxChart(
                [p["x_min"], p["y_min"], 0.0],
                [p["x_max"], p["y_max"], p["height"]],
                breaks=[
                    _fifth_lattice_breaks(p["x_min"], p["x_max"]),
                    _fifth_lattice_breaks(p["y_min"], p["y_max"]),
                    z_breaks,
                ],
            )
        ]

    def _ball_charts(self):
        _, center, radius = self.shape
        dom = self.domain
        center = np.asarray(center, dtype=float)
        sing = self.singular_point is not None and np.allclose(
            np.asarray(self.singular_point, float), center
        )
        cons = dom.constraints()
        if dom.dim == 2:
            return [PolarChart(center, cons, clip=radius, geometric=sing or dom.is_window)]
        return [SphericalChart(center, cons, clip=radius,
                               theta_range=(0.0, math.pi / 2.0), geometric=sing)]


def _beyond_end_halfplane(endpoint, into_piece):
    """Half-plane {x : into_piece . (x - endpoint) <= 0}: past the end."""
    n = np.asarray(into_piece, dtype=float)
    return HalfPlaneConstraint(n, float(n @ np.asarray(endpoint, float)))


def _tube_charts(patch, r, inner):
    dom = patch.parent
    charts = []
    for piece in patch.pieces:
        if isinstance(piece, ArcPiece):
            charts.extend(_arc_tube_charts(dom, piece, r, inner))
        elif isinstance(piece, SegmentPiece):
            charts.extend(_segment_tube_charts(dom, piece, r, inner))
        elif isinstance(piece, RectanglePiece):
            charts.extend(_rect_tube_charts(dom, piece, r, inner))
        else:
            raise BadRegion(f"no tube charts for piece {type(piece).__name__}")
    return charts


def tube_cap_charts(patch, r, inner=True):
    """Only the endpoint caps of a tube (the region minus the normal strips)."""
    caps = []
    for chart in _tube_charts(patch, r, inner):
        if isinstance(chart, PolarChart):
            caps.append(chart)
    return caps


def _arc_tube_charts(dom, piece, r, inner):
    R = piece.radius
    side = -1.0 if inner else 1.0
    s_max = min(r, 0.999 * R) if inner else r
    charts = [
        ArcStripChart(piece.center, R, piece.theta0, piece.theta1, s_max, side)
    ]
    if piece.closed_loop:
        return charts
    circle = DiskConstraint(piece.center, R, inside=inner)
    c = np.asarray(piece.center, dtype=float)
    for theta, sign in ((piece.theta0, 1.0), (piece.theta1, -1.0)):
        e = c + R * np.array([math.cos(theta), math.sin(theta)])
        into = sign * np.array([-math.sin(theta), math.cos(theta)])
        cons = [_beyond_end_halfplane(e, into)]
        if inner:
            cons = dom.constraints() + cons
        else:
            cons = [circle] + cons
        charts.append(PolarChart(e, cons, clip=r))
    return charts


def _segment_flat_outside_constraints(dom):
    if dom.kind in ("half-plane-window", "half-disk"):
        return [HalfPlaneConstraint([0.0, 1.0], 0.0)]  # y <= 0
    if dom.kind == "unit-square":
        return []  # full-edge patches exit the square past their corners
    raise BadRegion(f"outer tube of segments unsupported on {dom.kind!r}")


def _segment_tube_charts(dom, piece, r, inner):
    tau = piece.tangent()
    nu = np.asarray(piece.inward, dtype=float)
    normal = nu if inner else -nu
    s_breaks = None
    if inner and dom.is_window:
        s_breaks = _dyadic_breaks_below(r)
    if inner:
        lid = {"half-plane-window": dom.params.get("height", np.inf),
               "unit-square": 1.0}.get(dom.kind, np.inf)
        if dom.kind == "half-disk":
            # inner strip must stay inside the disk above the diameter
            for end in (piece.a, piece.b):
                if np.hypot(end[0], r) > 1.0:
                    raise BadRegion("tube pokes outside the half-disk")
        if r > lid:
            raise BadRegion("tube wider than the domain")
    charts = [StripChart(piece.a, tau, piece.length, normal, r, s_breaks=s_breaks)]
    if inner:
        side_cons = dom.constraints()
    else:
        side_cons = _segment_flat_outside_constraints(dom)
    for e, into in ((piece.a, tau), (piece.b, -tau)):
        cons = side_cons + [_beyond_end_halfplane(e, into)]
        charts.append(PolarChart(e, cons, clip=r))
    return charts


def _rect_tube_charts(dom, piece, r, inner):
    p = dom.params
    full_face = (
        piece.x_min == p["x_min"]
        and piece.x_max == p["x_max"]
        and piece.y_min == p["y_min"]
        and piece.y_max == p["y_max"]
    )
    if not full_face:
        raise BadRegion("tube charts support only the full bottom face")
    if inner:
        if r > p["height"]:
            raise BadRegion("tube wider than the window")
        return [
            BoxChart(
                [piece.x_min, piece.y_min, 0.0],
                [piece.x_max, piece.y_max, r],
                breaks=[
                    np.linspace(piece.x_min, piece.x_max, 4),
                    np.linspace(piece.y_min, piece.y_max, 4),
                    _dyadic_breaks_below(r),
                ],
            )
        ]
    return [
        BoxChart(
            [piece.x_min, piece.y_min, -r],
            [piece.x_max, piece.y_max, 0.0],
        )
    ]


# ---------------------------------------------------------------------------
# deterministic adaptive engine
# ---------------------------------------------------------------------------


def _worker_count(workers):
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("TRACELAB_WORKERS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


class _Evaluator:
    """Masked, chunked, optionally threaded integrand evaluation."""

    def __init__(self, func, chart, workers):
        self.func = func
        self.chart = chart
        self.workers = workers
        self.evals = 0

    def __call__(self, params):
        pts, jac = self.chart.evaluate(params)
        out = np.zeros(len(params))
        mask = jac != 0.0
        if np.any(mask):
            live = pts[mask]
            self.evals += len(live)
            if self.workers > 1 and len(live) > 4096:
                chunks = np.array_split(live, self.workers)
                with ThreadPoolExecutor(max_workers=self.workers) as pool:
                    vals = list(pool.map(self.func, chunks))
                fv = np.concatenate(vals)
            else:
                fv = np.asarray(self.func(live), dtype=float)
            out[mask] = fv * jac[mask]
        return out


class _Cell:
    """A parameter-space cell carrying three midpoint-refinement levels.

    i0: own midpoint estimate; child_i0: per-child estimates (level 1);
    grand_i0: per-child arrays of grandchild estimates (level 2).  The cell
    value is the Romberg double extrapolation; the error estimate is the
    difference of the two single extrapolations, which stays honest at
    integrand kinks (where extrapolation degrades to first order).
    """

    __slots__ = ("lo", "hi", "i0", "child_i0", "grand_i0", "value", "err", "depth")

    def __init__(self, lo, hi, depth=0):
        self.lo = lo
        self.hi = hi
        self.i0 = 0.0
        self.child_i0 = None
        self.grand_i0 = None
        self.value = 0.0
        self.err = 0.0
        self.depth = depth

    def finalize(self):
        i1 = float(self.child_i0.sum())
        i2 = float(self.grand_i0.sum())
        d1 = i1 - self.i0
        d2 = i2 - i1
        if abs(d2) <= 0.35 * abs(d1) + 1e-15 * abs(i2):
            # contraction consistent with the midpoint rule's h^2 regime:
            # extrapolate and estimate the remaining error from the two
            # single extrapolations
            r11 = i1 + d1 / 3.0
            r21 = i2 + d2 / 3.0
            self.value = r21 + (r21 - r11) / 15.0
            self.err = abs(r21 - r11) / 15.0 + 1e-16 * abs(r21)
        else:
            # kinked, oscillatory or aliased data: no extrapolation, and the
            # last level difference bounds the error only up to a geometric
            # tail factor
            self.value = i2
            self.err = 2.0 * abs(d2) + 1e-16 * abs(i2)

    def children_boxes(self):
        p = len(self.lo)
        mid = 0.5 * (self.lo + self.hi)
        boxes = []
        for mask in range(2**p):
            lo = self.lo.copy()
            hi = self.hi.copy()
            for ax in range(p):
                if (mask >> ax) & 1:
                    lo[ax] = mid[ax]
                else:
                    hi[ax] = mid[ax]
            boxes.append((lo, hi))
        return boxes


def _cells_from_breaks(breaks):
    grids = [np.asarray(b) for b in breaks]
    cells = []
    idx = [range(len(g) - 1) for g in grids]
    for combo in itertools.product(*idx):
        lo = np.array([grids[ax][i] for ax, i in enumerate(combo)])
        hi = np.array([grids[ax][i + 1] for ax, i in enumerate(combo)])
        if np.all(hi > lo):
            cells.append(_Cell(lo, hi))
    return cells


_MASK_CACHE = {}


def _split_masks(p):
    """(2^p, p) 0/1 array; row m has bit (m >> ax) & 1 in column ax."""
    if p not in _MASK_CACHE:
        m = np.arange(2**p)
        _MASK_CACHE[p] = ((m[:, None] >> np.arange(p)[None, :]) & 1).astype(bool)
    return _MASK_CACHE[p]


def _children_bounds(los, his):
    """Child boxes of a batch of cells: (N, 2^p, p) lows and highs.

    Uses the same bisection arithmetic as _Cell.children_boxes, so the
    floats agree bit for bit.
    """
    mids = 0.5 * (los + his)
    masks = _split_masks(los.shape[1])[None, :, :]
    clo = np.where(masks, mids[:, None, :], los[:, None, :])
    chi = np.where(masks, his[:, None, :], mids[:, None, :])
    return clo, chi


def _batch_fill(cells, evaluator, with_own=True):
    """Fill the three refinement levels of freshly created cells."""
    if not cells:
        return
    p = len(cells[0].lo)
    nc = 2**p
    los = np.array([c.lo for c in cells])
    his = np.array([c.hi for c in cells])
    vols = np.prod(his - los, axis=1)
    if with_own:
        own = evaluator(0.5 * (los + his)) * vols
        for i, c in enumerate(cells):
            c.i0 = float(own[i])
    clo, chi = _children_bounds(los, his)
    child_mids = 0.5 * (clo + chi)
    child_vals = evaluator(child_mids.reshape(-1, p)) * np.repeat(vols / nc, nc)
    child_vals = child_vals.reshape(len(cells), nc)
    glo, ghi = _children_bounds(clo.reshape(-1, p), chi.reshape(-1, p))
    grand_mids = 0.5 * (glo + ghi)
    grand_vals = evaluator(grand_mids.reshape(-1, p)) * np.repeat(vols / nc**2, nc**2)
    grand_vals = grand_vals.reshape(len(cells), nc, nc)
    for i, c in enumerate(cells):
        c.child_i0 = child_vals[i]
        c.grand_i0 = grand_vals[i]
        c.finalize()


def _refinable(cell, scale):
    rel = (cell.hi - cell.lo) / scale
    return bool(np.any(rel > _REFINE_FLOOR))


_MIN_DEPTH = 2  # every initial cell is refined this often before trusted


def _integrate_chart_deterministic(func, chart, tol, budget, workers):
    evaluator = _Evaluator(func, chart, workers)
    cells = _cells_from_breaks(chart.breaks)
    if not cells:
        raise BadRegion("chart produced no cells")
    scale = np.maximum(chart.hi - chart.lo, 1e-300)
    _batch_fill(cells, evaluator)
    drift = math.inf  # change of the total during the last refinement round
    while True:
        errs = np.array([c.err for c in cells])
        total_err = float(errs.sum())
        shallow = [i for i, c in enumerate(cells) if c.depth < _MIN_DEPTH]
        if total_err + (0.0 if drift == math.inf else drift) <= tol and not shallow:
            break
        if evaluator.evals >= budget:
            break
        max_err = errs.max()
        thresh = max(tol / (2.0 * len(cells)), 0.25 * max_err)
        marked = [
            i for i in np.nonzero(errs >= thresh)[0] if _refinable(cells[i], scale)
        ]
        marked = sorted(set(marked) | set(shallow))
        if not marked and total_err > tol:
            # high-error cells are all at the refinement floor; work on the
            # largest refinable cells still above their fair share
            fair = tol / (2.0 * len(cells))
            order = np.argsort(-errs, kind="stable")
            marked = [
                i for i in order
                if errs[i] >= fair and _refinable(cells[i], scale)
            ][:1024]
        if not marked and drift > tol and drift < math.inf:
            # the last round still moved the total but no indicator stands
            # out: chase features hiding between stencil points in the
            # largest remaining cells
            vols = np.array([np.prod(c.hi - c.lo) for c in cells])
            order = np.argsort(-vols, kind="stable")
            marked = [i for i in order if _refinable(cells[i], scale)][:256]
        if not marked:
            break
        marked_set = set(marked)
        new_lists = {}
        fresh = []
        drift_terms = []
        for i in marked:
            parent = cells[i]
            kids = [
                _Cell(lo, hi, parent.depth + 1) for lo, hi in parent.children_boxes()
            ]
            for k, kid in enumerate(kids):
                kid.i0 = float(parent.child_i0[k])
                kid.child_i0 = parent.grand_i0[k].copy()
            new_lists[i] = kids
            fresh.extend(kids)
        # each child still needs its grandchild level
        _batch_grand(fresh, evaluator)
        for i in marked:
            kid_sum = math.fsum(k.value for k in new_lists[i])
            drift_terms.append(abs(kid_sum - cells[i].value))
        drift = math.fsum(drift_terms)
        out = []
        for i, c in enumerate(cells):
            if i in marked_set:
                out.extend(new_lists[i])
            else:
                out.append(c)
        cells = out
    value = math.fsum(c.value for c in cells)
    err = math.fsum(c.err for c in cells)
    if drift != math.inf:
        err += drift
    return value, err, evaluator.evals


def _batch_grand(cells, evaluator):
    """Fill only the grandchild level (i0 and child_i0 already present)."""
    if not cells:
        return
    p = len(cells[0].lo)
    nc = 2**p
    los = np.array([c.lo for c in cells])
    his = np.array([c.hi for c in cells])
    vols = np.prod(his - los, axis=1)
    clo, chi = _children_bounds(los, his)
    glo, ghi = _children_bounds(clo.reshape(-1, p), chi.reshape(-1, p))
    grand_mids = 0.5 * (glo + ghi)
    grand_vals = evaluator(grand_mids.reshape(-1, p)) * np.repeat(vols / nc**2, nc**2)
    grand_vals = grand_vals.reshape(len(cells), nc, nc)
    for i, c in enumerate(cells):
        c.grand_i0 = grand_vals[i]
        c.finalize()


# ---------------------------------------------------------------------------
# stratified Monte Carlo engine
# ---------------------------------------------------------------------------


def _philox_uniform(seed, chart_idx, cell_idx, round_idx, n, p):
    # counter-based: the stream is keyed by (seed, chart, cell, round), so
    # samples are independent of evaluation order and worker count
    key = np.array(
        [
            (int(seed) & 0xFFFFFFFFFFFFFFFF) ^ (int(chart_idx) << 32),
            (int(cell_idx) & 0xFFFFFFFFFFFFFFFF) ^ (int(round_idx) << 48),
        ],
        dtype=np.uint64,
    )
    gen = np.random.Generator(np.random.Philox(key=key))
    return gen.random((n, p))


def _integrate_chart_mc(func, chart, tol, budget, seed, chart_idx, workers,
                        base_samples=32):
    evaluator = _Evaluator(func, chart, workers)
    cells = _cells_from_breaks(chart.breaks)
    p = len(chart.lo)
    means = np.zeros(len(cells))
    sq_means = np.zeros(len(cells))
    counts = np.zeros(len(cells), dtype=int)
    vols = np.array([np.prod(c.hi - c.lo) for c in cells])

    def sample(idx, round_idx, n):
        c = cells[idx]
        u = _philox_uniform(seed, chart_idx, idx, round_idx, n, p)
        params = c.lo + u * (c.hi - c.lo)
        vals = evaluator(params)  # already f * jac
        m = counts[idx]
        tot = means[idx] * m + vals.sum()
        tot_sq = sq_means[idx] * m + (vals**2).sum()
        counts[idx] = m + n
        means[idx] = tot / counts[idx]
        sq_means[idx] = tot_sq / counts[idx]

    for i in range(len(cells)):
        sample(i, 0, base_samples)
    round_idx = 1
    while True:
        var = np.maximum(sq_means - means**2, 0.0)
        cell_var = vols**2 * var / np.maximum(counts, 1)
        err = 3.0 * math.sqrt(float(cell_var.sum()))
        if err <= tol or evaluator.evals >= budget:
            break
        order = np.argsort(-cell_var, kind="stable")
        top = order[: max(1, len(cells) // 4)]
        for i in top:
            sample(int(i), round_idx, counts[int(i)])
        round_idx += 1
    value = float(np.dot(vols, means))
    var = np.maximum(sq_means - means**2, 0.0)
    err = 3.0 * math.sqrt(float((vols**2 * var / np.maximum(counts, 1)).sum()))
    return value, err, evaluator.evals


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------


def integrate(integrand, region, tol=1e-8, seed=0, mode="deterministic",
              budget=None, workers=None):
    """Integrate a pointwise function over a region.

    Returns (value, error_bound).  Deterministic for fixed inputs, including
    under any worker count.  Raises TolNotReached when the evaluation budget
    runs out with the estimated error still above tol.
    """
    charts = region.charts() if hasattr(region, "charts") else list(region)
    if not charts:
        raise BadRegion("region has no charts")
    budget = budget or _DEFAULT_BUDGET
    workers = _worker_count(workers)
    per_chart_tol = tol / len(charts)
    total = 0.0
    total_err = 0.0
    evals = 0
    values = []
    for idx, chart in enumerate(charts):
        remaining = max(budget - evals, 1000)
        if mode == "deterministic":
            v, e, n = _integrate_chart_deterministic(
                integrand, chart, per_chart_tol, remaining, workers
            )
        elif mode == "monte-carlo":
            v, e, n = _integrate_chart_mc(
                integrand, chart, per_chart_tol, remaining, seed, idx, workers
            )
        else:
            raise ValueError(f"unknown quadrature mode {mode!r}")
        values.append(v)
        total_err += e
        evals += n
    total = math.fsum(values)
    if total_err > tol and evals >= budget:
        raise TolNotReached(total, total_err)
    return total, total_err


# ---------------------------------------------------------------------------
# radius schedules and limit extrapolation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RadiusSchedule:
    """Geometric radius sequence r_k = r0 * ratio^k, k = 0..count-1."""

    r0: float
    ratio: float = 0.5
    count: int = 12

    def __post_init__(self):
        if not (self.r0 > 0 and 0.0 < self.ratio < 1.0 and self.count >= 1):
            raise ValueError("need r0 > 0, ratio in (0,1), count >= 1")

    def radii(self):
        return self.r0 * self.ratio ** np.arange(self.count)


@dataclass
class LimitEstimate:
    """Extrapolated limit of a radius-indexed quantity, with bands."""

    samples: list = field(default_factory=list)  # (r, value, error_bound)
    limit: float | None = None
    liminf_band: tuple = (math.nan, math.nan)
    limsup_band: tuple = (math.nan, math.nan)
    classification: str = "inconclusive"

    def tail(self):
        m = max(4, -(-len(self.samples) // 2))  # ceil(count/2)
        return self.samples[-m:]


def limit_estimate(sampler, schedule, osc_tol=1e-3):
    """Classify the r -> 0 behaviour of sampler(r) along a schedule.

    The sampler may return a bare value or a (value, error_bound) pair.
    Classification is driven by the residual of a linear model value = L + a*r
    over the tail of the schedule; a drift-free wiggle marks the sequence
    oscillatory, with liminf/limsup bands taken from the tail.
    """
    radii = schedule.radii()
    if len(radii) < 4:
        raise TooFewSamples(f"schedule count {len(radii)} < 4")
    samples = []
    for r in radii:
        out = sampler(float(r))
        if isinstance(out, tuple):
            v, e = out
        else:
            v, e = out, 0.0
        samples.append((float(r), float(v), float(e)))
    est = LimitEstimate(samples=samples)
    tail = est.tail()
    rs = np.array([s[0] for s in tail])
    vs = np.array([s[1] for s in tail])
    errs = np.array([s[2] for s in tail])
    a, L = np.polyfit(rs, vs, 1)
    resid = vs - (a * rs + L)
    max_resid = float(np.max(np.abs(resid)))
    scale = max(1.0, float(np.max(np.abs(vs))))
    quad_err = float(np.max(errs))
    thresh = osc_tol * scale + 5.0 * quad_err
    diffs = np.diff(vs)
    total_var = float(np.sum(np.abs(diffs)))
    excess_var = total_var - abs(float(np.sum(diffs)))
    if max_resid <= thresh:
        est.classification = "convergent"
        est.limit = float(L)
        u = max(max_resid, osc_tol * scale) + quad_err
        est.liminf_band = (L - u, L + u)
        est.limsup_band = (L - u, L + u)
    else:
        est.classification = (
            "oscillatory" if excess_var >= 0.5 * total_var else "inconclusive"
        )
        lo, hi = float(np.min(vs)), float(np.max(vs))
        est.liminf_band = (lo - quad_err, lo + quad_err)
        est.limsup_band = (hi - quad_err, hi + quad_err)
    return est
