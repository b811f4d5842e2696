"""Exact mixing engine for the continuity-equation non-uniqueness demo.

Everything lives on the periodic unit cell [0,1)^2.  A cascade of dyadic
stripe patterns is driven by per-slab velocity fields made of square
vortices: during slab k (time interval (2^-k-1, 2^-k], duration tau_k =
2^-k-1) each block of side 2^-k performs an exact half turn, which merges
width 2^-k-1 stripes into width 2^-k stripes.  Pattern evolution is an exact
permutation of grid cells; mid-slab states come from the exact inverse of
the square-contour shift, so no ODE integration is involved anywhere.

Slab indices start at k = 1: the k = 0 block lattice has horizontal period 2
and cannot live on the unit torus, so the cascade tops out at the width-1/2
stripe pattern, reached at t = 1/2, and the field is zero on (1/2, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LevelMismatch, OutsideSlab, TimeOutOfRange

# ---------------------------------------------------------------------------
# dyadic patterns
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DyadicPattern:
    """A +-1 valued function on the 2^level grid of the unit torus."""

    level: int
    values: np.ndarray  # shape (2^level, 2^level), int8, indexed [ix, iy]

    def __post_init__(self):
        n = 2**self.level
        if self.values.shape != (n, n):
            raise LevelMismatch(f"values shape {self.values.shape} != level {self.level}")

    @property
    def grid(self):
        return 2**self.level

    def batch_values(self, points):
        """Evaluate at ambient points (periodic, half-open cells)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = self.grid
        ix = np.floor(pts[:, 0] * n).astype(np.int64) % n
        iy = np.floor(pts[:, 1] * n).astype(np.int64) % n
        return self.values[ix, iy].astype(float)

    def value_at(self, point):
        return float(self.batch_values(np.atleast_2d(point))[0])

    def mean(self):
        """Exact spatial mean (integer cell sums)."""
        return float(int(self.values.sum(dtype=np.int64))) / self.grid**2

    def l2_mean(self):
        """Exact mean of the square."""
        return float(int((self.values.astype(np.int64) ** 2).sum())) / self.grid**2

    def refine(self, level):
        if level < self.level:
            raise LevelMismatch("cannot refine to a coarser level")
        f = 2 ** (level - self.level)
        vals = np.repeat(np.repeat(self.values, f, axis=0), f, axis=1)
        return DyadicPattern(level, vals)

    def coarsen(self):
        """Exact coarsening by one level; requires 2x2 constancy."""
        n = self.grid
        if n < 2:
            raise LevelMismatch("cannot coarsen level 0")
        v = self.values.reshape(n // 2, 2, n // 2, 2)
        if not (np.all(v == v[:, :1, :, :1])):
            raise LevelMismatch("pattern is not constant on 2x2 super-cells")
        return DyadicPattern(self.level - 1, v[:, 0, :, 0].copy())


def pattern(k):
    """Vertical stripe pattern of width 2^-k: sign (-1)^floor(2^k x).

    The level-0 pattern degenerates to the constant +1 on the unit cell
    (width-1 stripes do not alternate within one period); the mean-zero
    invariant holds for k >= 1.
    """
    if k < 0:
        raise ValueError("level must be nonnegative")
    n = 2**k
    col = np.where(np.arange(n) % 2 == 0, 1, -1).astype(np.int8)
    return DyadicPattern(k, np.repeat(col[:, None], n, axis=1))


def stripe_sign(k, points):
    """pattern(k) evaluated by formula; no grid is materialized."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    col = np.floor(np.mod(pts[:, 0], 1.0) * 2**k).astype(np.int64)
    return np.where(col % 2 == 0, 1.0, -1.0)


# ---------------------------------------------------------------------------
# slabs and block moves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SlabScheme:
    """Block layout of slab k >= 1 on the unit torus."""

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("slab index must be >= 1 on the unit torus")

    @property
    def t_start(self):
        return 2.0 ** -(self.k + 1)

    @property
    def t_end(self):
        return 2.0**-self.k

    @property
    def duration(self):
        return 2.0 ** -(self.k + 1)

    @property
    def block_side(self):
        return 2.0**-self.k

    def contains_time(self, t):
        return self.t_start < t <= self.t_end


def slab_of_time(t):
    """Slab index k with t in (2^-k-1, 2^-k]; k = 0 denotes the frozen tail."""
    if not (0.0 < t <= 1.0):
        raise TimeOutOfRange(f"t = {t} outside (0, 1]")
    mant, exp = math.frexp(t)
    k = 1 - exp if mant == 0.5 else -exp
    return max(k, 0)


def _block_geometry(k, pts):
    """Locate square-vortex blocks for slab k at periodic points.

    Returns (inside, xi, m, centers): offsets from block centers, sup-norm
    radii, and an inside-block mask.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    L = 2.0**-k
    half_col = 2.0 ** -(k + 1)
    x = np.mod(pts[:, 0], 1.0)
    y = np.mod(pts[:, 1], 1.0)
    q = np.floor(x / half_col).astype(np.int64)  # column of width 2^-k-1
    inside = np.isin(q % 4, (1, 2))
    a = (q - 1) // 4
    b = np.floor(y / L).astype(np.int64)
    cx = (2 * a + 1).astype(float) * L
    cy = (b + 0.5) * L
    centers = np.stack([cx, cy], axis=1)
    xi = np.stack([x, y], axis=1) - centers
    m = np.maximum(np.abs(xi[:, 0]), np.abs(xi[:, 1]))
    return inside, xi, m, centers


def _contour_params(xi, m):
    """Arclength position on the sup-norm square |xi|_inf = m, CCW from (m,-m)."""
    x1, x2 = xi[:, 0], xi[:, 1]
    s = np.zeros(len(xi))
    right = (x1 == m) & (x2 < m)
    top = (x2 == m) & (x1 > -m)
    left = (x1 == -m) & (x2 > -m)
    bottom = (x2 == -m) & (x1 < m)
    s = np.where(right, x2 + m, s)
    s = np.where(top, 3.0 * m - x1, s)
    s = np.where(left, 5.0 * m - x2, s)
    s = np.where(bottom, 7.0 * m + x1, s)
    degenerate = ~(right | top | left | bottom)  # only m == 0
    return np.where(degenerate, 0.0, s)


def _contour_point(s, m):
    """Inverse of _contour_params."""
    s = np.mod(s, 8.0 * m, where=m > 0, out=np.zeros_like(s))
    x1 = np.empty_like(s)
    x2 = np.empty_like(s)
    seg0 = s < 2.0 * m
    seg1 = (s >= 2.0 * m) & (s < 4.0 * m)
    seg2 = (s >= 4.0 * m) & (s < 6.0 * m)
    seg3 = s >= 6.0 * m
    x1[seg0] = m[seg0]
    x2[seg0] = s[seg0] - m[seg0]
    x1[seg1] = 3.0 * m[seg1] - s[seg1]
    x2[seg1] = m[seg1]
    x1[seg2] = -m[seg2]
    x2[seg2] = 5.0 * m[seg2] - s[seg2]
    x1[seg3] = s[seg3] - 7.0 * m[seg3]
    x2[seg3] = -m[seg3]
    zero = m == 0
    x1[zero] = 0.0
    x2[zero] = 0.0
    return np.stack([x1, x2], axis=1)


def contour_shift(xi, m, delta):
    """Slide points along their sup-norm contour by signed arclength delta.

    A shift by exactly half the perimeter (4m) is special-cased to the exact
    point reflection, so completed half turns carry no rounding error.
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    m = np.asarray(m, dtype=float)
    delta = np.broadcast_to(np.asarray(delta, dtype=float), m.shape)
    out = _contour_point(_contour_params(xi, m) + delta, m)
    exact_half = np.abs(delta) == 4.0 * m
    if np.any(exact_half):
        out = np.where(exact_half[:, None], -xi, out)
    return out


# ---------------------------------------------------------------------------
# pattern evolution (exact permutations)
# ---------------------------------------------------------------------------


def rotate_blocks(values, slab_k, turns=2):
    """Rotate every slab-k block of a cell grid by turns * 90 degrees CCW.

    The grid must be fine enough that block edges are cell edges.  This is a
    permutation of cells; ``turns=2`` (the half turn used by the cascade) is
    an involution.  Quarter turns are provided for experimentation only.
    """
    n = values.shape[0]
    level = n.bit_length() - 1
    if 2**level != n or values.shape != (n, n):
        raise LevelMismatch("values must be a square 2^level grid")
    if level < slab_k + 1:
        raise LevelMismatch(f"level {level} too coarse for slab {slab_k}")
    nb = 2 ** (level - slab_k)
    half = nb // 2
    shifted = np.roll(values, -half, axis=0)
    ncols = n // (2 * nb)
    nrows = n // nb
    blocks = shifted.reshape(ncols, 2 * nb, nrows, nb).copy()
    blocks[:, :nb] = np.rot90(blocks[:, :nb], k=turns, axes=(1, 3))
    return np.roll(blocks.reshape(n, n), half, axis=0)


def evolve_exact(p, slab_k):
    """Apply slab k's half-turn block moves to a pattern, exactly.

    The input must resolve the blocks (level >= slab_k + 1).  On the stripe
    cascade this merges width 2^-k-1 stripes into width 2^-k stripes; use
    ``DyadicPattern.coarsen`` to re-express the result at the coarser level.
    """
    if p.level < slab_k + 1:
        raise LevelMismatch(f"pattern level {p.level} < slab level {slab_k} + 1")
    return DyadicPattern(p.level, rotate_blocks(p.values, slab_k))


def cascade_pattern(k_from, k_to):
    """Run the cascade from pattern(k_from) down to level k_to (k_to < k_from)."""
    p = pattern(k_from)
    for k in range(k_from - 1, k_to - 1, -1):
        p = evolve_exact(p, k).coarsen()
    return p


# ---------------------------------------------------------------------------
# slab velocity field
# ---------------------------------------------------------------------------


def slab_field_eval(k, x, t):
    """Velocity of slab k at points x, time t in the slab.

    Inside each block: speed 4 m / tau_k along the counterclockwise tangent
    of the sup-norm level square of radius m about the block center; zero
    outside blocks.  The field is autonomous within its slab.
    """
    scheme = SlabScheme(k)
    if not scheme.contains_time(t):
        raise OutsideSlab(f"t = {t} not in ({scheme.t_start}, {scheme.t_end}]")
    single = np.asarray(x).ndim == 1
    vel = _slab_velocity(k, x)
    return vel[0] if single else vel


def _slab_velocity(k, x):
    scheme = SlabScheme(k)
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    inside, xi, m, _ = _block_geometry(k, pts)
    speed = 4.0 * m / scheme.duration
    x1, x2 = xi[:, 0], xi[:, 1]
    # tangent by edge sector of the level square (ties at corners follow the
    # CCW-incoming edge; the diagonals are the field's jump set)
    tx = np.zeros(len(pts))
    ty = np.zeros(len(pts))
    right = (x1 >= np.abs(x2)) & (x1 > 0)
    top = (x2 >= np.abs(x1)) & (x2 > 0) & ~right
    left = (-x1 >= np.abs(x2)) & (x1 < 0) & ~top
    bottom = (-x2 >= np.abs(x1)) & (x2 < 0) & ~(right | top | left)
    ty[right] = 1.0
    tx[top] = -1.0
    ty[left] = -1.0
    tx[bottom] = 1.0
    vel = speed[:, None] * np.stack([tx, ty], axis=1)
    vel[~inside] = 0.0
    return vel


def depauw_field_eval(x, t):
    """The assembled time-dependent field b(x, t) over all slabs.

    Zero on the frozen tail (1/2, 1]; raises TimeOutOfRange outside (0, 1].
    """
    k = slab_of_time(t)
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    single = np.asarray(x).ndim == 1
    if k == 0:
        out = np.zeros_like(pts)
    else:
        out = _slab_velocity(k, pts)
    return out[0] if single else out


def field_velocity_times(points2d, ts):
    """The assembled field b with a separate time per point."""
    pts = np.atleast_2d(np.asarray(points2d, dtype=float))
    ts = np.asarray(ts, dtype=float)
    if np.any((ts <= 0.0) | (ts > 1.0)):
        raise TimeOutOfRange("per-point times must lie in (0, 1]")
    mant, exp = np.frexp(ts)
    ks = np.maximum(np.where(mant == 0.5, 1 - exp, -exp), 0)
    out = np.zeros_like(pts)
    for k in np.unique(ks[ks > 0]):
        sel = ks == k
        out[sel] = _slab_velocity(int(k), pts[sel])
    return out


# ---------------------------------------------------------------------------
# weak solutions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeakSolution:
    """Label for a bounded weak solution of the cell transport problem."""

    label: str  # 'trivial-zero' or 'depauw-cascade'

    def __post_init__(self):
        if self.label not in ("trivial-zero", "depauw-cascade"):
            raise ValueError(f"unknown solution label {self.label!r}")


TRIVIAL = WeakSolution("trivial-zero")
CASCADE = WeakSolution("depauw-cascade")


def _cascade_eval_slab(k, pts, ts):
    """Cascade state for points in slab k; ts may vary per point."""
    scheme = SlabScheme(k)
    inside, xi, m, centers = _block_geometry(k, pts)
    delta = 4.0 * m * ((ts - scheme.t_start) / scheme.duration)
    pulled = np.where(
        inside[:, None], centers + contour_shift(xi, m, -delta), pts[:, :2]
    )
    return stripe_sign(k + 1, pulled)


def solution_eval(w, x, t):
    """Evaluate a weak solution at points x and a time t in (0, 1].

    For the cascade: inside a slab the state is the slab's starting pattern
    pulled back along the exact inverse contour shift; at slab ends this is
    exactly the permuted pattern.
    """
    k = slab_of_time(t)
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    single = np.asarray(x).ndim == 1
    if w.label == "trivial-zero":
        out = np.zeros(len(pts))
    elif k == 0:
        out = stripe_sign(1, pts)
    else:
        out = _cascade_eval_slab(k, pts, np.full(len(pts), float(t)))
    return float(out[0]) if single else out


def flow_forward(k, pts, dt_in_slab):
    """Forward flow of slab k applied for time dt within the slab."""
    scheme = SlabScheme(k)
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    inside, xi, m, centers = _block_geometry(k, pts)
    delta = 4.0 * m * (dt_in_slab / scheme.duration)
    return np.where(inside[:, None], centers + contour_shift(xi, m, delta), pts)


# ---------------------------------------------------------------------------
# weak-formulation residual
# ---------------------------------------------------------------------------


def weak_residual(w, testfn, level=8, t_cut=0.0):
    """|weak-form residual| of a solution against a space-time test function.

    Computes  integral_0^1 integral_cell w (dphi/dt + b . grad phi) dx dt
    (zero initial datum), slab by slab.  Within each slab the integral is
    rewritten through the exact measure-preserving flow substitution, so all
    integrand discontinuities are static and the fixed-level midpoint rule
    converges at first order.  Returns (residual, truncation_bound): the
    bound covers the discarded interval (0, t_cut] and is zero when the test
    function vanishes there.
    """
    n = 2**level
    mids = (np.arange(n) + 0.5) / n
    gx, gy = np.meshgrid(mids, mids, indexing="ij")
    xi_pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    cell_vol = 1.0 / n**2
    pieces = []

    if w.label == "trivial-zero":
        w0_frozen = np.zeros(len(xi_pts))
    else:
        w0_frozen = pattern(1).batch_values(xi_pts)

    # frozen tail (1/2, 1]: zero field, static state
    t0, t1 = max(0.5, t_cut), 1.0
    if t1 > t0 and testfn.active_between(t0, t1):
        nt = max(8, 2 ** (level - 3))
        tm = t0 + (np.arange(nt) + 0.5) / nt * (t1 - t0)
        dtw = (t1 - t0) / nt
        for t in tm:
            vals = w0_frozen * testfn.dt(xi_pts, t)
            pieces.append(vals.sum() * cell_vol * dtw)

    k = 1
    while True:
        scheme = SlabScheme(k)
        lo = max(scheme.t_start, t_cut)
        hi = scheme.t_end
        if hi <= t_cut:
            break
        if testfn.active_between(lo, hi) and hi > lo:
            if w.label == "trivial-zero":
                w0 = np.zeros(len(xi_pts))
            else:
                w0 = stripe_sign(k + 1, xi_pts)
            nt = max(2, 2 ** max(level - k - 1, 1))
            tm = lo + (np.arange(nt) + 0.5) / nt * (hi - lo)
            dtw = (hi - lo) / nt
            for t in tm:
                x_t = flow_forward(k, xi_pts, t - scheme.t_start)
                b = slab_field_eval(k, x_t, t)
                g = testfn.dt(x_t, t) + np.einsum("ij,ij->i", b, testfn.grad(x_t, t))
                pieces.append((w0 * g).sum() * cell_vol * dtw)
        if scheme.t_start <= t_cut or k >= 50:
            break
        k += 1

    residual = abs(math.fsum(pieces))
    trunc = 0.0
    if t_cut > 0.0 and testfn.active_between(0.0, t_cut):
        # |int w(t_cut) phi(t_cut)| <= Lip_x(phi) * stripe width at t_cut
        width = 2.0 ** -(slab_of_time(t_cut) + 1)
        trunc = 4.0 * testfn.lip_x * width
    return residual, trunc


# ---------------------------------------------------------------------------
# renormalization defect
# ---------------------------------------------------------------------------


def _is_dyadic_time(t):
    mant, _ = math.frexp(t)
    return mant == 0.5 or t == 1.0


def renormalization_defect(w, beta, times, level=9):
    """Cell integrals of beta(w(t)) and the t -> 0 jump against beta(0).

    Dyadic times use exact cell sums of the pattern; other times sample the
    exact mid-slab state on a fine grid.  The jump is the difference between
    the (constant) dyadic-time value and beta(0).
    """
    values = []
    for t in times:
        if w.label == "trivial-zero":
            values.append((float(t), float(beta(0.0)), True))
            continue
        if _is_dyadic_time(t):
            # stripe patterns at level >= 1 are exactly half +1, half -1
            exact = 0.5 * float(beta(1.0)) + 0.5 * float(beta(-1.0))
            values.append((float(t), exact, True))
        else:
            n = 2**level
            mids = (np.arange(n) + 0.5) / n
            gx, gy = np.meshgrid(mids, mids, indexing="ij")
            pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
            vals = solution_eval(w, pts, float(t))
            values.append((float(t), float(np.mean(beta(vals))), False))
    if w.label == "trivial-zero":
        jump = 0.0
    else:
        limit_value = 0.5 * float(beta(1.0)) + 0.5 * float(beta(-1.0))
        jump = abs(limit_value - float(beta(0.0)))
    return values, jump


# ---------------------------------------------------------------------------
# 3-d lift
# ---------------------------------------------------------------------------


def cascade_eval_times(points2d, ts):
    """Cascade state with a separate evaluation time per point."""
    pts = np.atleast_2d(np.asarray(points2d, dtype=float))
    ts = np.asarray(ts, dtype=float)
    if np.any((ts <= 0.0) | (ts > 1.0)):
        raise TimeOutOfRange("per-point times must lie in (0, 1]")
    mant, exp = np.frexp(ts)
    ks = np.where(mant == 0.5, 1 - exp, -exp)
    ks = np.maximum(ks, 0)
    out = np.empty(len(pts))
    frozen = ks == 0
    if np.any(frozen):
        out[frozen] = stripe_sign(1, pts[frozen])
    for k in np.unique(ks[~frozen]):
        sel = ks == k
        out[sel] = _cascade_eval_slab(int(k), pts[sel], ts[sel])
    return out


def lifted_solution_eval(x3, t):
    """The 3-d lifted solution w(y, r) 1_{r < t}, zero for r >= min(t, 1)."""
    pts = np.atleast_2d(np.asarray(x3, dtype=float))
    single = np.asarray(x3).ndim == 1
    out = np.zeros(len(pts))
    r = pts[:, 2]
    live = (r > 0.0) & (r < min(float(t), 1.0))
    if np.any(live):
        out[live] = cascade_eval_times(pts[live, :2], r[live])
    return float(out[0]) if single else out


def total_variation_estimate(k, grid_level=None, chunk=512):
    """Grid estimate of the per-slice total variation of the slab-k field."""
    level = grid_level if grid_level is not None else min(k + 3, 12)
    n = 2**level
    h = 1.0 / n
    t_mid = 0.75 * 2.0**-k  # interior of the slab
    mids = (np.arange(n) + 0.5) * h
    tv = 0.0
    prev_row = None
    for start in range(0, n, chunk):
        xs = mids[start : start + chunk]
        gx, gy = np.meshgrid(xs, mids, indexing="ij")
        pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
        b = slab_field_eval(k, pts, t_mid).reshape(len(xs), n, 2)
        dy = np.abs(np.diff(b, axis=1)).sum(axis=2)
        tv += dy.sum() * h
        if prev_row is not None:
            dx0 = np.abs(b[0] - prev_row).sum()
            tv += dx0 * h
        dx = np.abs(np.diff(b, axis=0)).sum(axis=2)
        tv += dx.sum() * h
        prev_row = b[-1]
    return float(tv)
