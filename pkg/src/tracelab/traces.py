"""Boundary-trace estimators: distributional pairings, blow-up profiles,
tubular averages, Gauss-Green residuals, signed fluxes, gluing and the
trace chain rule.

Two trace notions are realized.  The distributional pairing imposes the
Gauss-Green identity against test functions.  The pointwise (Lebesgue-type)
trace runs blow-up averages of u . grad(d) over half-balls along a radius
schedule and classifies whether the deviation profile vanishes.  The sign
convention: grad(d) points inward, so the inward trace is the blow-up limit
and the outward trace is its negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import TolNotReached
from .quadrature import RegionSpec, integrate, limit_estimate

HALF_BALL_FRACTION = {2: math.pi / 2.0, 3: 2.0 * math.pi / 3.0}

# a deviation-profile limit below this (or 5x the quadrature error) counts
# as an attained trace; chosen to clear the tiled field's positive floor
ATTAINED_TOL = 1e-2


def _integrate_soft(integrand, region, tol, **kw):
    """integrate() that degrades to (value, bound) when the budget runs out."""
    try:
        return integrate(integrand, region, tol=tol, **kw)
    except TolNotReached as exc:
        return exc.value, exc.error_bound


def u_dot_grad_d(field, domain, t=None):
    """Vectorized integrand x -> u(x) . grad d_boundary(x)."""

    def f(pts):
        u = field.eval(pts, t) if field.time_dependent else field.eval(pts)
        g = domain.grad_distance_ae(pts)
        return np.einsum("ij,ij->i", np.atleast_2d(u), np.atleast_2d(g))

    return f


# ---------------------------------------------------------------------------
# distributional trace
# ---------------------------------------------------------------------------


def distributional_pairing(field, div, domain, testfn, tol=1e-7, budget=None,
                           mode="deterministic", seed=0):
    """<tr_n u, phi> = int_Omega phi d(div u) + int_Omega u . grad phi.

    Returns (value, error_bound).  The test function supplies its exact
    gradient; the divergence enters through its metadata (zero or an
    absolutely continuous density).
    """

    def f(pts):
        u = np.atleast_2d(field.eval(pts))
        out = np.einsum("ij,ij->i", u, testfn.gradient(pts))
        if div.tag == "absolutely-continuous":
            out = out + testfn.value(pts) * div.density(pts)
        elif div.tag != "zero":
            raise ValueError(f"cannot pair divergence tag {div.tag!r}")
        return out

    region = RegionSpec.whole(domain, singular_point=field.singular_point)
    return _integrate_soft(f, region, tol, budget=budget, mode=mode, seed=seed)


# ---------------------------------------------------------------------------
# pointwise blow-up profiles
# ---------------------------------------------------------------------------


@dataclass
class TraceSample:
    """Blow-up verdict at one boundary point."""

    point: tuple
    candidate: float  # inward trace candidate f(x)
    profile: object  # LimitEstimate of the deviation average
    classification: str  # lebesgue-trace-attained | not-attained | inconclusive

    @property
    def outward(self):
        return -self.candidate


def _profile_sampler(field, domain, x, transform, tol, budget):
    x = np.asarray(x, dtype=float)
    d = domain.dim
    g = u_dot_grad_d(field, domain)

    def sampler(r):
        region = RegionSpec.ball(
            domain, x, r, singular_point=field.singular_point
        )
        val, err = _integrate_soft(
            lambda pts: transform(g(pts)), region, tol * r**d, budget=budget
        )
        return val / r**d, err / r**d

    return sampler


def blowup_profile(field, domain, x, f, schedule, tol=1e-4, budget=250_000,
                   part="deviation", osc_tol=1e-3):
    """Deviation blow-up (1/r^d) int_{B_r(x) cap Omega} |u . grad d - f|.

    part 'pos-deviation'/'neg-deviation' test the positive/negative parts
    against (f)_+ / (f)_-.  Classification: attained iff the profile
    converges to (numerically) zero; not attained iff it provably stays
    above the attainment tolerance; inconclusive otherwise.
    """
    f = float(f)
    if part == "deviation":
        transform = lambda g: np.abs(g - f)
    elif part == "pos-deviation":
        fp = max(f, 0.0)
        transform = lambda g: np.abs(np.maximum(g, 0.0) - fp)
    elif part == "neg-deviation":
        fm = max(-f, 0.0)
        transform = lambda g: np.abs(np.maximum(-g, 0.0) - fm)
    else:
        raise ValueError(f"unknown profile part {part!r}")
    sampler = _profile_sampler(field, domain, x, transform, tol, budget)
    est = limit_estimate(sampler, schedule, osc_tol=osc_tol)
    quad_err = max(e for _, _, e in est.tail())
    attained_tol = max(ATTAINED_TOL, 5.0 * quad_err)
    if est.classification == "convergent" and abs(est.limit) <= attained_tol:
        label = "lebesgue-trace-attained"
    elif est.classification == "convergent" and est.limit > attained_tol:
        label = "not-attained"
    elif est.liminf_band[0] > attained_tol:
        label = "not-attained"
    else:
        label = "inconclusive"
    return TraceSample(tuple(x), f, est, label)


def signed_average_candidate(field, domain, x, schedule, tol=1e-4,
                             budget=250_000):
    """Inward trace candidate: blow-up of u . grad d over the local volume.

    Both the signed average and the half-ball volume fraction are
    extrapolated; their ratio is the candidate (exact at smooth boundary
    points where the fraction tends to the half-ball volume).
    """
    signed = _profile_sampler(field, domain, x, lambda g: g, tol, budget)
    est_signed = limit_estimate(signed, schedule)
    vol = _volume_fraction_sampler(domain, x, tol, budget)
    est_vol = limit_estimate(vol, schedule)

    def _fit_limit(est):
        if est.limit is not None:
            return est.limit
        tail = est.tail()
        rs = np.array([s[0] for s in tail])
        vs = np.array([s[1] for s in tail])
        return float(np.polyfit(rs, vs, 1)[1])

    frac = _fit_limit(est_vol)
    if frac <= 0:
        raise ValueError("vanishing local volume fraction")
    return _fit_limit(est_signed) / frac, est_signed, est_vol


def _volume_fraction_sampler(domain, x, tol, budget):
    x = np.asarray(x, dtype=float)
    d = domain.dim

    def sampler(r):
        region = RegionSpec.ball(domain, x, r)
        val, err = _integrate_soft(
            lambda pts: np.ones(len(pts)), region, tol * r**d, budget=budget
        )
        return val / r**d, err / r**d

    return sampler


def boundary_trace_field(field, domain, patch, n, schedule, tol=1e-4,
                         budget=250_000):
    """Blow-up trace analysis at n quadrature nodes of a boundary patch.

    The candidate at each node is the extrapolated signed average divided by
    the local volume fraction; attainment is judged on the deviation
    profile.  Returns (samples, fraction of attained nodes).
    """
    nodes, _, _ = patch.quadrature(n)
    samples = []
    for node in nodes:
        cand, _, _ = signed_average_candidate(
            field, domain, node, schedule, tol, budget
        )
        samples.append(
            blowup_profile(field, domain, node, cand, schedule, tol, budget)
        )
    attained = sum(
        1 for s in samples if s.classification == "lebesgue-trace-attained"
    )
    return samples, attained / max(len(samples), 1)


# ---------------------------------------------------------------------------
# tubular pairing and signed flux
# ---------------------------------------------------------------------------


def tubular_pairing(scalar_fn, patch, testfn, schedule, tol=1e-6,
                    budget=600_000, osc_tol=1e-3):
    """Samples (1/r) int over the inner tube of scalar_fn * phi, extrapolated."""

    def sampler(r):
        region = RegionSpec.inner_tube(patch, r)
        val, err = _integrate_soft(
            lambda pts: scalar_fn(pts) * testfn.value(pts),
            region,
            tol * r,
            budget=budget,
        )
        return val / r, err / r

    return limit_estimate(sampler, schedule, osc_tol=osc_tol)


def signed_flux(field, domain, patch, sign, schedule, tol=1e-6,
                budget=600_000):
    """(1/r) int over the inner tube of (u . grad d)_+ or (u . grad d)_-."""
    g = u_dot_grad_d(field, domain)
    if sign == "+":
        transform = lambda v: np.maximum(v, 0.0)
    elif sign == "-":
        transform = lambda v: np.maximum(-v, 0.0)
    else:
        raise ValueError("sign must be '+' or '-'")

    def sampler(r):
        region = RegionSpec.inner_tube(patch, r)
        val, err = _integrate_soft(
            lambda pts: transform(g(pts)), region, tol * r, budget=budget
        )
        return val / r, err / r

    return limit_estimate(sampler, schedule)


# ---------------------------------------------------------------------------
# Gauss-Green residuals
# ---------------------------------------------------------------------------


def gauss_green_residual(field, div, domain, trace_values, testfns, tol=1e-8,
                         boundary_nodes=4096, budget=None):
    """|pairing(phi) - int_boundary trace * phi| for each test function.

    trace_values: callable on boundary points.  Returns a list of
    (residual, scale) pairs, the scale being the boundary integral of
    |trace * phi| (plus 1 floor) for relative comparisons.
    """
    patch = domain.full_boundary()
    pts, w, _ = patch.quadrature(boundary_nodes)
    tr = np.asarray(trace_values(pts), dtype=float)
    out = []
    for phi in testfns:
        pairing, perr = distributional_pairing(
            field, div, domain, phi, tol=tol, budget=budget
        )
        boundary = float(np.dot(w, tr * phi.value(pts)))
        scale = float(np.dot(w, np.abs(tr * phi.value(pts)))) + 1.0
        out.append((abs(pairing - boundary), scale))
    return out


# ---------------------------------------------------------------------------
# gluing of inner and outer fields
# ---------------------------------------------------------------------------


def gluing_surface_divergence(field_in, field_out, domain, testfns, tol=1e-7,
                              budget=None):
    """Surface divergence of a glued field, measured vs predicted.

    measured(phi) = -(int_Omega u_in . grad phi + phi d(div_in)
                      + int_{complement} u_out . grad phi + phi d(div_out));
    predicted(phi) = int_boundary (u_out - u_in) . n phi, the gluing surface
    density for fields smooth up to the boundary on both sides.  Returns one
    record per test function.
    """
    if domain.kind != "unit-disk":
        raise ValueError("gluing is set up on the disk examples")
    patch = domain.full_boundary()
    div_in = field_in.divergence_info()
    div_out = field_out.divergence_info()
    results = []
    bpts, bw, bnorm = patch.quadrature(4096)
    for phi in testfns:
        inner, ierr = distributional_pairing(
            field_in, div_in, domain, phi, tol=tol, budget=budget
        )
        sup_center = np.asarray(phi.center, dtype=float)
        reach = float(np.linalg.norm(sup_center - domain.center)) + phi.support_radius
        width = reach - domain.radius
        if width <= 0:
            outer_val, oerr = 0.0, 0.0
        else:
            region = RegionSpec.outer_tube(patch, width + 1e-9)

            def f_out(pts):
                u = np.atleast_2d(field_out.eval(pts))
                out = np.einsum("ij,ij->i", u, phi.gradient(pts))
                if div_out.tag == "absolutely-continuous":
                    out = out + phi.value(pts) * div_out.density(pts)
                return out

            outer_val, oerr = _integrate_soft(f_out, region, tol, budget=budget)
        measured = -(inner + outer_val)
        u_in_b = np.atleast_2d(field_in.eval(bpts))
        u_out_b = np.atleast_2d(field_out.eval(bpts))
        jump = np.einsum("ij,ij->i", u_out_b - u_in_b, bnorm)
        predicted = float(np.dot(bw, jump * phi.value(bpts)))
        results.append(
            {
                "measured": measured,
                "predicted": predicted,
                "residual": abs(measured - predicted),
                "error_bound": ierr + oerr,
            }
        )
    return results


# ---------------------------------------------------------------------------
# chain rule for the normal trace (smooth data check)
# ---------------------------------------------------------------------------


def chain_rule_check(field, rho, beta, domain, patch, tol=1e-10, n=1024,
                     trace_floor=1e-8):
    """Residual of tr(beta(rho) u) = beta(tr(rho u)/tr u) tr u on smooth data.

    Evaluated pointwise at patch quadrature nodes; nodes with |tr u| below
    the floor are excluded (the right-hand side is arbitrary there).
    Returns the weighted L1 residual over the patch.
    """
    pts, w, normals = patch.quadrature(n)
    u = np.atleast_2d(field.eval(pts))
    tr_u = np.einsum("ij,ij->i", u, normals)
    rho_b = np.asarray(rho(pts), dtype=float)
    lhs = beta(rho_b) * tr_u
    keep = np.abs(tr_u) >= trace_floor
    rhs = np.zeros_like(lhs)
    ratio = np.where(keep, (rho_b * tr_u) / np.where(keep, tr_u, 1.0), 0.0)
    rhs[keep] = beta(ratio[keep]) * tr_u[keep]
    resid = np.abs(lhs - rhs)
    resid[~keep] = 0.0
    return float(np.dot(w, resid))
