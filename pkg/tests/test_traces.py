import math

import numpy as np
import pytest

from tracelab import fields
from tracelab import testfunctions as tfs
from tracelab import traces
from tracelab.geometry import Domain, circle_patch, segment_patch
from tracelab.quadrature import RadiusSchedule

DISK = Domain.unit_disk()
HALF_PLANE = Domain.half_plane_window(-1.0, 2.0, 1.0)
IDENT = fields.identity_field()


def test_pairing_identity_field_disk():
    # phi == 1 on the closed disk: pairing = int 2 dx = 2 pi, the boundary flux
    phi = tfs.plateau_menu(1, DISK)[0]
    v, e = traces.distributional_pairing(IDENT, IDENT.divergence_info(), DISK, phi)
    assert abs(v - 2 * math.pi) <= e + 1e-12


def test_pairing_tiled_vanishes():
    tiled = fields.TiledField()
    phi = tfs.bump_at((0.5, 0.0), 0.45)
    v, e = traces.distributional_pairing(
        tiled, tiled.divergence_info(), HALF_PLANE, phi, tol=3e-4, budget=1_500_000
    )
    assert abs(v) <= 1e-3


def test_pairing_radial_dirac_mass():
    # oracle: the analytic flux of x/|x|^2 through upper half-circles is pi
    # for every radius, so the pairing against a bump at 0 is -pi * phi(0)
    hd = Domain.half_disk()
    radial = fields.RadialField()
    for s in (0.3, 0.05):
        theta = np.linspace(0.0, math.pi, 20001)[:-1] + math.pi / 40000
        pts = s * np.stack([np.cos(theta), np.sin(theta)], axis=1)
        u = radial.eval(pts)
        n = pts / s
        flux = float(np.einsum("ij,ij->i", u, n).mean() * math.pi * s)
        assert abs(flux - math.pi) < 1e-12
    phi = tfs.bump_at((0.0, 0.0), 2.0**-8)
    v, e = traces.distributional_pairing(radial, radial.divergence_info(), hd, phi,
                                         tol=1e-4)
    assert abs(v - (-math.pi)) < 0.02 * math.pi


def test_blowup_shear_attained_zero():
    sched = RadiusSchedule(0.25, 0.5, 8)
    shear = fields.ShearField("sin-inv")
    ts = traces.blowup_profile(shear, HALF_PLANE, (0.5, 0.0), 0.0, sched)
    assert ts.classification == "lebesgue-trace-attained"
    assert abs(ts.profile.limit) < 1e-10


def test_blowup_identity_disk():
    # u . grad d = -|x| on the disk: inward trace -1, attained
    sched = RadiusSchedule(0.25, 0.5, 8)
    ts = traces.blowup_profile(IDENT, DISK, (1.0, 0.0), -1.0, sched)
    assert ts.classification == "lebesgue-trace-attained"
    assert abs(ts.profile.limit) < 1e-3
    assert ts.outward == 1.0


def test_blowup_tiled_not_attained_with_floor():
    sched = RadiusSchedule(2.0**-4, 0.5, 6)
    tiled = fields.TiledField()
    ts = traces.blowup_profile(
        tiled, HALF_PLANE, (0.3, 0.0), 0.0, sched, tol=3e-3, budget=200_000
    )
    assert ts.classification == "not-attained"
    floor = 1.0 / (2.0 * math.pi**2)
    assert min(v for _, v, _ in ts.profile.samples) >= floor


def test_trace_uniqueness_invariant():
    # a wrong candidate f' = f + 1 forces the profile above the corner
    # volume fraction of the domain (pi/2 for half-ball neighborhoods)
    sched = RadiusSchedule(0.125, 0.5, 6)
    ts = traces.blowup_profile(IDENT, DISK, (1.0, 0.0), 0.0, sched)
    assert ts.classification == "not-attained"
    tail = [v for _, v, _ in ts.profile.samples][-3:]
    assert min(tail) >= 1.0 * (math.pi / 2) * 0.9


def test_candidate_extraction_matches_sign_convention():
    sched = RadiusSchedule(0.125, 0.5, 8)
    cand, _, _ = traces.signed_average_candidate(IDENT, DISK, (1.0, 0.0), sched)
    assert abs(cand - (-1.0)) < 1e-3  # inward limit of u . grad d


def test_pos_neg_part_profiles_polynomial_field():
    # at attained points the positive/negative parts converge separately
    sched = RadiusSchedule(0.125, 0.5, 6)
    rng = np.random.default_rng(2)
    thetas = rng.random(10) * 2 * math.pi
    for th in thetas:
        x = (math.cos(th), math.sin(th))
        cand, _, _ = traces.signed_average_candidate(IDENT, DISK, x, sched)
        for part in ("pos-deviation", "neg-deviation"):
            ts = traces.blowup_profile(IDENT, DISK, x, cand, sched, part=part)
            assert ts.classification == "lebesgue-trace-attained"


def test_boundary_trace_field_rotation():
    sched = RadiusSchedule(0.125, 0.5, 5)
    rot = fields.RotationField()
    samples, frac = traces.boundary_trace_field(rot, DISK, circle_patch(DISK), 6, sched)
    assert frac == 1.0
    assert all(abs(s.candidate) < 1e-8 for s in samples)


def test_boundary_trace_field_lift():
    dom = Domain.half_space_3d_window()
    from tracelab.geometry import bottom_face_patch

    patch = bottom_face_patch(dom)
    lift = fields.DepauwLiftField()
    sched = RadiusSchedule(0.125, 0.5, 5)
    samples, frac = traces.boundary_trace_field(
        lift, dom, patch, 4, sched, tol=1e-3, budget=100_000
    )
    assert frac == 1.0
    for s in samples:
        assert abs(s.outward - (-1.0)) < 1e-2


def test_tubular_pairing_constant():
    sched = RadiusSchedule(0.0625, 0.5, 5)
    quarter = circle_patch(DISK, 0.0, math.pi / 2)
    est = traces.tubular_pairing(
        lambda pts: np.full(len(pts), 2.5), quarter, tfs.constant_one(), sched
    )
    assert est.classification == "convergent"
    assert abs(est.limit - 2.5 * math.pi / 2) < 1e-3


def test_tubular_pairing_height_on_upper_arc():
    # scalar x2 over the upper half circle tube: limit int_arc x2 dH = 2
    sched = RadiusSchedule(0.0625, 0.5, 5)
    upper = circle_patch(DISK, 0.0, math.pi)
    est = traces.tubular_pairing(
        lambda pts: pts[:, 1], upper, tfs.constant_one(), sched
    )
    assert abs(est.limit - 2.0) < 2e-3


def test_tubular_tiled_rows_vs_quadrature():
    tiled = fields.TiledField()
    seg = segment_patch(HALF_PLANE, 0.0, 1.0)
    sched = RadiusSchedule(2.0**-5, 0.5, 4)
    est = traces.tubular_pairing(
        lambda pts: np.abs(tiled.eval(pts)[:, 1]), seg, tfs.constant_one(), sched,
        tol=3e-3, budget=300_000,
    )
    from tracelab.quadrature import integrate, tube_cap_charts

    for r, v, e in est.samples:
        rows = tiled.tube_abs_e2_rows(r)
        caps, cap_err = traces._integrate_soft(
            lambda pts: np.abs(tiled.eval(pts)[:, 1]),
            tube_cap_charts(seg, r), tol=1e-4 * r, budget=200_000,
        )
        oracle = (rows + caps) / r
        # few-percent cross-validation of the generic engine on the rough
        # absolute-value integrand
        assert abs(v - oracle) <= 2.0 * (e + cap_err / r) + 1e-2


def test_gauss_green_identity_field():
    menu = tfs.plateau_menu(6, DISK)
    rows = traces.gauss_green_residual(
        IDENT, IDENT.divergence_info(), DISK, lambda pts: np.ones(len(pts)), menu
    )
    for resid, scale in rows:
        assert resid / scale < 1e-6


def test_gauss_green_tiled_zero_trace():
    tiled = fields.TiledField()
    phi = tfs.bump_at((0.5, 0.0), 0.4)
    v, e = traces.distributional_pairing(
        tiled, tiled.divergence_info(), HALF_PLANE, phi, tol=3e-4, budget=1_000_000
    )
    # boundary integral of the zero trace is zero: the pairing is the residual
    assert abs(v - 0.0) <= 1.5e-3


def test_signed_flux_cases():
    sched = RadiusSchedule(0.0625, 0.5, 6)
    full = circle_patch(DISK)
    est = traces.signed_flux(fields.identity_field(-1.0), DISK, full, "+", sched)
    assert abs(est.limit - 2 * math.pi) < 1e-3
    est = traces.signed_flux(IDENT, DISK, full, "+", sched)
    assert abs(est.limit) < 1e-6
    for sign in "+-":
        est = traces.signed_flux(fields.RotationField(), DISK, full, sign, sched)
        assert abs(est.limit) < 1e-9


def test_gluing_three_cases():
    menu = [tfs.plateau_menu(1, DISK)[0]]
    for fin, fout, label in [
        (fields.identity_field(), fields.RadialField(), "zero-jump"),
        (fields.identity_field(), fields.identity_field(2.0), "unit-jump"),
        (fields.identity_field(), fields.identity_field(), "continuous"),
    ]:
        rows = traces.gluing_surface_divergence(fin, fout, DISK, menu)
        assert rows[0]["residual"] < 1e-3, label
    # the unit-jump case measures the full surface measure
    rows = traces.gluing_surface_divergence(
        fields.identity_field(), fields.identity_field(2.0), DISK, menu
    )
    assert abs(rows[0]["measured"] - 2 * math.pi) < 1e-3


def test_chain_rule_cases():
    full = circle_patch(DISK)
    assert traces.chain_rule_check(
        IDENT, lambda p: p[:, 0], lambda s: s**2, DISK, full
    ) < 1e-10
    assert traces.chain_rule_check(
        IDENT, lambda p: np.full(len(p), 1.3), lambda s: s**2, DISK, full
    ) < 1e-10
    assert traces.chain_rule_check(
        fields.RotationField(), lambda p: p[:, 0], lambda s: s**2, DISK, full
    ) == 0.0


def test_pairing_depends_only_on_boundary_values_for_divfree():
    # two test functions agreeing near the boundary pair equally
    rot = fields.RotationField()
    div = rot.divergence_info()
    base = tfs.plateau_menu(3, DISK)[2]
    bump = tfs.bump_at((0.1, -0.2), 0.3)

    class Sum:
        support_radius = base.support_radius

        def value(self, pts):
            return base.value(pts) + bump.value(pts)

        def gradient(self, pts):
            return base.gradient(pts) + bump.gradient(pts)

    v1, e1 = traces.distributional_pairing(rot, div, DISK, base, tol=1e-8)
    v2, e2 = traces.distributional_pairing(rot, div, DISK, Sum(), tol=1e-8)
    assert abs(v1 - v2) <= 3 * (e1 + e2) + 1e-7
