import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from escape_lab.bounds import cylinder_lower_bound, sigma_upper_bound
from escape_lab.geodesic import (
    DegenerateTurning,
    MinimalLoop,
    NoTurningPoint,
    RevolutionProfile,
    SearchParams,
    arc_from_turning,
    grid_oracle,
    half_oscillation,
    loop_table,
    minimal_loop,
    radius_cap,
    shoot_3d,
    stencil,
    turning_radius,
)
from escape_lab.geodesic import loops as loops_mod
from escape_lab.warp import ManifoldSpec, constant, custom, linear_cone, make_positive_limit, poly_decay

from conftest import flat, logd, poly, positive_limit, sphere

# (family, b, t_star, delta_phi, length) from 60-digit mpmath quadrature after
# the substitution t = t* - u^2, independent of the package's quadrature
MPMATH_ARCS = [
    ("PolyDecay", 0.999999, 0.0010000005000147529, 2.2214428574818455, 2.2214428574811513),
    ("PolyDecay", 0.999, 0.031638599858416647, 2.2228316162055637, 2.2228309208407966),
    ("PolyDecay", 0.5, 1.0, 3.9132325582384724, 3.3715007096251921),
    ("PolyDecay", 0.01, 9.9498743710661994, 880.10784104952506, 26.160994058799995),
    ("PolyDecay", 0.0001, 99.994999874993747, 874079.10160811809, 262.19976505577303),
    ("LogDecay", 1.44, 0.050953031220325283, 1.8159650275600291, 2.6198796855606024),
    ("LogDecay", 1.0, 0.84751509040196165, 2.7106110215409339, 3.6735208419398064),
    ("LogDecay", 0.1, 148.40642100261937, 7028.7490309351498, 855.77311591669555),
    ("LogDecay", 0.05, 22026.465749406774, 3202687.6514820399, 176916.69527023746),
    ("PositiveLimit", 1.99999, 0.0031622934716856251, 1.570807126138835, 3.141614252223673),
    ("PositiveLimit", 1.999, 0.031638599858414889, 1.5718774424244093, 3.1437543440920403),
    ("PositiveLimit", 1.5, 1.0, 2.7280660630104352, 5.0958049630916519),
    ("PositiveLimit", 1.001, 31.606961258559959, 1410.955577273776, 1421.8817173643832),
    ("PositiveLimit", 1.00001, 316.22618487301914, 141415.65595241538, 141433.09426161117),
]

PROFILES = {"PolyDecay": poly().h, "LogDecay": logd().h, "PositiveLimit": positive_limit().h}

# regression value for f=LinearCone, h=PolyDecay(1), l=100
POLY_L100_LENGTH = 12.475369450931673


@pytest.mark.parametrize("family,b,t_star,dphi,length", MPMATH_ARCS)
def test_half_oscillation_matches_high_precision_quadrature(family, b, t_star, dphi, length):
    arc = half_oscillation(RevolutionProfile(PROFILES[family]), b)
    assert arc.t_star == pytest.approx(t_star, rel=1e-12)
    assert arc.delta_phi == pytest.approx(dphi, rel=1e-9)
    assert arc.length == pytest.approx(length, rel=1e-9)


def test_sphere_great_circles():
    prof = RevolutionProfile(sphere().h, 2 * math.pi)
    for b in (0.05, 0.5, 0.9, 0.999):
        arc = half_oscillation(prof, b)
        assert arc.delta_phi == pytest.approx(math.pi, rel=1e-9)
        assert arc.length == pytest.approx(math.pi, rel=1e-9)
    assert half_oscillation(prof, 0.5).t_star == pytest.approx(math.acos(0.5), rel=1e-12)


def test_poly_turning_radius_exact():
    assert turning_radius(RevolutionProfile(poly_decay(1.0)), 0.5) == pytest.approx(1.0, rel=1e-12)


def test_half_oscillation_against_grid_oracle():
    # a circle of length delta_phi(0.5) makes the b = 0.5 arc a closed loop with k = 1
    arc = half_oscillation(RevolutionProfile(poly_decay(1.0)), 0.5)
    spec = ManifoldSpec(3, linear_cone(), poly_decay(1.0), period=arc.delta_phi)
    loop = minimal_loop(spec, 1)
    assert loop.k == 1 and loop.b == pytest.approx(0.5, rel=1e-9)
    assert loop.length == pytest.approx(arc.length, rel=1e-9)
    g = grid_oracle(RevolutionProfile(spec.h, spec.period), 1, 1.5, 1024, 1024)
    assert abs(g.length - arc.length) / arc.length < 0.01
    assert g.length >= arc.length - 1e-9


def test_no_turning_point():
    with pytest.raises(NoTurningPoint):
        half_oscillation(RevolutionProfile(constant(1.0)), 0.5)
    with pytest.raises(NoTurningPoint):
        half_oscillation(RevolutionProfile(poly_decay(1.0)), 1.0)
    with pytest.raises(NoTurningPoint):
        half_oscillation(RevolutionProfile(positive_limit().h), 0.9)


def test_degenerate_turning():
    prof = RevolutionProfile(custom("1 + (1 - r)**3"))
    with pytest.raises(DegenerateTurning):
        arc_from_turning(prof, 1.0)
    with pytest.raises(DegenerateTurning):
        half_oscillation(prof, 1.0)


# -- minimal loops -----------------------------------------------------------


@pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
def test_flat_cylinder(c):
    for l in (1, 3, 10):
        loop = minimal_loop(flat(c), l)
        assert loop.length == pytest.approx(l * c, rel=1e-12)
        assert loop.max_radius == 0.0 and loop.k is None


def test_flat_ladder():
    rows = loop_table(flat(), [1, 2, 4])
    assert [r.length for r in rows] == pytest.approx([1, 2, 4], rel=1e-12)
    assert [r.max_radius for r in rows] == [0, 0, 0]


def test_sphere_minimal_loop():
    loop = minimal_loop(sphere(), 1)
    assert loop.length == pytest.approx(2 * math.pi, abs=1e-6)
    assert loop.k == 2 and loop.tied
    assert loop.max_radius == 0.0
    arc = half_oscillation(RevolutionProfile(sphere().h, 2 * math.pi), loop.b)
    assert arc.delta_phi == pytest.approx(math.pi, rel=1e-9)


def test_poly_l100_sandwich_and_regression():
    spec = poly()
    loop = minimal_loop(spec, 100)
    ub, r_l = sigma_upper_bound(spec.h, 100)
    assert ub == pytest.approx(13.71, abs=5e-3) and r_l == pytest.approx(4.50, abs=1e-2)
    assert (1 + r_l**2) ** 2 == pytest.approx(100 * r_l, rel=1e-9)
    assert cylinder_lower_bound(loop.max_radius, 100, spec.h) <= loop.length <= ub
    assert loop.length == pytest.approx(POLY_L100_LENGTH, rel=1e-9)
    assert 0 < loop.ratio <= 0.5


def test_poly_ladder_increasing():
    rows = loop_table(poly(), [10, 100])
    assert rows[0].length < rows[1].length
    assert all(0 < r.ratio <= 0.5 for r in rows)


def test_positive_limit_tail_decreasing():
    rows = loop_table(positive_limit(), [10, 100, 1000, 10_000])
    ratios = [r.ratio for r in rows]
    assert ratios[-3] > ratios[-2] > ratios[-1]


def test_clairaut_consistency_and_subadditivity():
    spec = poly()
    ladder = list(range(1, 41))
    rows = {r.l: r for r in loop_table(spec, ladder)}
    prof = RevolutionProfile(spec.h)
    for r in rows.values():
        if r.k is not None:
            arc = half_oscillation(prof, r.b)
            assert r.k * arc.delta_phi == pytest.approx(r.l, rel=1e-6)
            assert r.k * arc.length == pytest.approx(r.length, rel=1e-9)
    for a in ladder:
        for b in ladder:
            if a + b in rows:
                assert rows[a + b].length <= rows[a].length + rows[b].length + 1e-9


@settings(max_examples=15, deadline=None)
@given(alpha=st.floats(0.3, 3.0), l=st.integers(1, 400), kind=st.sampled_from(["poly", "pl", "log"]))
def test_loop_invariants(alpha, l, kind):
    if kind == "poly":
        h = poly_decay(alpha)
    elif kind == "pl":
        h = make_positive_limit(0.5, poly_decay(alpha))
    else:
        h = logd(alpha).h
    spec = ManifoldSpec(3, linear_cone(), h)
    loop = minimal_loop(spec, l)
    assert loop.length > 0
    assert 0 <= loop.max_radius <= loop.length / 2
    assert loop.length <= l * h(0.0) * (1 + 1e-12)
    ub, _ = sigma_upper_bound(h, l)
    assert cylinder_lower_bound(loop.max_radius, l, h) <= loop.length * (1 + 1e-12)
    assert loop.length <= ub + 1e-9


def test_search_params_validation():
    with pytest.raises(ValueError):
        SearchParams(n_grid=100)
    with pytest.raises(ValueError):
        SearchParams(quad_rel_tol=0.0)
    with pytest.raises(ValueError):
        minimal_loop(poly(), 0)
    with pytest.raises(ValueError):
        loop_table(poly(), [4, 2])


def test_loop_table_marks_failed_rows(monkeypatch):
    real = loops_mod.minimal_loop

    def flaky(spec, l, search=None, table=None):
        if l == 2:
            raise ArithmeticError("boom")
        return real(spec, l, search, table=table)

    monkeypatch.setattr(loops_mod, "minimal_loop", flaky)
    rows = loops_mod.loop_table(poly(), [1, 2, 3])
    assert [r.failed for r in rows] == [False, True, False]
    assert rows[1].error == "boom" and math.isnan(rows[1].length)


def test_radius_cap_bounds_excursion():
    for spec, l in ((poly(), 100), (positive_limit(), 1000), (logd(), 500)):
        loop = minimal_loop(spec, l)
        assert loop.max_radius <= radius_cap(spec, l)


def test_minimal_loop_ratio_property():
    m = MinimalLoop(l=1, length=2.0, max_radius=0.5)
    assert m.ratio == 0.25 and not m.failed


# -- grid oracle ---------------------------------------------------------------


def test_stencil_sizes():
    assert [len(stencil(k)) for k in (1, 2, 3)] == [4, 8, 16]
    with pytest.raises(ValueError):
        stencil(0)


def test_grid_oracle_flat():
    g = grid_oracle(RevolutionProfile(constant(1.0)), 3, 1.0, 256, 256, stencil_radius=1)
    assert g.length == pytest.approx(3.0, rel=1e-12)
    assert g.max_radius == 0.0


def test_grid_oracle_overestimates_and_converges():
    spec = poly()
    exact = minimal_loop(spec, 10).length
    prof = RevolutionProfile(spec.h)
    coarse = grid_oracle(prof, 10, radius_cap(spec, 10), 128, 128).length
    fine = grid_oracle(prof, 10, radius_cap(spec, 10), 512, 512).length
    assert exact <= fine <= coarse
    assert (fine - exact) / exact < 0.02


def test_grid_oracle_wider_stencil_is_closer():
    spec = poly()
    exact = minimal_loop(spec, 100).length
    prof = RevolutionProfile(spec.h)
    errs = [grid_oracle(prof, 100, radius_cap(spec, 100), 256, 256, k).length - exact for k in (1, 2, 3)]
    assert errs[0] > errs[1] > errs[2] > 0


def test_grid_oracle_checks():
    prof = RevolutionProfile(sphere().h, 2 * math.pi)
    with pytest.raises(ValueError):
        grid_oracle(prof, 1, 2.0, 128, 128)
    with pytest.raises(ValueError):
        grid_oracle(prof, 1, 0.1, 32, 128)


# -- shooting ------------------------------------------------------------------


def test_shoot_flat_is_straight():
    res = shoot_3d(flat(), 0.0, 0.6, 1.0, 50.0)
    assert res.success and res.max_drift < 1e-8
    assert np.allclose(res.r, 1.0 + 0.8 * res.s, rtol=1e-9)
    assert np.allclose(res.phi, 0.6 * res.s, rtol=1e-9)


def test_shoot_poly_turns_at_one():
    res = shoot_3d(poly(), 0.0, 0.5, 0.1, 20.0)
    assert res.max_drift < 1e-8
    assert len(res.turning_r) >= 2
    assert np.allclose(np.abs(res.turning_r), 1.0, atol=1e-6)


@pytest.mark.parametrize("spec", [flat(), poly(), logd()], ids=["flat", "poly", "log"])
def test_shoot_decoupled_sphere_motion(spec):
    res = shoot_3d(spec, 0.3, 0.0, 1.0, 10.0)
    assert res.max_drift < 1e-8
    assert np.ptp(res.phi) == 0.0
    assert np.ptp(res.theta) > 0.1


@pytest.mark.parametrize("spec", [flat(), poly(), logd(), positive_limit()],
                         ids=["flat", "poly", "log", "pl"])
@pytest.mark.parametrize("a,b", [(0.0, 0.5), (0.3, 0.2)])
def test_shoot_conservation_long_run(spec, a, b):
    res = shoot_3d(spec, a, b, 1.0 if a else 0.1, 100.0)
    assert res.success
    assert res.drift_a < 1e-8 and res.drift_b < 1e-8
    assert res.drift_speed < 1e-8


def test_shoot_rejects_inconsistent_data():
    with pytest.raises(ValueError):
        shoot_3d(poly(), 0.0, 0.9, 2.0, 1.0)
    with pytest.raises(ValueError):
        shoot_3d(poly(), 0.0, 0.1, 0.0, 1.0)
