import math

import numpy as np
import pytest
from scipy import integrate, optimize

from levelband.band import (
    Band, BandComponent, CriticalEnd, CriticalKind, VerifyOptions, decompose_band,
    eps_limit, find_critical_points, integrate_coarea, integrate_direct, rhs_prediction,
    run_band, verify_band,
)
from levelband.errors import BandEmpty, NonCompactLevel, SigmaUnknown
from levelband.exprlang import field_from_text
from levelband.field import Window, builtin_field

from conftest import COMPACT_BANDS, ScaledField, ShiftedField

TWO_PI = 2 * math.pi
SADDLE = 2 * math.exp(-4.0)  # two_bump(2) at the origin


def _two_bump(half=5.0):
    return builtin_field("two_bump", (2.0,), Window.square(half))


# ---------------------------------------------------------------------------
# critical points

def _brute_force_critical(field, n=401, tol=1e-9):
    """Oracle: coarse minima of |grad f|^2 on a grid, refined by Nelder-Mead."""
    w = field.window
    xs = np.linspace(w.xmin, w.xmax, n)
    ys = np.linspace(w.ymin, w.ymax, n)
    X, Y = np.meshgrid(xs, ys)
    J = field.jets(X, Y)
    G = J.gx ** 2 + J.gy ** 2
    found = []
    for j in range(1, n - 1):
        for i in range(1, n - 1):
            nb = G[j - 1:j + 2, i - 1:i + 2]
            if G[j, i] == nb.min() and G[j, i] < nb.max() and G[j, i] < 1e-2:
                def g2(p):
                    jt = field.jet(p)
                    return jt.gx ** 2 + jt.gy ** 2
                r = optimize.minimize(g2, [X[j, i], Y[j, i]], method="Nelder-Mead",
                                      options={"xatol": 1e-12, "fatol": 1e-30,
                                               "maxiter": 4000})
                if r.fun < tol and not any(np.hypot(*(r.x - q)) < 1e-4 for q in found):
                    found.append(r.x)
    return sorted(map(tuple, found))


def test_paraboloid_has_one_minimum():
    (cp,) = find_critical_points(builtin_field("paraboloid"))
    assert cp.kind is CriticalKind.MIN
    assert (cp.location.x, cp.location.y) == pytest.approx((0, 0), abs=1e-12)
    assert cp.value == pytest.approx(0, abs=1e-20)


def test_two_bump_critical_points_match_oracle():
    f = builtin_field("two_bump", (2.0,))
    cps = find_critical_points(f)
    oracle = _brute_force_critical(f)
    assert len(cps) == len(oracle) == 3
    got = sorted((cp.location.x, cp.location.y) for cp in cps)
    np.testing.assert_allclose(got, oracle, atol=1e-5)
    kinds = sorted(cp.kind.value for cp in cps)
    assert kinds == ["max", "max", "saddle"]
    saddle = next(cp for cp in cps if cp.kind is CriticalKind.SADDLE)
    assert saddle.value == pytest.approx(SADDLE, rel=1e-12)
    assert all(cp.grad_norm <= 1e-8 for cp in cps)


def test_linear_has_no_critical_points():
    assert find_critical_points(builtin_field("linear")) == []


def test_gaussian_peak():
    (cp,) = find_critical_points(builtin_field("gaussian"))
    assert cp.kind is CriticalKind.MAX and cp.value == pytest.approx(1.0)


def test_saddle_of_xy():
    (cp,) = find_critical_points(field_from_text("x*y + 0.1*x"), res=64)
    assert cp.kind is CriticalKind.SADDLE
    assert (cp.location.x, cp.location.y) == pytest.approx((0.0, -0.1), abs=1e-12)


# ---------------------------------------------------------------------------
# decomposition

def test_single_annulus():
    (comp,) = decompose_band(builtin_field("paraboloid"), Band(1, 4))
    assert comp.sigma == 1 and not comp.touches_boundary and not comp.warnings


def test_two_bump_splits():
    comps = decompose_band(_two_bump(), Band(0.3, 0.5))
    assert [c.sigma for c in comps] == [-1, -1]
    xs = [float(np.mean(np.nonzero(c.mask)[1])) for c in comps]
    assert xs[0] < 128 < xs[1]


def test_band_empty():
    with pytest.raises(BandEmpty):
        decompose_band(builtin_field("paraboloid", (), Window.square(2.0)), Band(10, 12))


def test_band_invariant():
    with pytest.raises(ValueError):
        Band(1.0, 1.0)


def test_res_floor():
    with pytest.raises(ValueError):
        decompose_band(builtin_field("paraboloid"), Band(1, 4), res=16)


def test_truncated_component_is_flagged():
    (comp,) = decompose_band(builtin_field("paraboloid"), Band(4, 12))
    assert comp.touches_boundary
    assert any("window-truncated" in w for w in comp.warnings)


# ---------------------------------------------------------------------------
# integrators

def test_direct_on_annulus():
    f = builtin_field("paraboloid")
    band = Band(1, 4)
    (comp,) = decompose_band(f, band)
    assert integrate_direct(f, comp, band) == pytest.approx(TWO_PI * 3, rel=1e-4)


def test_coarea_on_annulus():
    f = builtin_field("paraboloid")
    band = Band(1, 4)
    (comp,) = decompose_band(f, band)
    assert integrate_coarea(f, comp, band) == pytest.approx(TWO_PI * 3, rel=1e-3)


def test_gaussian_against_radial_quadrature():
    # D_T^2 f = kappa |grad f| = -2 exp(-r^2) on the gaussian; integrate over r
    a, b = 0.2, 0.8
    r_in, r_out = math.sqrt(-math.log(b)), math.sqrt(-math.log(a))
    oracle, _ = integrate.quad(lambda r: -2 * math.exp(-r * r) * TWO_PI * r, r_in, r_out,
                               epsabs=1e-13)
    f = builtin_field("gaussian")
    band = Band(a, b)
    (comp,) = decompose_band(f, band)
    assert integrate_direct(f, comp, band) == pytest.approx(oracle, rel=1e-3)
    assert integrate_coarea(f, comp, band) == pytest.approx(oracle, rel=1e-3)


def test_coarea_refuses_open_levels():
    f = builtin_field("linear")
    band = Band(0, 1)
    (comp,) = decompose_band(f, band)
    with pytest.raises(NonCompactLevel):
        integrate_coarea(f, comp, band)
    # the direct integral is still defined on the window-clipped band; D_T^2 f = 0
    assert integrate_direct(f, comp, band) == pytest.approx(0.0, abs=1e-12)


def test_few_levels_rejected():
    f = builtin_field("paraboloid")
    (comp,) = decompose_band(f, Band(1, 4))
    with pytest.raises(ValueError):
        integrate_coarea(f, comp, Band(1, 4), n_levels=4)


def test_rhs_prediction():
    comps = decompose_band(_two_bump(), Band(0.3, 0.5))
    assert rhs_prediction(comps, Band(0.3, 0.5)) == pytest.approx(-2 * TWO_PI * 0.2)
    w = Window.square(1)
    unknown = BandComponent(0, np.ones((32, 32), bool), w, None, False)
    with pytest.raises(SigmaUnknown):
        rhs_prediction([unknown], Band(0, 1))


# ---------------------------------------------------------------------------
# critical endpoints

def test_eps_limit_at_minimum():
    f = builtin_field("paraboloid")
    band = Band(0, 1)
    lim = eps_limit(f, band, CriticalEnd.AT_A, [0.1, 0.03, 0.01, 0.003, 0.001])
    assert lim.converged
    assert lim.limit_direct == pytest.approx(TWO_PI, rel=1e-3)
    assert lim.limit_coarea == pytest.approx(TWO_PI, rel=1e-3)
    assert lim.values_direct[-1] == pytest.approx(TWO_PI * 0.999, rel=1e-3)


@pytest.mark.slow
def test_eps_limit_from_saddle():
    f = _two_bump()
    band = Band(SADDLE, 0.5)
    sched = [e * band.width for e in (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)]
    lim = eps_limit(f, band, CriticalEnd.AT_A, sched)
    want = -2 * TWO_PI * band.width
    assert lim.converged
    assert lim.limit_direct == pytest.approx(want, rel=2e-2)
    # cross-check the last pulled-back band on its own
    e = sched[-1]
    run = run_band(f, Band(SADDLE + e, 0.5))
    assert run.lhs_direct == pytest.approx(lim.values_direct[-1], rel=1e-12)
    assert run.lhs_direct == pytest.approx(-2 * TWO_PI * (0.5 - SADDLE - e), rel=2e-2)


@pytest.mark.parametrize("sched", [[0.1, 0.01], [0.1, 0.1, 0.01], [0.1, -0.01, -0.1],
                                   [2.0, 1.0, 0.5]])
def test_eps_schedule_validation(sched):
    with pytest.raises(ValueError):
        eps_limit(builtin_field("paraboloid"), Band(0, 1), CriticalEnd.AT_A, sched)


# ---------------------------------------------------------------------------
# verify

def test_verify_main():
    rep = verify_band(builtin_field("paraboloid"), Band(1, 4))
    assert rep.case == "main"
    assert rep.rhs == pytest.approx(6 * math.pi)
    assert rep.rel_error_direct <= 1e-2
    assert rep.to_text().splitlines()[-1].startswith("LHS=")


def test_verify_sign_case():
    rep = verify_band(builtin_field("gaussian"), Band(0.2, 0.8))
    assert rep.rhs == pytest.approx(-TWO_PI * 0.6)
    assert rep.lhs_direct < 0 and rep.rel_error_direct <= 1e-2


def test_verify_critical_min():
    rep = verify_band(builtin_field("paraboloid"), Band(0, 1))
    assert rep.case == "case2"
    assert [cp.kind for cp in rep.critical_points] == [CriticalKind.MIN]
    assert rep.limits and rep.limits[0].end is CriticalEnd.AT_A
    assert rep.lhs_direct == pytest.approx(TWO_PI, rel=2e-2)


def test_verify_disconnected():
    rep = verify_band(_two_bump(), Band(0.3, 0.5))
    assert rep.case == "case1"
    assert len(rep.components) == 2
    assert rep.lhs_direct == pytest.approx(rep.rhs, rel=1.5e-2)


def test_verify_non_compact():
    rep = verify_band(builtin_field("linear"), Band(0, 1))
    d = rep.to_dict()
    assert d["case"] == "case3" and d["non_compact"] is True
    assert d["lhs_coarea"] is None and d["rhs"] is None
    assert any("NonCompactLevel" in w for w in d["warnings"])


def test_verify_interior_critical_value_splits():
    # [0.2, 1] on the gaussian runs into the peak at 1
    rep = verify_band(builtin_field("gaussian"), Band(0.2, 1.0))
    assert rep.case == "case2"
    assert rep.lhs_direct == pytest.approx(-TWO_PI * 0.8, rel=2e-2)


def test_report_json_shape():
    d = verify_band(builtin_field("paraboloid"), Band(1, 4)).to_dict()
    for key in ("field", "band", "window", "components", "lhs_direct", "lhs_coarea", "rhs",
                "abs_error_direct", "rel_error_direct", "critical_points", "warnings"):
        assert key in d
    assert set(d["components"][0]) == {"id", "sigma", "lhs_direct", "lhs_coarea",
                                       "touches_boundary"}


# ---------------------------------------------------------------------------
# invariants

@pytest.mark.parametrize("name,factory,a,b", COMPACT_BANDS, ids=[c[0] for c in COMPACT_BANDS])
def test_identity_at_default_resolution(name, factory, a, b):
    f = factory()
    run = run_band(f, Band(a, b))
    rhs = rhs_prediction(run.components, run.band)
    assert abs(run.lhs_direct - rhs) <= 1e-2 * abs(rhs)
    assert abs(run.lhs_coarea - rhs) <= 1e-2 * abs(rhs)


@pytest.mark.slow
@pytest.mark.parametrize("name,factory,a,b", COMPACT_BANDS, ids=[c[0] for c in COMPACT_BANDS])
def test_identity_at_fine_resolution(name, factory, a, b):
    f = factory()
    run = run_band(f, Band(a, b), options=VerifyOptions(res=512))
    rhs = rhs_prediction(run.components, run.band)
    assert abs(run.lhs_direct - rhs) <= 3e-3 * abs(rhs)
    assert abs(run.lhs_coarea - rhs) <= 3e-3 * abs(rhs)


@pytest.mark.parametrize("name,factory,a,b", COMPACT_BANDS, ids=[c[0] for c in COMPACT_BANDS])
def test_methods_agree(name, factory, a, b):
    run = run_band(factory(), Band(a, b), options=VerifyOptions(res=128))
    rhs = rhs_prediction(run.components, run.band)
    assert abs(run.lhs_direct - run.lhs_coarea) <= 2e-2 * (1 + abs(rhs))


def test_additivity():
    f = builtin_field("gaussian")
    opts = VerifyOptions(res=128)
    whole = run_band(f, Band(0.2, 0.8), options=opts).lhs_direct
    parts = (run_band(f, Band(0.2, 0.45), options=opts).lhs_direct
             + run_band(f, Band(0.45, 0.8), options=opts).lhs_direct)
    assert parts == pytest.approx(whole, rel=1e-3)


@pytest.mark.parametrize("k", [0.5, -3.0, 10.0])
def test_shift_invariance(k):
    base = builtin_field("gaussian")
    opts = VerifyOptions(res=128)
    ref = run_band(base, Band(0.2, 0.8), options=opts)
    moved = run_band(ShiftedField(base, k), Band(0.2 + k, 0.8 + k), options=opts)
    assert moved.lhs_direct == pytest.approx(ref.lhs_direct, rel=1e-10)
    assert [c.sigma for c in moved.components] == [c.sigma for c in ref.components]


@pytest.mark.parametrize("lam", [2.0, 0.25, -1.0])
def test_scaling(lam):
    base = builtin_field("paraboloid")
    opts = VerifyOptions(res=128)
    ref = run_band(base, Band(1, 4), options=opts)
    lo, hi = sorted((lam * 1, lam * 4))
    scaled = run_band(ScaledField(base, lam), Band(lo, hi), options=opts)
    # both sides scale by |lam|; a negative lam also flips sigma
    assert scaled.lhs_direct == pytest.approx(lam * ref.lhs_direct, rel=1e-2)
    assert [c.sigma for c in scaled.components] == [int(math.copysign(1, lam))]
