import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twfilm.errors import DomainError
from twfilm.phase_plane import (
    Quadrant,
    classify_quadrant,
    critical_height,
    critical_height_closed,
    f1,
    f2,
    g_eval,
    mu_lower_bound,
    phi_eval,
    select_gamma_bar,
)
from twfilm.profile import RegimeParams
from twfilm.surface_tension import SurfaceTension

SZ = SurfaceTension.szyszkowski(1.0, 1.0)
FR = SurfaceTension.frumkin(1.0, 1.0, 1.0)
UNIT = RegimeParams(1.0, 1.0, 1.0)


def test_field_values():
    assert f1(SZ, UNIT, 1.0, 0.5) == pytest.approx(1.2, abs=1e-15)
    assert f2(SZ, UNIT, 1.0, 0.5) == pytest.approx(-0.4, abs=1e-15)
    for g in (0.1, 0.5, 0.9):
        assert f1(SZ, UNIT, 2.0, g) < 0.0
        assert f2(SZ, UNIT, 3.0, g) == 0.0


def test_field_against_unreduced_formula():
    """f1, f2 solve the linear system of the reduced ODEs for (H', Gamma')."""
    rng = np.random.default_rng(1)
    for _ in range(50):
        G, D, Hs = rng.uniform(0.2, 3.0, 3)
        params = RegimeParams(G, D, Hs)
        H, g = rng.uniform(Hs, 2 * Hs), rng.uniform(0.01, 0.99)
        sp = SZ.dsigma(g)
        A = np.array([[G * H ** 3 / 3, -H * H / 2 * sp], [G * H * H * g / 2, -(H * g * sp - D)]])
        rhs = np.array([Hs - H, -g])
        expect = np.linalg.solve(A, rhs)
        assert f1(SZ, params, H, g) == pytest.approx(expect[0], rel=1e-10, abs=1e-12)
        assert f2(SZ, params, H, g) == pytest.approx(expect[1], rel=1e-10, abs=1e-12)


def test_field_rejects_bad_states_and_regimes():
    with pytest.raises(DomainError):
        f1(SZ, UNIT, 1.0, 1.0)
    with pytest.raises(DomainError):
        f2(SZ, UNIT, -1.0, 0.5)
    with pytest.raises(DomainError):
        f1(SZ, RegimeParams(0.0, 1.0, 1.0), 1.0, 0.5)


def test_f2_negative_on_grid():
    H, g = np.meshgrid(np.linspace(1.0, 2.0, 50), np.linspace(0.01, 0.99, 50))
    assert np.all(f2(SZ, UNIT, H, g) < 0.0)


def test_phi_values():
    params = RegimeParams(1.0, 0.5, 1.0)
    assert phi_eval(params, 1.5) == pytest.approx(1.5)
    assert phi_eval(params, 2.0 - 1e-9) < 1e-6
    assert phi_eval(params, 1.0 + 1e-9) > 1e6
    with pytest.raises(DomainError):
        phi_eval(params, 1.0)
    with pytest.raises(DomainError):
        phi_eval(params, 2.0)


def test_phi_strictly_decreasing():
    H = np.linspace(1.0, 2.0, 2001)[1:-1]
    assert np.all(np.diff(phi_eval(UNIT, H)) < 0.0)


def test_g_values():
    assert g_eval(SZ, 0.5) == pytest.approx(1.0)
    assert g_eval(SZ, 0.25) == pytest.approx(3.0)
    assert g_eval(SZ, 1e-6) > 1e5
    with pytest.raises(DomainError):
        g_eval(SZ, 0.0)


def test_critical_height_oracles():
    golden = critical_height(SZ, RegimeParams(1.0, 0.5, 1.0), 0.5)
    assert golden == pytest.approx((1 + math.sqrt(5)) / 2, abs=1e-10)
    assert critical_height(SZ, UNIT, 0.25) == pytest.approx(math.sqrt(10) - 2, abs=1e-10)
    assert critical_height(SZ, UNIT, 1 - 1e-6) > 2.0 - 1e-2


@settings(max_examples=100, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(0.05, 5.0), st.floats(1e-4, 1 - 1e-4))
def test_critical_height_matches_quadratic(Hs, D, g):
    params = RegimeParams(1.0, D, Hs)
    hc = critical_height(SZ, params, g)
    assert Hs < hc < 2 * Hs
    assert hc == pytest.approx(critical_height_closed(SZ, params, g), rel=1e-11)


def test_nullcline_sign_pattern():
    rng = np.random.default_rng(7)
    for g in rng.uniform(0.001, 0.999, 100):
        hc = critical_height(SZ, UNIT, g)
        below = np.linspace(1.0, hc, 12)[1:-1]
        above = np.linspace(hc, 2.0, 12)[1:-1]
        assert np.all(f1(SZ, UNIT, below, np.full(10, g)) > 0.0)
        assert np.all(f1(SZ, UNIT, above, np.full(10, g)) < 0.0)


def test_gamma_bar_szyszkowski():
    geo = select_gamma_bar(SZ, UNIT)
    assert geo.gamma_bar == 0.5
    assert geo.H_bar == critical_height(SZ, UNIT, 0.5)
    assert abs(f1(SZ, UNIT, geo.H_bar, geo.gamma_bar)) < 1e-10


def _admissible(model, gamma_bar, grid=4096):
    """Direct loop re-check of the three splitting-point conditions."""
    full = [j / (2.0 * grid) for j in range(1, 2 * grid)]
    g = {x: model.rho_raw(x) / x for x in full}
    prefix = [x for x in full if x <= gamma_bar]
    a_ok = all(g[p] > g[q] for p, q in zip(prefix, prefix[1:]))
    b_ok = all(g[x] < g[gamma_bar] for x in full if x > gamma_bar)
    # analytic rho' for the Frumkin family: rho = w / (a - 2b gamma w), w = 1 - gamma
    a, b = model.a, model.b
    w = 1.0 - gamma_bar
    den = a - 2 * b * gamma_bar * w
    drho = (-den - w * (-2 * b * (1 - 2 * gamma_bar))) / (den * den)
    c_ok = gamma_bar * drho - model.rho_raw(gamma_bar) < 0.0
    return a_ok and b_ok and c_ok


def test_gamma_bar_frumkin_conditions():
    geo = select_gamma_bar(FR, UNIT)
    assert 0.0 < geo.gamma_bar <= 0.5
    assert _admissible(FR, geo.gamma_bar)
    assert abs(f1(FR, UNIT, geo.H_bar, geo.gamma_bar)) < 1e-10


def test_gamma_bar_frumkin_strong_attraction():
    model = SurfaceTension.frumkin(1.0, 1.0, 1.9)
    geo = select_gamma_bar(model, UNIT)
    assert _admissible(model, geo.gamma_bar)


def test_f1_sign_along_h_bar():
    geo = select_gamma_bar(SZ, UNIT)
    low = np.linspace(0.0, geo.gamma_bar, 50)[1:-1]
    high = np.linspace(geo.gamma_bar, 1.0, 50)[1:-1]
    assert np.all(f1(SZ, UNIT, np.full_like(low, geo.H_bar), low) < 0.0)
    assert np.all(f1(SZ, UNIT, np.full_like(high, geo.H_bar), high) > 0.0)


def test_mu_values():
    assert mu_lower_bound(SZ, UNIT) == pytest.approx(1.0, abs=1e-9)
    assert mu_lower_bound(SZ, RegimeParams(1.0, 1.0, 2.0)) == pytest.approx(2.0, abs=1e-9)


def test_mu_bounds_denominator_on_grid():
    for model, params in ((SZ, UNIT), (FR, RegimeParams(1.0, 0.3, 0.7))):
        mu = mu_lower_bound(model, params)
        Hs = params.H_star
        H, g = np.meshgrid(np.linspace(Hs, 2 * Hs, 200), np.linspace(0.0, 1.0, 200))
        assert np.all(g * H + 4 * params.D * model.rho_raw(g) >= mu - 1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(0.0, 0.99), st.floats(0.05, 5.0), st.floats(0.1, 3.0))
def test_mu_positive(a, b_frac, D, Hs):
    model = SurfaceTension.frumkin(1.0, a, 2 * a * b_frac)
    assert mu_lower_bound(model, RegimeParams(1.0, D, Hs)) > 0.0


def test_quadrants():
    geo = select_gamma_bar(SZ, UNIT)
    assert classify_quadrant(geo, 1.0, geo.gamma_bar) is Quadrant.Q1
    assert classify_quadrant(geo, 2.0, geo.gamma_bar + 1e-6) is Quadrant.Q3
    assert classify_quadrant(geo, geo.H_bar + 1e-6, geo.gamma_bar) is Quadrant.Q4
    assert classify_quadrant(geo, geo.H_bar, 0.9) is Quadrant.Q2
    with pytest.raises(DomainError):
        classify_quadrant(geo, 2.5, 0.5)


def test_critical_height_increasing_below_gamma_bar():
    for model in (SZ, FR):
        geo = select_gamma_bar(model, UNIT)
        g = np.linspace(0.0, geo.gamma_bar, 400)[1:]
        hc = np.array([critical_height(model, UNIT, float(x)) for x in g])
        assert np.all(np.diff(hc) > 0.0)
