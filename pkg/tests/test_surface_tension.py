import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twfilm.errors import ComplianceError, DomainError
from twfilm.surface_tension import (
    SurfaceTension,
    check_compliance,
    parse_model_spec,
    rho_eval,
    sigma_eval,
    sigma_inverse,
    sigma_prime,
)

SZ = SurfaceTension.szyszkowski(1.0, 1.0)
FR = SurfaceTension.frumkin(1.0, 1.0, 1.0)


def test_sigma_values():
    assert sigma_eval(SZ, 0.0) == 1.0
    assert sigma_eval(SZ, 1.0 - 1.0 / math.e) == pytest.approx(0.0, abs=1e-15)
    assert sigma_eval(FR, 0.5) == pytest.approx(1.0 + math.log(0.5) + 0.25, abs=1e-15)


def test_sigma_zero_is_sigma0_for_every_family():
    for model in (SurfaceTension.linear(2.0), SurfaceTension.sheludko(2.0, 3.0),
                  SurfaceTension.szyszkowski(2.0, 0.4), SurfaceTension.frumkin(2.0, 1.0, 0.5)):
        assert sigma_eval(model, 0.0) == pytest.approx(2.0, rel=1e-15)


def test_sigma_prime_values():
    assert sigma_prime(SZ, 0.5) == pytest.approx(-2.0)
    assert sigma_prime(FR, 0.5) == pytest.approx(-1.0)
    # exactly -1e6 in real arithmetic; the stored 1 - 1e-6 is off by one ulp
    assert sigma_prime(SZ, 1.0 - 1e-6) <= -1e6 * (1.0 - 1e-9)


def test_derivatives_match_finite_differences():
    h = 1e-5
    for model in (SZ, FR, SurfaceTension.sheludko(1.0, 2.0), SurfaceTension.linear(1.5)):
        for g in (0.1, 0.4, 0.7):
            fd1 = (model.sigma(g + h) - model.sigma(g - h)) / (2 * h)
            fd2 = (model.dsigma(g + h) - model.dsigma(g - h)) / (2 * h)
            assert model.dsigma(g) == pytest.approx(fd1, rel=1e-8)
            assert model.d2sigma(g) == pytest.approx(fd2, rel=1e-7, abs=1e-9)


@pytest.mark.parametrize("gamma", [-0.1, 1.0, 1.5, float("nan")])
def test_out_of_domain_gamma_rejected(gamma):
    with pytest.raises(DomainError):
        sigma_eval(SZ, gamma)
    with pytest.raises(DomainError):
        sigma_prime(SZ, gamma)


def test_rho_values():
    assert rho_eval(SZ, 0.5) == pytest.approx(0.5)
    assert rho_eval(SZ, 1.0) == 0.0
    assert rho_eval(FR, 0.5) == pytest.approx(1.0)


def test_rho_at_one_requires_compliance():
    with pytest.raises(ComplianceError):
        rho_eval(SurfaceTension.linear(1.0), 1.0)
    with pytest.raises(ComplianceError):
        rho_eval(SurfaceTension.sheludko(1.0, 1.0), 1.0)


def test_rho_vanishes_at_one():
    for model in (SZ, FR):
        assert rho_eval(model, 1.0 - 1e-8) < 1e-6


def test_complement_forms_agree_away_from_one():
    w = np.array([0.9, 0.5, 0.1, 1e-3])
    for model in (SZ, FR, SurfaceTension.sheludko(1.0, 2.0), SurfaceTension.linear(1.0)):
        assert np.allclose(model.rho_complement(w), model.rho_raw(1.0 - w), rtol=1e-12)
        assert np.allclose(model.dsigma_complement(w), model.dsigma_raw(1.0 - w), rtol=1e-12)


def test_inverse_values():
    assert sigma_inverse(SZ, 1.0) == 0.0
    assert sigma_inverse(SZ, 0.0) == pytest.approx(1.0 - 1.0 / math.e, abs=1e-15)
    assert sigma_inverse(FR, 0.556853) == pytest.approx(0.5, abs=1e-6)


def test_inverse_errors():
    with pytest.raises(DomainError):
        sigma_inverse(SZ, 1.5)
    with pytest.raises(ComplianceError):
        sigma_inverse(SurfaceTension.linear(1.0), 0.5)


def test_inverse_residual_frumkin():
    # below s ~ -5 the spacing of doubles next to 1 bounds |sigma(gamma) - s| from below
    for s in (0.9, 0.0, -3.0, -5.0):
        g = sigma_inverse(FR, s)
        assert abs(sigma_eval(FR, g) - s) <= 1e-12 * max(1.0, abs(s))


def test_compliance_classification():
    assert check_compliance(SZ).compliant
    assert check_compliance(FR).compliant
    rep = check_compliance(SurfaceTension.sheludko(1.0, 1.0))
    assert not rep.satisfies_i3
    assert not check_compliance(SurfaceTension.linear(1.0)).satisfies_i3


def test_sheludko_derivative_is_bounded():
    model = SurfaceTension.sheludko(1.0, 1.0)
    g = np.linspace(0.0, 1.0, 10001)[:-1]
    assert np.max(np.abs(model.dsigma_raw(g))) < 10.0


def test_frumkin_requires_b_below_2a():
    with pytest.raises(DomainError):
        SurfaceTension.frumkin(1.0, 1.0, 3.0)
    with pytest.raises(DomainError):
        SurfaceTension.frumkin(1.0, 1.0, 2.0)


def test_rho_sup():
    assert SZ.rho_sup() == pytest.approx(1.0, abs=1e-6)
    g = np.linspace(0.0, 1.0, 10001)
    assert FR.rho_sup() == pytest.approx(np.max(FR.rho_raw(g)), abs=1e-6)


def test_spec_round_trip():
    for text in ("linear:1", "sheludko:1:2", "szyszkowski:1:0.5", "frumkin:1:1:1"):
        model = parse_model_spec(text)
        assert parse_model_spec(model.spec) == model


@pytest.mark.parametrize("text", ["foo:1", "szyszkowski:1", "frumkin:1:x:1", "linear:1:2", "szyszkowski:-1:1"])
def test_bad_spec(text):
    with pytest.raises(DomainError):
        parse_model_spec(text)


compliant_models = st.one_of(
    st.builds(SurfaceTension.szyszkowski, st.floats(0.1, 10.0), st.floats(0.05, 5.0)),
    st.tuples(st.floats(0.1, 10.0), st.floats(0.05, 5.0), st.floats(0.0, 0.999)).map(
        lambda t: SurfaceTension.frumkin(t[0], t[1], 2.0 * t[1] * t[2])),
)


@settings(max_examples=200, deadline=None)
@given(compliant_models, st.floats(0.0, 1.0, exclude_max=True))
def test_compliant_models_are_decreasing_with_positive_rho(model, g):
    assert model.dsigma(g) < 0.0
    assert model.rho(g) > 0.0


@settings(max_examples=200, deadline=None)
@given(compliant_models, st.floats(0.0, 1.0 - 1e-3))
def test_inverse_undoes_sigma(model, g):
    assert sigma_inverse(model, sigma_eval(model, g)) == pytest.approx(g, abs=1e-10)
