import math

import numpy as np
import pytest
from scipy.integrate import quad

from softguide import asymptotics as asy
from softguide.profiles import dilate, make_profile, moments, negate
from softguide.well1d import WellParams, eval_mode, solve_well


@pytest.fixture(scope="module")
def well():
    return solve_well(WellParams(alpha=4.0, d=1.0))


@pytest.fixture(scope="module")
def triangle():
    return make_profile("triangle", h=1.0, w=1.0)


def test_expansion_helper_reference_numbers():
    # hand-checkable combination: mu1=-1, alpha=4, v1(d)=0.5, I1=2, eps=0.1
    assert asy.lambda1_expansion(-1.0, 4.0, 0.5, 2.0, 0.1) == pytest.approx(-1.01)


def test_delta_hat_linear_in_epsilon(well, triangle):
    d1 = asy.predict_delta(well, triangle, 0.05)
    d2 = asy.predict_delta(well, triangle, 0.1)
    assert d2 == pytest.approx(2 * d1, rel=1e-14)
    g = well.ground
    assert d2 == pytest.approx(0.1 * 4.0 * g.value_at_edge**2 / 2.0, rel=1e-14)


def test_predict_lambda1_classification(well, triangle):
    pred = asy.predict_lambda1(well, triangle, 0.1)
    assert pred.classification == "unique bound state"
    assert pred.value < well.mu1
    neg = asy.predict_lambda1(well, negate(triangle), 0.1)
    assert neg.classification == "no bound state"
    # negation leaves the eps^2 coefficient unchanged (I1 enters squared)
    assert neg.eps2_coefficient == pytest.approx(pred.eps2_coefficient)
    crit = asy.predict_lambda1(well, make_profile("sine_pair"), 0.1)
    assert crit.classification == "critical"


def test_predict_delta_requires_attractive_regime(well, triangle):
    with pytest.raises(ValueError):
        asy.predict_delta(well, negate(triangle), 0.1)


def test_coefficient_doubling(well, triangle):
    # f -> 2f quadruples the eps^2 coefficient
    p1 = asy.predict_lambda1(well, triangle, 0.1)
    p2 = asy.predict_lambda1(well, make_profile("triangle", h=2.0, w=1.0), 0.1)
    assert p2.eps2_coefficient == pytest.approx(4 * p1.eps2_coefficient, rel=1e-12)


def test_dirichlet_expansion_values(triangle):
    d = 1.0
    val = asy.dirichlet_compare(d, triangle, 0.1)
    assert val == pytest.approx(math.pi**2 - 0.01 * math.pi**4, rel=1e-12)


def test_coefficient_limit_table(triangle):
    rows = asy.coefficient_limit_check([1e2, 1e3, 1e4], 1.0, triangle)
    ratios = [r.ratio for r in rows]
    assert ratios == sorted(ratios)
    assert ratios[-1] > 0.85
    gaps = [abs(r.mu1_gap) for r in rows]
    assert gaps == sorted(gaps, reverse=True)


def test_leading_eigenfunction_decay_and_norm(well, triangle):
    eps = 0.1
    u = asy.LeadingEigenfunction(well, triangle, eps)
    # exponential tails with rate delta_hat
    x = np.array([5.0, 10.0])
    vals = u.longitudinal(x)
    assert vals[1] / vals[0] == pytest.approx(math.exp(-u.dh * 5.0), rel=1e-9)
    # norm approaches the closed-form leading value as eps -> 0
    devs = []
    for e in (0.2, 0.05):
        ue = asy.LeadingEigenfunction(well, triangle, e)
        devs.append(abs(ue.norm() / ue.norm_leading() - 1.0))
    assert devs[1] < devs[0]


def test_leading_eigenfunction_norm_quadrature(well, triangle):
    u = asy.LeadingEigenfunction(well, triangle, 0.1)
    # independent check of the tensor norm on a crude 2-D grid
    xs = np.linspace(-80.0, 80.0, 1601)
    u1 = u.longitudinal(xs)
    n1 = np.trapezoid(u1**2, xs)
    ys = np.linspace(-8.0, 9.0, 1701)
    v = eval_mode(well.ground, ys)
    n2 = np.trapezoid(v**2, ys)
    assert math.sqrt(n1 * n2) == pytest.approx(u.norm(), rel=1e-3)


def test_critical_check_requires_zero_mean(well, triangle):
    with pytest.raises(ValueError, match="not critical"):
        asy.critical_check(well, triangle)


def test_critical_check_threshold_crossing(well):
    narrow = make_profile("sine_pair", h=1.0, w=1.0)
    assert not asy.critical_check(well, narrow).satisfied
    wide = make_profile("sine_pair", h=1.0, w=4.0)
    chk = asy.critical_check(well, wide)
    assert chk.satisfied and chk.verdict == "bound state for small eps"
    assert chk.ratio == pytest.approx(math.pi**2 / 16.0, rel=1e-12)
    # dilation moves the ratio quadratically: gamma^2 * (pi/w)^2
    squeezed = dilate(wide, 4.0)
    assert not asy.critical_check(well, squeezed).satisfied


def test_cutoff_energy_positive_finite():
    val = asy.cutoff_derivative_energy()
    assert 0.0 < val < 50.0
    # even cutoff: quadrature over one side doubled, check against sampling
    xs = np.linspace(1.0 + 1e-9, 2.0 - 1e-9, 20001)
    u = xs - 1.0
    chi = np.exp(1.0 - 1.0 / (1.0 - u**2))
    dchi = chi * (-2.0 * u / (1.0 - u**2) ** 2)
    ref = 2.0 * np.trapezoid(dchi**2, xs)
    assert val == pytest.approx(ref, rel=1e-3)


def test_trial_energy_expansion(well):
    wide = make_profile("sine_pair", h=1.0, w=4.0)
    lam = asy.optimal_lambda(well)
    assert lam == pytest.approx(math.sqrt(-well.mu1), rel=1e-14)
    # J(eps)/eps^2 approaches the quadratic coefficient from below-ish
    te1 = asy.trial_energy(well, wide, lam, 1e-3)
    te2 = asy.trial_energy(well, wide, lam, 2e-3)
    c = te1.j_quadratic_coeff
    assert te1.j_exact / 1e-6 == pytest.approx(c, rel=0.02)
    assert te2.j_exact / 4e-6 == pytest.approx(c, rel=0.04)
    # at lambda = sqrt(-mu1), negativity of the coefficient is exactly the
    # binding criterion ratio < threshold
    chk = asy.critical_check(well, wide)
    assert (c < 0) == chk.satisfied
    m = moments(wide)
    ref = lam**2 * m.i2 * (chk.ratio - chk.threshold)
    assert c == pytest.approx(ref, rel=1e-10)


def test_trial_energy_negative_when_criterion_holds(well):
    wide = make_profile("sine_pair", h=1.0, w=4.0)
    lam = asy.optimal_lambda(well)
    for eps in (0.02, 0.05):
        assert asy.trial_energy(well, wide, lam, eps).j_exact < 0.0


def test_trial_energy_rejects_bad_input(well, triangle):
    with pytest.raises(ValueError):
        asy.trial_energy(well, triangle, 1.0, 0.0)
    nodiff = type(triangle)("nodiff", triangle.support, triangle._fn, None)
    from softguide.profiles import DerivativeUnavailableError
    with pytest.raises(DerivativeUnavailableError):
        asy.trial_energy(well, nodiff, 1.0, 0.05)


def test_u_norm_leading_formula(well, triangle):
    pred = asy.predict(well, triangle)
    m = moments(triangle)
    ref = math.sqrt(2.0) * well.ground.value_at_edge * math.sqrt(m.i1)
    assert pred.u_norm_leading == pytest.approx(ref, rel=1e-14)
