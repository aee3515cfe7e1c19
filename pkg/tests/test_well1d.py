import math

import numpy as np
import pytest
from scipy.integrate import quad

from softguide.well1d import (WellParams, eval_mode,
                              eval_mode_second_derivative,
                              eval_transverse_integral, large_alpha_reference,
                              secular_residual, solve_well)


def test_basic_spectrum_alpha4():
    spec = solve_well(WellParams(alpha=4.0, d=1.0))
    assert spec.count == 1
    g = spec.ground
    assert g.parity == "even"
    assert -4.0 < g.mu < 0.0
    assert math.isclose(g.kappa, math.sqrt(-g.mu), rel_tol=1e-12)
    assert secular_residual(g) < 1e-10


def test_secular_residual_random_params():
    rng = np.random.default_rng(7)
    for _ in range(20):
        alpha = rng.uniform(0.5, 50.0)
        d = rng.uniform(0.3, 3.0)
        spec = solve_well(WellParams(alpha=alpha, d=d))
        for mode in spec.modes:
            assert secular_residual(mode) < 1e-10
        # eigenvalues ascending and inside (-alpha, 0)
        mus = [m.mu for m in spec.modes]
        assert mus == sorted(mus)
        assert all(-alpha < mu < 0 for mu in mus)


def test_normalization_by_quadrature():
    spec = solve_well(WellParams(alpha=30.0, d=1.0))
    for mode in spec.modes:
        tail = 40.0 / mode.kappa
        val, _ = quad(lambda x: eval_mode(mode, np.array([x]))[0] ** 2,
                      -tail, 1.0 + tail, limit=400)
        assert abs(val - 1.0) < 1e-8


def test_orthogonality():
    spec = solve_well(WellParams(alpha=50.0, d=1.0))
    assert spec.count >= 2
    a, b = spec.modes[0], spec.modes[1]
    tail = 40.0 / min(a.kappa, b.kappa)
    val, _ = quad(lambda x: eval_mode(a, np.array([x]))[0]
                  * eval_mode(b, np.array([x]))[0],
                  -tail, 1.0 + tail, limit=400)
    assert abs(val) < 1e-8


def test_ode_residual_inside_and_outside():
    spec = solve_well(WellParams(alpha=4.0, d=1.0))
    g = spec.ground
    xs = np.array([-1.5, -0.2, 0.1, 0.5, 0.93, 1.4, 3.0])
    v = eval_mode(g, xs)
    vpp = eval_mode_second_derivative(g, xs)
    pot = np.where((xs >= 0) & (xs <= 1.0), -4.0, 0.0)
    resid = -vpp + pot * v - g.mu * v
    assert np.max(np.abs(resid)) < 1e-9


def test_edge_value_and_slope():
    g = solve_well(WellParams(alpha=4.0, d=1.0)).ground
    d = 1.0
    assert math.isclose(eval_mode(g, np.array([d]))[0], g.value_at_edge,
                        rel_tol=1e-12)
    # v'(d) = -kappa v(d): finite difference on the exponential tail
    h = 1e-6
    fd = (eval_mode(g, np.array([d + h]))[0] - g.value_at_edge) / h
    assert math.isclose(fd, g.slope_at_edge, rel_tol=1e-5)


def test_transverse_integral_matches_quadrature():
    g = solve_well(WellParams(alpha=4.0, d=1.0)).ground
    for t in (-2.0, -0.3, 0.0, 0.4, 1.0, 1.2, 5.0):
        ref, _ = quad(lambda s: eval_mode(g, np.array([s]))[0] ** 2, 1.0, t,
                      limit=300)
        assert abs(eval_transverse_integral(g, t) - ref) < 1e-10
    assert eval_transverse_integral(g, 1.0) == 0.0
    assert eval_transverse_integral(g, 0.5) < 0.0


def test_large_alpha_reference():
    params = WellParams(alpha=1e4, d=1.0)
    mu_ref, v_ref = large_alpha_reference(params)
    spec = solve_well(params)
    assert abs(spec.mu1 - mu_ref) < 1.0  # O(sqrt(alpha)) remainder
    assert abs(spec.ground.value_at_edge / v_ref - 1.0) < 0.05


def test_mode_count_grows_with_alpha():
    counts = [solve_well(WellParams(alpha=a, d=1.0)).count
              for a in (1.0, 30.0, 200.0, 1000.0)]
    assert counts == sorted(counts)
    # half-well heuristic: roughly sqrt(alpha) d / pi branches
    assert counts[-1] >= 9


def test_parameter_validation():
    with pytest.raises(ValueError):
        WellParams(alpha=-1.0, d=1.0)
    with pytest.raises(ValueError):
        WellParams(alpha=1.0, d=0.0)
    with pytest.raises(ValueError):
        solve_well(WellParams(alpha=4.0, d=1.0), tol=0.1)
