"""The nine headline checks, one test each, with a printed PASS/FAIL line.

These run the full numeric pipeline (closed-form well, perturbative
predictions, Birman-Schwinger secular solves, 2-D finite-difference
eigensolves) against each other at desk-scale epsilon ranges.  Each test
registers a single summary line via the acceptance_report fixture; the lines
are echoed in a terminal section at the end of the run.
"""

import math
import os
import time

import numpy as np
import pytest

from softguide import asymptotics, bs_core, cli, harness
from softguide import fd_oracle as fo
from softguide.profiles import dilate, make_profile, moments, negate
from softguide.well1d import WellParams, solve_well

PARAMS = WellParams(alpha=4.0, d=1.0)


@pytest.fixture(scope="module")
def well():
    return solve_well(PARAMS)


@pytest.fixture(scope="module")
def triangle():
    return make_profile("triangle", h=1.0, w=1.0)


def _fd_ground_on(profile, eps, grid, sigma_depth, k_max=3):
    op = fo.build_h2d(PARAMS, profile, eps, grid)
    mu1h = fo.transverse_threshold(PARAMS, grid)
    res = fo.lowest_eigs(op, mu1h + 3.0 * fo.box_mode_energy(grid) + 1e-12,
                         k_max=k_max, sigma=mu1h - sigma_depth)
    return res, mu1h


# ---------------------------------------------------------------------------
# 1. 1-D spectral agreement
# ---------------------------------------------------------------------------

def test_ac1_one_dimensional_agreement(acceptance_report):
    t0 = time.time()
    rng = np.random.default_rng(42)
    pairs = [(4.0, 1.0)] + [(rng.uniform(0.5, 50.0), rng.uniform(0.3, 3.0))
                            for _ in range(20)]
    worst = 0.0
    for alpha, d in pairs:
        spec = solve_well(WellParams(alpha=alpha, d=d))
        kmin = min(m.kappa for m in spec.modes)
        # step divides d so the well edges stay on grid points at h and h/2,
        # keeping the discretization error a clean h^2 series
        h = d / math.ceil(d / (min(d, 1.0) / 100.0))
        L = math.ceil(max(10.0 * d, 9.0 / kmin) / h) * h
        res = fo.solve_1d(WellParams(alpha=alpha, d=d), L=L, h=h)
        assert res.count == spec.count, (alpha, d)
        worst = max(worst, abs(res.eigs_extrapolated[0] - spec.mu1) / abs(spec.mu1))
    dt = time.time() - t0
    acceptance_report(
        "AC1 1-D spectral agreement", worst < 1e-6 and dt < 5.0,
        f"worst relative mu1 error {worst:.2e} (< 1e-6), counts exact on "
        f"{len(pairs)} parameter pairs, {dt:.1f} s (< 5 s)")


# ---------------------------------------------------------------------------
# 2. large-alpha hard-wall limits
# ---------------------------------------------------------------------------

def test_ac2_large_alpha_limits(acceptance_report, triangle):
    t0 = time.time()
    rows = asymptotics.coefficient_limit_check([1e2, 1e3, 1e4], 1.0, triangle)
    gaps = [abs(r.mu1_gap) for r in rows]
    decreasing = gaps[0] > gaps[1] > gaps[2]
    gap_ratio = gaps[0] / gaps[2]
    spec4 = solve_well(WellParams(alpha=1e4, d=1.0))
    v_dev = abs(spec4.ground.value_at_edge * math.sqrt(1e4)
                / (math.sqrt(2.0) * math.pi) - 1.0)
    dt = time.time() - t0
    ok = decreasing and gap_ratio >= 5.0 and v_dev <= 0.05 and dt < 1.0
    acceptance_report(
        "AC2 large-alpha limits", ok,
        f"|mu1+alpha-pi^2| decreasing {gaps[0]:.3f} > {gaps[1]:.3f} > "
        f"{gaps[2]:.3f}, ratio {gap_ratio:.1f} (>= 5), edge-value deviation "
        f"{v_dev:.3f} (<= 0.05), {dt:.2f} s (< 1 s)")


# ---------------------------------------------------------------------------
# 3. eps^2 coefficient from the FD oracle
# ---------------------------------------------------------------------------

def test_ac3_eps2_coefficient_fit(acceptance_report, well, triangle):
    t0 = time.time()
    target = asymptotics.predict(well, triangle).eps2_coefficient
    eps_list = [0.05, 0.1, 0.15, 0.2]
    levels = [0.1, 0.05, 0.04]
    lam = {}

    def solve_level(h):
        for eps in eps_list:
            dh = asymptotics.predict_delta(well, triangle, eps)
            L = math.ceil(max(40.0, 3.2 / dh) / 0.2) * 0.2
            grid = fo.Grid2D(L=L, H_lo=5.0, H_hi=5.2, d=1.0, h=h)
            res, _ = _fd_ground_on(triangle, eps, grid, 2.0 * dh**2, k_max=1)
            lam[(eps, h)] = float(res.eigenvalues[0])

    def richardson_fit(ha, hb):
        r2 = (ha / hb) ** 2
        coeff = []
        for eps in eps_list:
            lam_ex = (r2 * lam[(eps, hb)] - lam[(eps, ha)]) / (r2 - 1.0)
            coeff.append((well.mu1 - lam_ex) / eps**2)
        return harness.fit_coefficient(np.array(eps_list), np.array(coeff), target)

    solve_level(levels[0])
    solve_level(levels[1])
    fit = richardson_fit(levels[0], levels[1])
    movement = math.inf
    for k in range(2, len(levels)):
        solve_level(levels[k])
        refined = richardson_fit(levels[k - 1], levels[k])
        movement = abs(refined.c0 - fit.c0) / abs(target)
        fit = refined
        if movement < 0.02:
            break
    dt = time.time() - t0
    ok = abs(fit.deviation) <= 0.10 and movement < 0.02 and dt < 600.0
    acceptance_report(
        "AC3 eps^2 coefficient", ok,
        f"fitted c0 = {fit.c0:.5f} vs target {target:.5f} "
        f"(deviation {fit.deviation:+.1%}, bar 10%), Richardson estimate "
        f"moved {movement:.1%} (< 2%) at finest step pair, {dt:.0f} s (< 600 s)")


# ---------------------------------------------------------------------------
# 4. absence of bound states for an inward dent
# ---------------------------------------------------------------------------

def test_ac4_absence_for_negated_profile(acceptance_report, well, triangle):
    t0 = time.time()
    dent = negate(triangle)
    # truncation estimate: the only box edge the threshold feels is the
    # transverse one; doubling the clearance measures it
    H = 6.0
    g1 = fo.Grid2D(L=5.0, H_lo=H, H_hi=H, d=1.0, h=0.1)
    g2 = fo.Grid2D(L=5.0, H_lo=2 * H, H_hi=2 * H, d=1.0, h=0.1)
    tau = abs(fo.transverse_threshold(PARAMS, g1)
              - fo.transverse_threshold(PARAMS, g2))
    counts = {}
    minima = {}
    for eps in (0.05, 0.1):
        grid = fo.Grid2D(L=40.0, H_lo=H, H_hi=H, d=1.0, h=0.1)
        op = fo.build_h2d(PARAMS, dent, eps, grid)
        # the dent only removes potential: H_eps - H_0 is a nonnegative
        # diagonal at the matrix level, so nothing can drop below the
        # straight-strip bottom; verify the premise exactly
        f0 = fo.area_fractions(grid, PARAMS, None, 0.0)
        assert np.min(f0 - op.frac) >= -1e-14
        mu1h = fo.transverse_threshold(PARAMS, grid)
        res = fo.lowest_eigs(op, mu1h + 3.0 * fo.box_mode_energy(grid) + 1e-12,
                             k_max=3, sigma=mu1h - 2.0 * fo.box_mode_energy(grid))
        below = res.eigenvalues[res.eigenvalues < mu1h - tau]
        counts[eps] = len(below)
        minima[eps] = (float(res.eigenvalues.min())
                       if res.eigenvalues.size else math.inf)
    dt = time.time() - t0
    ok = (tau < 1e-6 * abs(well.mu1) and all(c == 0 for c in counts.values())
          and all(v > well.mu1 for v in minima.values()) and dt < 300.0)
    acceptance_report(
        "AC4 absence for inward dent", ok,
        f"no eigenvalue below threshold - tau at eps=0.05, 0.1 "
        f"(lowest values {minima[0.05]:.6f}, {minima[0.1]:.6f} vs mu1 = "
        f"{well.mu1:.6f}), tau = {tau:.2e} (< {1e-6 * abs(well.mu1):.2e}), "
        f"{dt:.0f} s (< 300 s)")


# ---------------------------------------------------------------------------
# 5. Birman-Schwinger identity at the FD eigenvalue
# ---------------------------------------------------------------------------

def test_ac5_birman_schwinger_identity(acceptance_report, well, triangle):
    t0 = time.time()
    eps = 0.1
    dh = asymptotics.predict_delta(well, triangle, eps)
    L = math.ceil(max(40.0, 6.0 / dh) / 0.1) * 0.1
    grid = fo.Grid2D(L=L, H_lo=5.0, H_hi=5.1, d=1.0, h=0.1)
    res, mu1h = _fd_ground_on(triangle, eps, grid, 2.0 * dh**2, k_max=1)
    kappa = math.sqrt(-float(res.eigenvalues[0]))
    h0 = fo.build_h2d(PARAMS, triangle, 0.0, grid, assemble=False)
    pot = bs_core.DeformationPotential(well, triangle, eps)
    mat = bs_core.discrete_bs_matrix(pot, kappa, h0)
    top = mat.top_eigenvalue()
    eigs = np.linalg.eigvalsh(mat.b)
    psd_margin = eigs[0] / np.abs(eigs).max()
    dt = time.time() - t0
    ok = abs(top - 1.0) <= 1e-2 and psd_margin >= -1e-8 and dt < 300.0
    acceptance_report(
        "AC5 Birman-Schwinger identity", ok,
        f"top BS eigenvalue at kappa = sqrt(-lambda1_FD): {top:.10f} "
        f"(|top-1| = {abs(top-1):.1e} <= 1e-2), PSD margin {psd_margin:.1e} "
        f"(>= -1e-8), {dt:.0f} s (< 300 s)")


# ---------------------------------------------------------------------------
# 6. secular root vs delta_hat
# ---------------------------------------------------------------------------

def test_ac6_secular_root_vs_delta_hat(acceptance_report, well, triangle):
    t0 = time.time()
    q_lead, q_full = [], []
    for eps in (0.05, 0.1, 0.2):
        dh = asymptotics.predict_delta(well, triangle, eps)
        pot = bs_core.DeformationPotential(well, triangle, eps)
        lead = bs_core.solve_secular(pot, None, mode="leading")
        q_lead.append(abs(lead.delta_root - dh) / eps**2)
        L = math.ceil(14.0 / dh / 0.05) * 0.05
        grid = fo.Grid2D(L=L, H_lo=5.0, H_hi=5.2, d=1.0, h=0.05)
        h0 = fo.build_h2d(PARAMS, triangle, 0.0, grid, assemble=False)
        full = bs_core.solve_secular(pot, h0, mode="discrete-full")
        q_full.append(abs(full.delta_root - dh) / eps**2)
    r_lead = max(q_lead) / min(q_lead)
    r_full = max(q_full) / min(q_full)
    dt = time.time() - t0
    ok = r_lead <= 2.0 and r_full <= 2.0 and dt < 600.0
    acceptance_report(
        "AC6 secular root vs delta_hat", ok,
        f"|delta_root - delta_hat|/eps^2 spreads: leading x{r_lead:.2f}, "
        f"discrete-full x{r_full:.2f} (both <= 2 across eps = 0.05, 0.1, 0.2), "
        f"{dt:.0f} s (< 600 s)")


# ---------------------------------------------------------------------------
# 7. ground-state eigenfunction
# ---------------------------------------------------------------------------

def test_ac7_eigenfunction_overlap_and_norm(acceptance_report, well, triangle):
    t0 = time.time()
    overlaps = {}
    for eps in (0.1, 0.05):
        rc = harness.RunConfig(alpha=4.0, d=1.0, profile=triangle,
                               epsilons=[eps], modes=["fd"], h=0.1)
        res, mu1h, grid = harness.fd_ground(rc, well, eps, k_max=1)
        assert harness.count_below(res, mu1h) == 1
        u = asymptotics.LeadingEigenfunction(well, triangle, eps)
        overlaps[eps] = fo.overlap(res, grid, u)
    devs = {}
    for eps in (0.2, 0.05):
        u = asymptotics.LeadingEigenfunction(well, triangle, eps)
        devs[eps] = abs(u.norm() / u.norm_leading() - 1.0)
    dt = time.time() - t0
    ok = (overlaps[0.1] >= 0.9 and overlaps[0.05] >= overlaps[0.1]
          and devs[0.05] < devs[0.2] and dt < 600.0)
    acceptance_report(
        "AC7 eigenfunction overlap", ok,
        f"overlap {overlaps[0.1]:.4f} at eps=0.1 (>= 0.9), "
        f"{overlaps[0.05]:.4f} at eps=0.05 (non-decreasing), norm deviation "
        f"{devs[0.05]:.4f} @0.05 < {devs[0.2]:.4f} @0.2, {dt:.0f} s (< 600 s)")


# ---------------------------------------------------------------------------
# 8. critical case: zero-mean profile with binding
# ---------------------------------------------------------------------------

def test_ac8_critical_case(acceptance_report, well):
    t0 = time.time()
    pc = dilate(make_profile("sine_pair", h=1.0, w=1.0), 0.25)
    chk = asymptotics.critical_check(well, pc)
    lam_trial = asymptotics.optimal_lambda(well)
    j_vals = {eps: asymptotics.trial_energy(well, pc, lam_trial, eps).j_exact
              for eps in (0.02, 0.05)}
    # FD confirmation at the larger eps (binding depth ~1e-3 needs a long box)
    eps = 0.05
    g1 = fo.Grid2D(L=210.0, H_lo=5.0, H_hi=5.1, d=1.0, h=0.1)
    g2 = fo.Grid2D(L=420.0, H_lo=5.0, H_hi=5.1, d=1.0, h=0.1)
    res1, mu1h = _fd_ground_on(pc, eps, g1, 0.004)
    res2, _ = _fd_ground_on(pc, eps, g2, 0.004)
    tau = abs(float(res1.eigenvalues[0]) - float(res2.eigenvalues[0]))
    count = int(np.sum(res1.eigenvalues < mu1h - tau))
    dt = time.time() - t0
    ok = (chk.satisfied and all(v < 0 for v in j_vals.values())
          and tau < 1e-6 * abs(well.mu1) and count == 1 and dt < 600.0)
    acceptance_report(
        "AC8 critical case", ok,
        f"criterion ratio {chk.ratio:.4f} < {chk.threshold:.4f} (verified), "
        f"trial energy {j_vals[0.02]:.2e} @0.02, {j_vals[0.05]:.2e} @0.05 "
        f"(both < 0), FD: {count} eigenvalue below threshold - tau "
        f"(tau = {tau:.1e}), {dt:.0f} s (< 600 s)")


# ---------------------------------------------------------------------------
# 9. property suites
# ---------------------------------------------------------------------------

def test_ac9_property_suites(acceptance_report, well, triangle, tmp_path):
    t0 = time.time()
    checks = []

    # moment scaling laws
    m = moments(triangle)
    n = moments(negate(triangle))
    dm = moments(dilate(triangle, 2.0))
    checks.append(("moment laws",
                   n.i1 == -m.i1 and n.i2 == m.i2
                   and math.isclose(dm.i1, m.i1 / 2.0, rel_tol=1e-12)
                   and math.isclose(dm.d2, 2.0 * m.d2, rel_tol=1e-12)))

    # kernel limits and uniform bound
    rng = np.random.default_rng(1)
    xs, ys = rng.uniform(-1, 1, 50), rng.uniform(-1, 1, 50)
    vals = bs_core.kernel_m(0.7, xs, ys)
    checks.append(("kernel m bound",
                   bs_core.kernel_m(0.3, 0.5, 0.5) == 0.0
                   and abs(bs_core.kernel_m(1e-9, 0.4, -0.6)
                           - (-0.5)) < 1e-7
                   and np.all(np.abs(vals) <= np.abs(xs - ys) / 2.0 + 1e-15)))

    # Hilbert-Schmidt inequality chain
    hs_ok = True
    for _ in range(5):
        eps = rng.uniform(0.02, 0.3)
        delta = rng.uniform(0.05, 1.0)
        res = bs_core.hs_bound_M(
            bs_core.DeformationPotential(well, triangle, eps), delta)
        hs_ok &= res.computed <= res.bound * (1 + 1e-9)
    checks.append(("HS chain", hs_ok))

    # FD monotonicity in the domain and O(h^2) convergence
    grid = fo.Grid2D(L=15.0, H_lo=4.0, H_hi=4.0, d=1.0, h=0.1)
    mu1h = fo.transverse_threshold(PARAMS, grid)
    lam = {}
    for eps in (0.1, 0.2):
        res, _ = _fd_ground_on(triangle, eps, grid, 0.05, k_max=1)
        lam[eps] = float(res.eigenvalues[0])
    checks.append(("domain monotonicity", lam[0.2] < lam[0.1] < mu1h))
    binds = []
    for h in (0.2, 0.1, 0.05):
        g = fo.Grid2D(L=15.0, H_lo=4.0, H_hi=4.0, d=1.0, h=h)
        res, th = _fd_ground_on(triangle, 0.2, g, 0.05, k_max=1)
        binds.append(th - float(res.eigenvalues[0]))
    ratio = (binds[0] - binds[1]) / (binds[1] - binds[2])
    checks.append(("O(h^2) convergence", 2.5 < ratio < 5.5))

    # uniqueness: at most one state below threshold at small eps
    res, th = _fd_ground_on(triangle, 0.1,
                            fo.Grid2D(L=40.0, H_lo=5.0, H_hi=5.1, d=1.0, h=0.1),
                            0.02)
    checks.append(("uniqueness", int(np.sum(res.eigenvalues < th)) == 1))

    # idempotent CLI re-run
    cfg = tmp_path / "p.cfg"
    out = tmp_path / "out"
    cfg.write_text(f"""
[well]
alpha = 4.0
d = 1.0
[profile]
kind = triangle
h = 1.0
w = 1.0
[sweep]
epsilons = 0.05, 0.1
modes = predict
[output]
dir = {out}
""")
    assert cli.main(["sweep", "--config", str(cfg)]) == 0
    first = (out / "results.csv").read_bytes()
    assert cli.main(["sweep", "--config", str(cfg)]) == 0
    checks.append(("idempotent CLI", (out / "results.csv").read_bytes() == first))

    dt = time.time() - t0
    failed = [name for name, ok in checks if not ok]
    acceptance_report(
        "AC9 property suites", not failed and dt < 300.0,
        f"{len(checks)} property groups pass "
        f"({', '.join(name for name, _ in checks)}), {dt:.0f} s (< 300 s)"
        + (f"; FAILED: {failed}" if failed else ""))
