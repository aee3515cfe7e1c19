"""Closed-form spectrum of the 1-D square-well operator -psi'' - alpha*chi_[0,d]*psi.

All negative eigenvalues mu_n = k_n^2 - alpha are found from the even/odd
secular equations

    even:  k tan(k d/2) =  kappa
    odd :  k cot(k d/2) = -kappa,      kappa = sqrt(-mu) = sqrt(alpha - k^2),

solved in the variable eta = k d/2 on (0, eta_max), eta_max = sqrt(alpha) d/2.
Each branch (j pi/2, (j+1) pi/2) intersected with (0, eta_max) carries exactly
one root; bisection on a pole-free reformulation makes the solve unconditionally
convergent.  Eigenfunctions are trigonometric inside [0, d] with exponential
tails, normalized analytically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class WellParams:
    alpha: float
    d: float

    def __post_init__(self):
        if not (self.alpha > 0):
            raise ValueError("coupling strength alpha must be positive")
        if not (self.d > 0):
            raise ValueError("strip width d must be positive")


@dataclass(frozen=True)
class WellMode:
    """One bound state of the 1-D well, in closed form.

    Inside [0, d]:  v(x) = A cos(k (x - d/2))  (even)  or  A sin(k (x - d/2)) (odd).
    For x > d:      v(x) = v(d) exp(-kappa (x - d));  mirrored (anti)symmetrically
    for x < 0 about d/2.
    """

    params: WellParams
    index: int
    mu: float
    k_in: float
    kappa: float
    parity: str  # 'even' | 'odd'
    norm_const: float  # interior amplitude A > 0

    @property
    def value_at_edge(self) -> float:
        """v(d), the eigenfunction value at the deformed edge."""
        half = self.k_in * self.params.d / 2.0
        if self.parity == "even":
            return self.norm_const * math.cos(half)
        return self.norm_const * math.sin(half)

    @property
    def slope_at_edge(self) -> float:
        """v'(d) = -kappa v(d)."""
        return -self.kappa * self.value_at_edge

    @property
    def sup_norm(self) -> float:
        """max |v| over the line (attained inside the well)."""
        return self.norm_const


@dataclass(frozen=True)
class WellSpectrum:
    params: WellParams
    modes: tuple[WellMode, ...]

    @property
    def count(self) -> int:
        return len(self.modes)

    @property
    def ground(self) -> WellMode:
        return self.modes[0]

    @property
    def mu1(self) -> float:
        return self.modes[0].mu


def _branch_function(eta: float, eta_max: float, even: bool) -> float:
    """Pole-free secular residual on one tangent/cotangent branch.

    even:  eta sin(eta) - kt cos(eta) = 0  with kt = sqrt(eta_max^2 - eta^2)
    odd :  eta cos(eta) + kt sin(eta) = 0
    The only interior zeros on a branch are the secular roots; the removed
    poles of tan/cot sit at the branch endpoints.
    """
    kt = math.sqrt(max(eta_max * eta_max - eta * eta, 0.0))
    if even:
        return eta * math.sin(eta) - kt * math.cos(eta)
    return eta * math.cos(eta) + kt * math.sin(eta)


def solve_well(params: WellParams, tol: float = 1e-13) -> WellSpectrum:
    """All negative eigenvalues and closed-form eigenfunctions of the well.

    tol is the relative bisection tolerance on eta; the secular residual of
    every returned mode is checked downstream at 1e-10 relative.
    """
    if not (0 < tol <= 1e-6):
        raise ValueError("tol must lie in (0, 1e-6]")
    alpha, d = params.alpha, params.d
    eta_max = math.sqrt(alpha) * d / 2.0
    modes = []
    j = 0
    half_pi = math.pi / 2.0
    while j * half_pi < eta_max:
        a = j * half_pi
        b = min((j + 1) * half_pi, eta_max)
        even = j % 2 == 0
        fa = _branch_function(a, eta_max, even)
        fb = _branch_function(b, eta_max, even)
        if fa == 0.0:
            # exact branch-endpoint hit can only be the eta=0 corner; no root
            j += 1
            continue
        if fa * fb > 0.0:
            # truncated branch with no sign change: threshold coincidence
            j += 1
            continue
        while (b - a) > tol * max(b, 1.0):
            mid = 0.5 * (a + b)
            fm = _branch_function(mid, eta_max, even)
            if fm == 0.0:
                a = b = mid
                break
            if fa * fm < 0.0:
                b = mid
            else:
                a, fa = mid, fm
        eta = 0.5 * (a + b)
        if eta_max - eta <= 1e-10 * eta_max:
            # zero-energy resonance: mu = 0 is not a discrete eigenvalue
            j += 1
            continue
        k = 2.0 * eta / d
        kappa = math.sqrt(max(alpha - k * k, 0.0))
        mu = k * k - alpha
        half = eta
        if even:
            interior = d / 2.0 + math.sin(2.0 * half) / (2.0 * k)
            tail = math.cos(half) ** 2 / kappa
        else:
            interior = d / 2.0 - math.sin(2.0 * half) / (2.0 * k)
            tail = math.sin(half) ** 2 / kappa
        amp = 1.0 / math.sqrt(interior + tail)
        modes.append(WellMode(params=params, index=len(modes) + 1, mu=mu,
                              k_in=k, kappa=kappa,
                              parity="even" if even else "odd", norm_const=amp))
        j += 1
    if not modes:
        raise RuntimeError("square well produced no bound state; should be impossible")
    return WellSpectrum(params=params, modes=tuple(modes))


def eval_mode(mode: WellMode, x):
    """Eigenfunction v_n(x), piecewise closed form, vectorized."""
    x = np.asarray(x, dtype=float)
    d = mode.params.d
    k, kappa, amp = mode.k_in, mode.kappa, mode.norm_const
    even = mode.parity == "even"
    out = np.empty_like(x)
    mid = x - d / 2.0
    inside = (x >= 0.0) & (x <= d)
    out[inside] = amp * (np.cos(k * mid[inside]) if even else np.sin(k * mid[inside]))
    right = x > d
    vd = mode.value_at_edge
    out[right] = vd * np.exp(-kappa * (x[right] - d))
    left = x < 0.0
    v0 = vd if even else -vd
    out[left] = v0 * np.exp(kappa * x[left])
    return out if out.ndim else float(out)


def eval_mode_second_derivative(mode: WellMode, x):
    """v_n''(x) per piece (analytic); used for ODE residual checks."""
    x = np.asarray(x, dtype=float)
    d = mode.params.d
    k, kappa = mode.k_in, mode.kappa
    out = np.empty_like(x)
    inside = (x >= 0.0) & (x <= d)
    out[inside] = -k * k * eval_mode(mode, x[inside])
    outside = ~inside
    out[outside] = kappa * kappa * eval_mode(mode, x[outside])
    return out if out.ndim else float(out)


def eval_transverse_integral(mode: WellMode, t):
    """W(t) = int_d^t v_n^2(s) ds, signed, in closed form.

    W(d) = 0; W < 0 for t < d.  This is the exact transverse integral over the
    deformation layer used by the secular and trial-energy evaluations.
    """
    t = np.asarray(t, dtype=float)
    d = mode.params.d
    k, kappa, amp = mode.k_in, mode.kappa, mode.norm_const
    even = mode.parity == "even"
    vd2 = mode.value_at_edge ** 2
    v02 = vd2  # |v(0)| = |v(d)| by parity

    def p_in(s):
        # antiderivative of v^2 on [0, d]
        u = s - d / 2.0
        if even:
            return amp * amp * (u / 2.0 + np.sin(2.0 * k * u) / (4.0 * k))
        return amp * amp * (u / 2.0 - np.sin(2.0 * k * u) / (4.0 * k))

    out = np.empty_like(t)
    right = t >= d
    out[right] = vd2 * (1.0 - np.exp(-2.0 * kappa * (t[right] - d))) / (2.0 * kappa)
    midzone = (t >= 0.0) & (t < d)
    out[midzone] = p_in(t[midzone]) - p_in(np.asarray(d, dtype=float))
    left = t < 0.0
    w0 = p_in(np.asarray(0.0)) - p_in(np.asarray(d, dtype=float))
    out[left] = w0 - v02 * (1.0 - np.exp(2.0 * kappa * t[left])) / (2.0 * kappa)
    return out if out.ndim else float(out)


def large_alpha_reference(params: WellParams) -> tuple[float, float]:
    """Leading large-alpha references: mu1 ~ -alpha + (pi/d)^2 and
    v1(d) ~ sqrt(2/d) * pi / (d sqrt(alpha))."""
    alpha, d = params.alpha, params.d
    mu1_approx = -alpha + (math.pi / d) ** 2
    v1d_approx = math.sqrt(2.0 / d) * math.pi / (d * math.sqrt(alpha))
    return mu1_approx, v1d_approx


def secular_residual(mode: WellMode) -> float:
    """Relative residual of the transcendental secular equation for one mode."""
    half = mode.k_in * mode.params.d / 2.0
    if mode.parity == "even":
        lhs = mode.k_in * math.tan(half)
        return abs(lhs - mode.kappa) / max(abs(mode.kappa), abs(lhs), 1e-300)
    lhs = mode.k_in / math.tan(half)
    return abs(lhs + mode.kappa) / max(abs(mode.kappa), abs(lhs), 1e-300)
