"""Closed-form spectral predictions for the weakly deformed strip.

Everything here evaluates explicit formulas built from the 1-D well spectrum
and the profile moments: the two-term eigenvalue expansion, the decay-rate
slope, the leading eigenfunction and its norm, the hard-wall comparison, and
the critical-case variational machinery with exact trial energies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.integrate import quad

from .profiles import Profile, moments, require_admissible
from .well1d import WellSpectrum, eval_mode, eval_transverse_integral


# ---------------------------------------------------------------------------
# eigenvalue expansion and decay rate
# ---------------------------------------------------------------------------

def lambda1_expansion(mu1: float, alpha: float, v1d: float, i1: float,
                      epsilon: float) -> float:
    """Two-term expansion mu1 - eps^2 (alpha^2 v1(d)^4 / 4) (int f)^2."""
    return mu1 - epsilon**2 * (alpha**2 * v1d**4 / 4.0) * i1**2


def delta_hat(alpha: float, v1d: float, i1: float, epsilon: float) -> float:
    """Leading decay rate eps * (alpha v1(d)^2 / 2) * int f."""
    return epsilon * (alpha * v1d**2 / 2.0) * i1


@dataclass(frozen=True)
class Lambda1Prediction:
    value: float
    classification: str  # 'unique bound state' | 'no bound state' | 'critical'
    epsilon: float
    eps2_coefficient: float


def classify_i1(i1: float, i2: float, support_len: float) -> str:
    if abs(i1) <= 1e-9 * math.sqrt(max(i2, 0.0)) * math.sqrt(max(support_len, 1e-300)):
        return "critical"
    return "unique bound state" if i1 > 0 else "no bound state"


def predict_lambda1(well: WellSpectrum, profile: Profile,
                    epsilon: float) -> Lambda1Prediction:
    """Predicted lowest eigenvalue with the existence classification."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    require_admissible(profile, well.params.d, epsilon)
    m = moments(profile)
    g = well.ground
    coeff = (well.params.alpha**2 * g.value_at_edge**4 / 4.0) * m.i1**2
    a, b = profile.support
    cls = classify_i1(m.i1, m.i2, b - a)
    return Lambda1Prediction(value=well.mu1 - epsilon**2 * coeff,
                             classification=cls, epsilon=epsilon,
                             eps2_coefficient=coeff)


def predict_delta(well: WellSpectrum, profile: Profile, epsilon: float) -> float:
    """Leading decay rate; requires the attractive non-critical regime int f > 0."""
    m = moments(profile)
    if m.i1 <= 0:
        raise ValueError("not in the attractive non-critical regime (int f <= 0)")
    g = well.ground
    return delta_hat(well.params.alpha, g.value_at_edge, m.i1, epsilon)


@dataclass(frozen=True)
class Prediction:
    """Bundle of every closed-form quantity for one (well, profile) pair."""

    mu1: float
    v1_d: float
    eps2_coefficient: float
    delta_hat_slope: float            # d(delta)/d(eps); positive iff int f > 0
    u_norm_leading: Optional[float]   # sqrt(2) v1(d) (int f)^{1/2}, if int f > 0
    dirichlet_const: float            # (pi/d)^2
    dirichlet_eps2_coefficient: float  # (pi/d)^4 (int f / d)^2
    critical_ratio: Optional[float]   # D2 / I2, when derivative known and I2 > 0
    critical_threshold: float         # alpha v1(d)^2 / sqrt(-mu1)
    classification: str


def predict(well: WellSpectrum, profile: Profile) -> Prediction:
    m = moments(profile)
    g = well.ground
    alpha, d = well.params.alpha, well.params.d
    v1d = g.value_at_edge
    a, b = profile.support
    ratio = None
    if profile.has_derivative and m.i2 > 0:
        ratio = m.d2 / m.i2
    u_norm = math.sqrt(2.0) * v1d * math.sqrt(m.i1) if m.i1 > 0 else None
    return Prediction(
        mu1=well.mu1,
        v1_d=v1d,
        eps2_coefficient=(alpha**2 * v1d**4 / 4.0) * m.i1**2,
        delta_hat_slope=alpha * v1d**2 * m.i1 / 2.0,
        u_norm_leading=u_norm,
        dirichlet_const=(math.pi / d) ** 2,
        dirichlet_eps2_coefficient=(math.pi / d) ** 4 * (m.i1 / d) ** 2,
        critical_ratio=ratio,
        critical_threshold=alpha * v1d**2 / math.sqrt(-well.mu1),
        classification=classify_i1(m.i1, m.i2, b - a),
    )


# ---------------------------------------------------------------------------
# leading eigenfunction
# ---------------------------------------------------------------------------

class LeadingEigenfunction:
    """Leading term u_eps(x1, x2) = v1(x2) * U(x1) of the true eigenfunction.

    The transverse integral over the deformation layer is done in closed form
    (the signed well integral W), so only one longitudinal quadrature remains:

        U(x1) = sqrt(alpha/eps) * int exp(-dh |x1 - y|) W(d + eps f(y)) dy.
    """

    def __init__(self, well: WellSpectrum, profile: Profile, epsilon: float):
        m = moments(profile)
        if m.i1 <= 0:
            raise ValueError("leading eigenfunction defined for int f > 0 only")
        require_admissible(profile, well.params.d, epsilon)
        self.well = well
        self.profile = profile
        self.epsilon = epsilon
        self.dh = predict_delta(well, profile, epsilon)
        self.moments = m
        g = well.ground
        self._layer = lambda y: eval_transverse_integral(
            g, well.params.d + epsilon * profile(y))
        # tail coefficients: for x1 beyond the support, U = C_pm e^{-dh |x1|}
        a, b = profile.support
        pts = profile.quad_points()
        cp = cm = 0.0
        for lo, hi in zip(pts[:-1], pts[1:]):
            cp += quad(lambda y: np.exp(self.dh * y) * self._layer(y), lo, hi,
                       epsabs=1e-12, epsrel=1e-12, limit=200)[0]
            cm += quad(lambda y: np.exp(-self.dh * y) * self._layer(y), lo, hi,
                       epsabs=1e-12, epsrel=1e-12, limit=200)[0]
        self._c_right = cp   # x1 > b: U = pref * c_right * e^{-dh x1}
        self._c_left = cm    # x1 < a: U = pref * c_left  * e^{+dh x1}
        self._pref = math.sqrt(well.params.alpha / epsilon)

    def longitudinal(self, x1) -> np.ndarray:
        """U(x1), vectorized."""
        x1 = np.atleast_1d(np.asarray(x1, dtype=float))
        a, b = self.profile.support
        out = np.empty_like(x1)
        for i, xi in enumerate(x1):
            if xi >= b:
                out[i] = self._c_right * math.exp(-self.dh * xi)
            elif xi <= a:
                out[i] = self._c_left * math.exp(self.dh * xi)
            else:
                pts = sorted({a, b, xi, *self.profile.kink_points})
                total = 0.0
                for lo, hi in zip(pts[:-1], pts[1:]):
                    total += quad(
                        lambda y: np.exp(-self.dh * np.abs(xi - y)) * self._layer(y),
                        lo, hi, epsabs=1e-12, epsrel=1e-12, limit=200)[0]
                out[i] = total
        return self._pref * out

    def __call__(self, x1, x2) -> np.ndarray:
        """u_eps on the tensor product of coordinate arrays (n1, n2)."""
        u1 = self.longitudinal(x1)
        v2 = eval_mode(self.well.ground, np.atleast_1d(x2))
        return np.outer(u1, v2)

    def norm(self) -> float:
        """||u_eps||_{L^2(R^2)} by quadrature (tails in closed form)."""
        a, b = self.profile.support
        interior = quad(lambda x: self.longitudinal(x) ** 2, a, b,
                        epsabs=1e-12, epsrel=1e-10, limit=200)[0]
        tails = (self._pref**2
                 * (self._c_right**2 * math.exp(-2 * self.dh * b)
                    + self._c_left**2 * math.exp(2 * self.dh * a))
                 / (2 * self.dh))
        return math.sqrt(interior + tails)

    def norm_leading(self) -> float:
        g = self.well.ground
        return math.sqrt(2.0) * g.value_at_edge * math.sqrt(self.moments.i1)


# ---------------------------------------------------------------------------
# hard-wall comparison
# ---------------------------------------------------------------------------

def dirichlet_lambda1(d: float, i1: float, epsilon: float) -> float:
    """Two-term hard-wall strip value (pi/d)^2 - eps^2 (pi/d)^4 (int f / d)^2."""
    return (math.pi / d) ** 2 - epsilon**2 * (math.pi / d) ** 4 * (i1 / d) ** 2


def dirichlet_compare(d: float, profile: Profile, epsilon: float) -> float:
    return dirichlet_lambda1(d, moments(profile).i1, epsilon)


@dataclass(frozen=True)
class CoefficientLimitRow:
    alpha: float
    mu1_gap: float          # (mu1 + alpha) - (pi/d)^2
    soft_coefficient: float
    dirichlet_coefficient: float
    ratio: float


def coefficient_limit_check(alpha_list, d: float, profile: Profile) -> list[CoefficientLimitRow]:
    """Tabulate the soft eps^2-coefficient against the hard-wall one over alpha."""
    from .well1d import WellParams, solve_well

    m = moments(profile)
    dir_coeff = (math.pi / d) ** 4 * (m.i1 / d) ** 2
    rows = []
    for alpha in alpha_list:
        well = solve_well(WellParams(alpha=alpha, d=d))
        v1d = well.ground.value_at_edge
        soft = (alpha**2 * v1d**4 / 4.0) * m.i1**2
        rows.append(CoefficientLimitRow(
            alpha=alpha,
            mu1_gap=(well.mu1 + alpha) - (math.pi / d) ** 2,
            soft_coefficient=soft,
            dirichlet_coefficient=dir_coeff,
            ratio=soft / dir_coeff if dir_coeff > 0 else math.nan,
        ))
    return rows


# ---------------------------------------------------------------------------
# critical case
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CriticalCheck:
    ratio: float       # int |f'|^2 / int f^2
    threshold: float   # alpha v1(d)^2 / sqrt(-mu1)
    satisfied: bool
    verdict: str       # 'bound state for small eps' | 'inconclusive'


def critical_check(well: WellSpectrum, profile: Profile) -> CriticalCheck:
    """Sufficient condition for binding when the deformation preserves area.

    Only a sufficient condition: when it fails the verdict is 'inconclusive',
    never a claim of absence.
    """
    m = moments(profile)
    if m.i2 <= 0:
        raise ValueError("degenerate profile: int f^2 = 0")
    a, b = profile.support
    if classify_i1(m.i1, m.i2, b - a) != "critical":
        raise ValueError(f"profile is not critical: int f = {m.i1:g} != 0")
    ratio = m.d2 / m.i2  # raises DerivativeUnavailableError without f'
    g = well.ground
    threshold = well.params.alpha * g.value_at_edge**2 / math.sqrt(-well.mu1)
    ok = ratio < threshold
    return CriticalCheck(ratio=ratio, threshold=threshold, satisfied=ok,
                         verdict="bound state for small eps" if ok else "inconclusive")


@lru_cache(maxsize=1)
def cutoff_derivative_energy() -> float:
    """int |chi'|^2 for the fixed smooth cutoff: chi = 1 on [-1,1],
    exp(1 - 1/(1 - (|x|-1)^2)) on 1 < |x| < 2, 0 beyond."""
    def dchi_sq(x):
        u = x - 1.0
        chi = np.exp(1.0 - 1.0 / (1.0 - u * u))
        return (chi * 2.0 * u / (1.0 - u * u) ** 2) ** 2

    val, _ = quad(dchi_sq, 1.0, 2.0, epsabs=1e-10, epsrel=1e-10, limit=200)
    return 2.0 * val


@dataclass(frozen=True)
class TrialEnergy:
    lam: float
    epsilon: float
    j_exact: float
    j_quadratic_coeff: float  # lam^2 D2 - alpha v1(d)^2 (2 lam - sqrt(-mu1)) I2


def optimal_lambda(well: WellSpectrum) -> float:
    """Variational parameter minimizing the eps^2 coefficient: sqrt(-mu1)."""
    return math.sqrt(-well.mu1)


def trial_energy(well: WellSpectrum, profile: Profile, lam: float,
                 epsilon: float) -> TrialEnergy:
    """Exact shifted quadratic-form value of the cutoff trial function.

    J = eps^3 int|chi'|^2 + lam^2 eps^2 int|f'|^2
        - alpha int (1 + lam eps f)^2 W(d + eps f) dx1,

    with W the closed-form transverse integral; no Taylor expansion is used.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    m = moments(profile)
    a, b = profile.support
    if max(abs(a), abs(b)) > 1.0 / epsilon**3:
        raise ValueError("cutoff condition violated: supp f exceeds [-1/eps^3, 1/eps^3]")
    require_admissible(profile, well.params.d, epsilon)
    d2 = m.d2  # raises without derivative
    g = well.ground
    alpha, d = well.params.alpha, well.params.d

    def integrand(y):
        return ((1.0 + lam * epsilon * profile(y)) ** 2
                * eval_transverse_integral(g, d + epsilon * profile(y)))

    pts = profile.quad_points()
    deform = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        if hi > lo:
            deform += quad(integrand, lo, hi, epsabs=1e-12, epsrel=1e-12,
                           limit=200)[0]
    j = (epsilon**3 * cutoff_derivative_energy()
         + lam**2 * epsilon**2 * d2
         - alpha * deform)
    v1d = g.value_at_edge
    coeff = lam**2 * d2 - alpha * v1d**2 * (2.0 * lam - math.sqrt(-well.mu1)) * m.i2
    return TrialEnergy(lam=lam, epsilon=epsilon, j_exact=j, j_quadratic_coeff=coeff)
