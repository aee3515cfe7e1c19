"""Deformation profiles: compactly supported continuous functions with moments.

A profile describes how the upper edge of the potential strip is deformed:
the strip occupies 0 < x2 < d + eps*f(x1).  All builtin families are
continuous with compact support; every family except none currently keeps a
bounded derivative, so the critical-case machinery (which needs the
W^{1,inf} seminorm) works for all of them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad


class DerivativeUnavailableError(ValueError):
    """Raised when a derivative-based quantity is requested but f' is unknown."""


@dataclass(frozen=True)
class ProfileMoments:
    """Integrals of a profile: I1 = int f, I2 = int f^2, D2 = int |f'|^2."""

    i1: float
    i2: float
    min_f: float
    max_f: float
    half_diameter: float
    quad_error: float = 0.0
    _d2: Optional[float] = None

    @property
    def d2(self) -> float:
        if self._d2 is None:
            raise DerivativeUnavailableError("profile has no derivative; D2 unavailable")
        return self._d2


class Profile:
    """Compactly supported deformation profile f with optional derivative.

    Instances are immutable; evaluation is vectorized over numpy arrays.
    """

    def __init__(
        self,
        kind: str,
        support: tuple[float, float],
        fn: Callable[[np.ndarray], np.ndarray],
        dfn: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        exact_moments: Optional[ProfileMoments] = None,
        kink_points: Sequence[float] = (),
    ):
        a, b = float(support[0]), float(support[1])
        if b < a:
            raise ValueError("support interval reversed")
        self.kind = kind
        self.support = (a, b)
        self._fn = fn
        self._dfn = dfn
        self._exact_moments = exact_moments
        # interior points where f or f' is non-smooth; quadrature splits here
        self.kink_points = tuple(sorted(p for p in kink_points if a < p < b))

    @property
    def has_derivative(self) -> bool:
        return self._dfn is not None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        a, b = self.support
        out = np.zeros_like(x)
        inside = (x >= a) & (x <= b)
        if np.any(inside):
            out[inside] = self._fn(x[inside])
        return out if out.ndim else float(out)

    def derivative(self, x):
        if self._dfn is None:
            raise DerivativeUnavailableError(f"profile kind={self.kind!r} has no derivative")
        x = np.asarray(x, dtype=float)
        a, b = self.support
        out = np.zeros_like(x)
        inside = (x > a) & (x < b)
        if np.any(inside):
            out[inside] = self._dfn(x[inside])
        return out if out.ndim else float(out)

    def moments(self) -> ProfileMoments:
        return moments(self)

    def quad_points(self) -> list[float]:
        """Break points for adaptive quadrature over the support."""
        a, b = self.support
        return [a, *self.kink_points, b]


def _quad_support(profile: Profile, g, tol: float = 1e-10) -> tuple[float, float]:
    """Integrate g over the support, splitting at kinks. Returns (value, err)."""
    pts = profile.quad_points()
    total, err = 0.0, 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        if hi <= lo:
            continue
        v, e = quad(g, lo, hi, epsabs=tol, epsrel=tol, limit=200)
        total += v
        err += e
    return total, err


def moments(profile: Profile, tol: float = 1e-10) -> ProfileMoments:
    """Moments of the profile: closed-form when available, else quadrature."""
    if profile._exact_moments is not None:
        return profile._exact_moments
    a, b = profile.support
    if b == a:
        return ProfileMoments(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, _d2=0.0)
    i1, e1 = _quad_support(profile, lambda x: profile(x), tol)
    i2, e2 = _quad_support(profile, lambda x: profile(x) ** 2, tol)
    d2 = None
    ed = 0.0
    if profile.has_derivative:
        d2, ed = _quad_support(profile, lambda x: profile.derivative(x) ** 2, tol)
    xs = np.linspace(a, b, 4001)
    vals = profile(xs)
    return ProfileMoments(
        i1=i1,
        i2=i2,
        min_f=min(float(vals.min()), 0.0),
        max_f=max(float(vals.max()), 0.0),
        half_diameter=(b - a) / 2.0,
        quad_error=e1 + e2 + ed,
        _d2=d2,
    )


def abs_integral(profile: Profile, tol: float = 1e-10) -> float:
    """int |f| dx over the support (sign-change points found numerically)."""
    val, _ = _quad_support(profile, lambda x: np.abs(profile(x)), tol)
    return val


def make_profile(kind: str, **params) -> Profile:
    """Construct a builtin profile family.

    Families:
      triangle:  max(0, 1 - |x/w|) * h on [-w, w]
      bump:      h * exp(1 - 1/(1-(x/w)^2)) on (-w, w)
      sine_pair: h * sin(pi x / w) on [-w, w]  (zero mean)
      table:     piecewise-linear through knots (x strictly increasing,
                 f zero at both ends)
      zero:      f identically zero
    """
    if kind == "zero":
        zm = ProfileMoments(0.0, 0.0, 0.0, 0.0, 0.0, _d2=0.0)
        return Profile("zero", (0.0, 0.0), lambda x: np.zeros_like(x),
                       lambda x: np.zeros_like(x), exact_moments=zm)

    if kind == "table":
        xs = np.asarray(params["x"], dtype=float)
        fs = np.asarray(params["f"], dtype=float)
        if xs.ndim != 1 or xs.shape != fs.shape or xs.size < 2:
            raise ValueError("table profile needs matching 1-D x and f arrays")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("table x values must be strictly increasing")
        if fs[0] != 0.0 or fs[-1] != 0.0:
            raise ValueError("table profile must vanish at both endpoints")
        dx = np.diff(xs)
        df = np.diff(fs)
        slopes = df / dx
        i1 = float(np.sum(0.5 * (fs[:-1] + fs[1:]) * dx))
        # int (a + b t)^2 dt over each linear segment, exactly
        i2 = float(np.sum(dx * (fs[:-1] ** 2 + fs[:-1] * fs[1:] + fs[1:] ** 2) / 3.0))
        d2 = float(np.sum(slopes**2 * dx))
        em = ProfileMoments(i1, i2, min(float(fs.min()), 0.0), max(float(fs.max()), 0.0),
                            (xs[-1] - xs[0]) / 2.0, _d2=d2)

        def fn(x, xs=xs, fs=fs):
            return np.interp(x, xs, fs)

        def dfn(x, xs=xs, slopes=slopes):
            idx = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(slopes) - 1)
            return slopes[idx]

        return Profile("table", (float(xs[0]), float(xs[-1])), fn, dfn,
                       exact_moments=em, kink_points=xs[1:-1])

    h = float(params.get("h", 1.0))
    w = float(params.get("w", 1.0))
    if w <= 0:
        raise ValueError("profile width w must be positive")

    if kind == "triangle":
        em = ProfileMoments(h * w, 2.0 * h * h * w / 3.0, min(0.0, h), max(0.0, h),
                            w, _d2=2.0 * h * h / w)

        def fn(x):
            return h * (1.0 - np.abs(x) / w)

        def dfn(x):
            return -h * np.sign(x) / w

        return Profile("triangle", (-w, w), fn, dfn, exact_moments=em, kink_points=[0.0])

    if kind == "bump":
        def fn(x):
            u2 = (x / w) ** 2
            out = np.zeros_like(x)
            mask = u2 < 1.0
            out[mask] = h * np.exp(1.0 - 1.0 / (1.0 - u2[mask]))
            return out

        def dfn(x):
            u = x / w
            u2 = u**2
            out = np.zeros_like(x)
            mask = u2 < 1.0
            um = u[mask]
            out[mask] = h * np.exp(1.0 - 1.0 / (1.0 - um**2)) * (-2.0 * um / (1.0 - um**2) ** 2) / w
            return out

        return Profile("bump", (-w, w), fn, dfn)

    if kind == "sine_pair":
        em = ProfileMoments(0.0, h * h * w, -abs(h), abs(h), w,
                            _d2=h * h * np.pi**2 / w)

        def fn(x):
            return h * np.sin(np.pi * x / w)

        def dfn(x):
            return h * (np.pi / w) * np.cos(np.pi * x / w)

        return Profile("sine_pair", (-w, w), fn, dfn, exact_moments=em)

    raise ValueError(f"unknown profile kind {kind!r}")


def negate(profile: Profile) -> Profile:
    """The profile -f."""
    em = None
    if profile._exact_moments is not None:
        m = profile._exact_moments
        em = ProfileMoments(-m.i1, m.i2, -m.max_f, -m.min_f, m.half_diameter,
                            m.quad_error, _d2=m._d2)
    dfn = None
    if profile.has_derivative:
        dfn = lambda x: -profile._dfn(x)  # noqa: E731
    return Profile(f"neg({profile.kind})", profile.support,
                   lambda x: -profile._fn(x), dfn, exact_moments=em,
                   kink_points=profile.kink_points)


def dilate(profile: Profile, gamma: float) -> Profile:
    """The profile f_gamma(x) = f(gamma x); support and moments rescale exactly."""
    if gamma <= 0:
        raise ValueError("dilation factor gamma must be positive")
    a, b = profile.support
    em = None
    if profile._exact_moments is not None:
        m = profile._exact_moments
        d2 = None if m._d2 is None else gamma * m._d2
        em = ProfileMoments(m.i1 / gamma, m.i2 / gamma, m.min_f, m.max_f,
                            m.half_diameter / gamma, m.quad_error, _d2=d2)
    dfn = None
    if profile.has_derivative:
        dfn = lambda x: gamma * profile._dfn(gamma * x)  # noqa: E731
    return Profile(f"dilate({profile.kind},{gamma:g})", (a / gamma, b / gamma),
                   lambda x: profile._fn(gamma * x), dfn, exact_moments=em,
                   kink_points=[p / gamma for p in profile.kink_points])


def admissible(profile: Profile, d: float, epsilon: float) -> bool:
    """Whether the deformed strip 0 < x2 < d + eps*f is a valid open region."""
    m = moments(profile)
    return d + epsilon * m.min_f > 0.0


def require_admissible(profile: Profile, d: float, epsilon: float) -> None:
    if not admissible(profile, d, epsilon):
        m = moments(profile)
        raise ValueError(
            f"inadmissible geometry: d + eps*min(f) = {d + epsilon * m.min_f:g} <= 0 "
            f"(eps must be < {d / abs(m.min_f):g})"
        )
