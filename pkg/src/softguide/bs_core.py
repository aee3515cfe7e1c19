"""Birman-Schwinger machinery for the deformed strip.

The deformation enters through the sign-indefinite layer potential
U = alpha (chi_{deformed strip} - chi_{straight strip}).  An energy
mu_1 - delta^2 below the essential-spectrum threshold is an eigenvalue
exactly when the compact operator built from |U|^{1/2} and the straight-strip
resolvent has eigenvalue 1.  The resolvent splits into a rank-one singular
part with the 1/(2 delta) prefactor plus a remainder, which turns the
eigenvalue condition into a scalar secular equation F(delta) = 1.

Everything is realized twice: in analytic leading-order form (closed-form
transverse integrals, 1-D quadrature) and fully discretely on the
finite-difference grid, where the identity "top eigenvalue of B equals 1"
holds at the matrix level up to linear-solver tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import quad

from .asymptotics import predict_delta
from .fd_oracle import (DiscreteOperator, ResolventSolver, SeparableResolvent,
                        area_fractions)
from .profiles import Profile, abs_integral, moments
from .well1d import WellSpectrum, eval_transverse_integral


class BracketError(RuntimeError):
    """Raised when no secular root is found inside the (widened) bracket."""


@dataclass
class DeformationPotential:
    """Layer potential U = alpha (chi_{deformed} - chi_{straight}).

    U is +alpha on the added sliver d < x2 < d + eps f (where f > 0) and
    -alpha on the removed sliver d + eps f < x2 < d (where f < 0).
    """

    well: WellSpectrum
    profile: Profile
    epsilon: float

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    def u_value(self, x1, x2):
        """Pointwise U(x1, x2), vectorized over broadcastable arrays."""
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        d = self.well.params.d
        edge = d + self.epsilon * self.profile(x1)
        added = (x2 > d) & (x2 < edge)
        removed = (x2 < d) & (x2 > edge)
        out = np.zeros(np.broadcast_shapes(x1.shape, x2.shape))
        out[added] = self.well.params.alpha
        out[removed] = -self.well.params.alpha
        return out if out.ndim else float(out)

    def v_value(self, x1, x2):
        """sign(U) |U|^{1/2}."""
        u = np.asarray(self.u_value(x1, x2))
        return np.sign(u) * np.sqrt(np.abs(u))

    @property
    def support_box(self) -> tuple[tuple[float, float], tuple[float, float]]:
        a, b = self.profile.support
        m = moments(self.profile)
        d = self.well.params.d
        return ((a, b), (d + self.epsilon * min(m.min_f, 0.0),
                         d + self.epsilon * max(m.max_f, 0.0)))

    def abs_mass(self) -> float:
        """The exact identity int |U| = alpha * eps * int |f|."""
        return self.well.params.alpha * self.epsilon * abs_integral(self.profile)

    def layer_integral(self) -> float:
        """int U(x) v_1^2(x_2) dx = alpha * int W(d + eps f) dx1, exact in x2."""
        g = self.well.ground
        d = self.well.params.d
        pts = self.profile.quad_points()
        total = 0.0
        for lo, hi in zip(pts[:-1], pts[1:]):
            if hi > lo:
                total += quad(
                    lambda y: eval_transverse_integral(g, d + self.epsilon * self.profile(y)),
                    lo, hi, epsabs=1e-12, epsrel=1e-12, limit=200)[0]
        return self.well.params.alpha * total

    def grid_u(self, op: DiscreteOperator) -> np.ndarray:
        """Cell-averaged U on the grid of `op`: alpha * (frac_eps - frac_0).

        Uses the same area-fraction routine as the discrete Hamiltonians, so
        H_eps = H_0 - diag(U) holds exactly at the matrix level.
        """
        frac0 = op.frac if op.epsilon == 0.0 else area_fractions(
            op.grid, self.well.params, None, 0.0)
        frac_eps = area_fractions(op.grid, self.well.params, self.profile,
                                  self.epsilon)
        return self.well.params.alpha * (frac_eps - frac0)


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

def kernel_m(delta: float, x1, x1p):
    """Longitudinal remainder kernel (exp(-delta r) - 1) / (2 delta), r = |x1-x1p|.

    For delta*r < 1e-6 the subtraction cancels catastrophically; a truncated
    alternating series (relative error < 1e-14 there) takes over.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    r = np.abs(np.asarray(x1, dtype=float) - np.asarray(x1p, dtype=float))
    z = delta * r
    out = np.empty_like(r)
    small = z < 1e-6
    rs = r[small]
    out[small] = -rs / 2.0 + delta * rs**2 / 4.0 - delta**2 * rs**3 / 12.0
    big = ~small
    out[big] = (np.exp(-z[big]) - 1.0) / (2.0 * delta)
    return out if out.ndim else float(out)


def rank_one_eigenvalue(pot: DeformationPotential, delta: float) -> float:
    """Unique nonzero eigenvalue of the singular rank-one resolvent part:
    (1 / 2 delta) * int U v_1^2."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    return pot.layer_integral() / (2.0 * delta)


@dataclass(frozen=True)
class HSBound:
    bound: float       # M * ||U||_L1 * sup|v1|^2
    computed: float    # actual Hilbert-Schmidt norm of the remainder kernel
    m_const: float     # sup of |kernel_m| over the support square


def hs_bound_M(pot: DeformationPotential, delta: float) -> HSBound:
    """Hilbert-Schmidt bound chain for the longitudinal remainder operator.

    The transverse integrals collapse to the closed-form layer integral W, so
    the HS norm reduces to a 2-D quadrature over supp f x supp f:

        HS^2 = alpha^2 intint |W(d+eps f(x))| |W(d+eps f(y))| m_delta(x,y)^2.
    """
    m = moments(pot.profile)
    m_const = m.half_diameter  # |kernel_m| <= r/2 <= half the support diameter
    bound = m_const * pot.abs_mass() * pot.well.ground.sup_norm**2
    g = pot.well.ground
    d = pot.well.params.d

    def layer_abs(y):
        return np.abs(eval_transverse_integral(g, d + pot.epsilon * pot.profile(y)))

    pts = pot.profile.quad_points()

    def inner(x):
        acc = 0.0
        for lo, hi in zip(pts[:-1], pts[1:]):
            if hi > lo:
                acc += quad(lambda y: layer_abs(y) * kernel_m(delta, x, y) ** 2,
                            lo, hi, epsabs=1e-11, epsrel=1e-9, limit=200)[0]
        return acc

    hs2 = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        if hi > lo:
            hs2 += quad(lambda x: layer_abs(x) * inner(x), lo, hi,
                        epsabs=1e-11, epsrel=1e-9, limit=200)[0]
    computed = pot.well.params.alpha * math.sqrt(max(hs2, 0.0))
    return HSBound(bound=bound, computed=computed, m_const=m_const)


# ---------------------------------------------------------------------------
# discrete Birman-Schwinger matrix
# ---------------------------------------------------------------------------

@dataclass
class DiscreteBS:
    """B restricted to the deformation cells, plus everything to rebuild F."""

    b: np.ndarray            # |S| x |S|, B_ij = sign(u_i) sqrt(|u_i||u_j|) R_ij
    index_set: np.ndarray    # flat grid indices of the deformation cells
    u: np.ndarray            # cell-averaged U on S
    kappa: float
    symmetric: bool          # true when U >= 0 (then B is PSD)

    def top_eigenvalue(self) -> float:
        if self.symmetric:
            return float(np.linalg.eigvalsh(self.b)[-1])
        ev = np.linalg.eigvals(self.b)
        return float(ev[np.argmax(ev.real)].real)

    def eigenvalues(self) -> np.ndarray:
        if self.symmetric:
            return np.linalg.eigvalsh(self.b)
        return np.sort_complex(np.linalg.eigvals(self.b))


def _support_cells(u_grid: np.ndarray, alpha: float) -> np.ndarray:
    """Cells carrying the layer potential, ignoring area-fraction roundoff."""
    return np.nonzero(np.abs(u_grid) > 1e-12 * alpha)[0]


def discrete_bs_matrix(pot: DeformationPotential, kappa: float,
                       fd: DiscreteOperator,
                       solver: Optional[ResolventSolver] = None) -> DiscreteBS:
    """Discrete Birman-Schwinger matrix at spectral parameter -kappa^2.

    B_ij = sign(u_i) sqrt(|u_i| |u_j|) [(H_0 + kappa^2)^{-1}]_ij on the cells
    where the cell-averaged layer potential u is nonzero.  By default the
    straight-strip separability is exploited (banded 1-D solves per transverse
    mode); passing a ResolventSolver forces one sparse solve per column
    instead.  -kappa^2 is an eigenvalue of the discrete deformed operator
    exactly when B has eigenvalue 1.
    """
    if fd.epsilon != 0.0:
        raise ValueError("fd must discretize the straight strip (epsilon = 0)")
    u_grid = pot.grid_u(fd).ravel()
    s = _support_cells(u_grid, pot.well.params.alpha)
    if s.size == 0:
        raise ValueError("zero deformation: no cells with U != 0")
    u = u_grid[s]
    sqrt_u = np.sqrt(np.abs(u))
    if solver is None:
        solver = SeparableResolvent(fd)
    if isinstance(solver, SeparableResolvent):
        r_cols = solver.submatrix(kappa, s)
    else:
        if solver.kappa != kappa:
            raise ValueError("cached resolvent was factorized at a different kappa")
        n = fd.matrix.shape[0]
        r_cols = np.empty((s.size, s.size))
        rhs = np.zeros(n)
        for j, idx in enumerate(s):
            rhs[idx] = 1.0
            r_cols[:, j] = solver.solve(rhs)[s]
            rhs[idx] = 0.0
    b = (np.sign(u)[:, None] * sqrt_u[:, None]) * r_cols * sqrt_u[None, :]
    return DiscreteBS(b=b, index_set=s, u=u, kappa=kappa,
                      symmetric=bool(np.all(u >= 0.0)))


class DiscreteSecular:
    """Cached evaluator of the discrete secular function F(delta).

    Splits B(kappa(delta)) into the rank-one part L carrying the 1/(2 delta)
    singularity (transverse mode times cell weights) and the remainder
    N = B - L, and evaluates

        F = (1 / 2 delta) <w2, (I - N)^{-1} w1> h^2,

    which equals 1 exactly when B has eigenvalue 1.  kappa(delta)^2 =
    delta^2 - mu_1^FD with the grid-consistent transverse threshold mu_1^FD.
    The layer potential, transverse eigenbasis, and separable-resolvent data
    are computed once; each delta costs one small dense solve plus banded
    1-D solves.  The grid should keep L * delta >~ 3 over the bracket, or the
    missing exponential tail inflates the remainder.
    """

    def __init__(self, pot: DeformationPotential, fd: DiscreteOperator):
        if fd.epsilon != 0.0:
            raise ValueError("fd must discretize the straight strip (epsilon = 0)")
        self.pot = pot
        self.fd = fd
        grid = fd.grid
        u_grid = pot.grid_u(fd).ravel()
        self.s = _support_cells(u_grid, pot.well.params.alpha)
        if self.s.size == 0:
            raise ValueError("zero deformation: no cells with U != 0")
        self.u = u_grid[self.s]
        self.solver = SeparableResolvent(fd)
        self.mu1_fd = float(self.solver.t_eigs[0])
        mode = self.solver.t_modes[:, 0].copy()
        mode /= math.sqrt(np.sum(mode**2) * grid.h)
        if mode[np.argmax(np.abs(mode))] < 0:
            mode = -mode
        sqrt_u = np.sqrt(np.abs(self.u))
        self.w2 = sqrt_u * mode[self.s % grid.n2]   # |U|^{1/2} v1 on S
        self.w1 = np.sign(self.u) * self.w2         # sign(U) |U|^{1/2} v1 on S

    def bs_matrix(self, delta: float) -> DiscreteBS:
        kappa = math.sqrt(delta**2 - self.mu1_fd)
        b = ((np.sign(self.u) * np.sqrt(np.abs(self.u)))[:, None]
             * self.solver.submatrix(kappa, self.s)
             * np.sqrt(np.abs(self.u))[None, :])
        return DiscreteBS(b=b, index_set=self.s, u=self.u, kappa=kappa,
                          symmetric=bool(np.all(self.u >= 0.0)))

    def remainder(self, delta: float) -> np.ndarray:
        h2 = self.fd.grid.h**2
        lmat = np.outer(self.w1, self.w2) * (h2 / (2.0 * delta))
        return self.bs_matrix(delta).b - lmat

    def remainder_norm(self, delta: float) -> float:
        return float(np.linalg.norm(self.remainder(delta), 2))

    def f(self, delta: float) -> float:
        if delta <= 0:
            raise ValueError("delta must be positive")
        nmat = self.remainder(delta)
        n_norm = np.linalg.norm(nmat, 2)
        if n_norm >= 1.0:
            raise RuntimeError(
                f"Neumann regime violated: ||N|| = {n_norm:g} >= 1 "
                "(epsilon too large for this delta, or box too short)")
        x = np.linalg.solve(np.eye(len(self.u)) - nmat, self.w1)
        return float(np.dot(self.w2, x)) * self.fd.grid.h**2 / (2.0 * delta)


def secular_function_discrete(pot: DeformationPotential, delta: float,
                              fd: DiscreteOperator) -> float:
    """One-shot F(delta); see DiscreteSecular for the cached form."""
    return DiscreteSecular(pot, fd).f(delta)


def remainder_norm(pot: DeformationPotential, delta: float,
                   fd: DiscreteOperator) -> float:
    """Operator norm of the discrete remainder N = B - L at this delta."""
    return DiscreteSecular(pot, fd).remainder_norm(delta)


# ---------------------------------------------------------------------------
# secular solves
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SecularSolve:
    epsilon: float
    delta_root: float
    bracket: tuple[float, float]
    method: str          # 'leading' | 'discrete-full'
    residual: float      # |F - 1| at the root (0 by construction for leading)
    lambda1: float       # threshold - delta_root^2


def solve_secular(pot: DeformationPotential, fd: Optional[DiscreteOperator],
                  mode: str = "leading", rel_tol: float = 1e-8) -> SecularSolve:
    """Root delta of the secular equation; lambda1 = threshold - delta^2.

    leading: the delta-independent rank-one balance delta = (1/2) int U v_1^2,
    exact in the transverse direction (no expansion in eps).
    discrete-full: bracketed bisection of F(delta) = 1 on the FD grid, bracket
    seeded at delta_hat * [1/4, 4] and widened geometrically up to x64.
    """
    if mode == "leading":
        delta = pot.layer_integral() / 2.0
        if delta <= 0:
            raise BracketError(
                f"no root: rank-one balance gives delta = {delta:g} <= 0")
        return SecularSolve(epsilon=pot.epsilon, delta_root=delta,
                            bracket=(delta, delta), method="leading",
                            residual=0.0,
                            lambda1=pot.well.mu1 - delta**2)
    if mode != "discrete-full":
        raise ValueError(f"unknown mode {mode!r}")
    if fd is None:
        raise ValueError("discrete-full mode needs the straight-strip FD operator")

    dh = predict_delta(pot.well, pot.profile, pot.epsilon)
    sec = DiscreteSecular(pot, fd)
    mu1_fd = sec.mu1_fd

    def g(delta):
        return sec.f(delta) - 1.0

    lo, hi = dh / 4.0, 4.0 * dh
    glo, ghi = g(lo), g(hi)
    width = 4.0
    while glo * ghi > 0.0 and width < 64.0:
        width *= 2.0
        lo, hi = dh / width, width * dh
        glo, ghi = g(lo), g(hi)
    if glo * ghi > 0.0:
        raise BracketError(
            f"no root found: F - 1 has no sign change on [{lo:g}, {hi:g}] "
            f"(F - 1 = {glo:g} .. {ghi:g})")
    bracket = (lo, hi)
    while (hi - lo) > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if gm == 0.0:
            lo = hi = mid
            break
        if glo * gm < 0.0:
            hi, ghi = mid, gm
        else:
            lo, glo = mid, gm
    root = 0.5 * (lo + hi)
    return SecularSolve(epsilon=pot.epsilon, delta_root=root, bracket=bracket,
                        method="discrete-full", residual=abs(g(root)),
                        lambda1=mu1_fd - root**2)
