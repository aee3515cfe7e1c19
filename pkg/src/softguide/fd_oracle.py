"""Finite-difference oracle for the waveguide Hamiltonians.

Discretizes the 1-D auxiliary well and the 2-D deformed-strip operator on
truncated boxes with Dirichlet boundary, using exact per-cell area fractions
of the potential support (the deformation layer is O(eps) thin, so indicator
sampling would alias it entirely).  Provides bottom-of-spectrum eigensolves,
resolvent solves for the Birman-Schwinger machinery, and grid overlaps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import eigsh, lobpcg, splu

from .profiles import Profile, require_admissible
from .well1d import WellParams

# Gauss-Legendre 5 on [-1/2, 1/2]; used to average the boundary graph over a cell
_GL_NODES = np.array([-0.90617984593866399, -0.53846931010568309, 0.0,
                      0.53846931010568309, 0.90617984593866399]) / 2.0
_GL_WEIGHTS = np.array([0.23692688505618909, 0.47862867049936647,
                        0.56888888888888889, 0.47862867049936647,
                        0.23692688505618909]) / 2.0


# ---------------------------------------------------------------------------
# 1-D oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Well1DResult:
    """Negative FD eigenvalues of the 1-D well at step h, h/2, extrapolated."""

    eigs_h: np.ndarray
    eigs_h2: np.ndarray
    eigs_extrapolated: np.ndarray
    count: int
    h: float
    domain: tuple[float, float]


def _interval_fraction(centers: np.ndarray, h: float, lo: float, hi: float) -> np.ndarray:
    """Fraction of each cell [c-h/2, c+h/2] covered by [lo, hi]."""
    left = np.maximum(centers - h / 2.0, lo)
    right = np.minimum(centers + h / 2.0, hi)
    return np.clip(right - left, 0.0, h) / h


def _well_1d_negative_eigs(alpha: float, d: float, lo: float, hi: float,
                           h: float) -> np.ndarray:
    n = int(round((hi - lo) / h)) - 1
    x = lo + h * np.arange(1, n + 1)
    v = -alpha * _interval_fraction(x, h, 0.0, d)
    diag = 2.0 / h**2 + v
    off = np.full(n - 1, -1.0 / h**2)
    try:
        eigs = eigh_tridiagonal(diag, off, select="v",
                                select_range=(-alpha - 1.0, -1e-14),
                                eigvals_only=True)
    except Exception:
        eigs = np.array([])
    return np.sort(eigs)


def solve_1d(params: WellParams, L: float, h: float) -> Well1DResult:
    """All negative eigenvalues of the tridiagonal FD well on [-L, d+L].

    Uses LAPACK Sturm-sequence bisection (eigh_tridiagonal, select='v') at
    steps h and h/2, and Richardson-extrapolates the O(h^2) error away.
    """
    if h <= 0 or L <= 0:
        raise ValueError("need positive L and h")
    lo, hi = -L, params.d + L
    e1 = _well_1d_negative_eigs(params.alpha, params.d, lo, hi, h)
    e2 = _well_1d_negative_eigs(params.alpha, params.d, lo, hi, h / 2.0)
    n = min(len(e1), len(e2))
    extrap = (4.0 * e2[:n] - e1[:n]) / 3.0
    return Well1DResult(eigs_h=e1, eigs_h2=e2, eigs_extrapolated=extrap,
                        count=len(e2), h=h, domain=(lo, hi))


# ---------------------------------------------------------------------------
# 2-D grid and operator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid2D:
    """Uniform Dirichlet grid on [-L, L] x [-H_lo, d + H_hi]; interior nodes only."""

    L: float
    H_lo: float
    H_hi: float
    d: float
    h: float

    def __post_init__(self):
        for name, extent in (("2L", 2 * self.L), ("H_lo", self.H_lo),
                             ("d+H_hi", self.d + self.H_hi)):
            k = extent / self.h
            if abs(k - round(k)) > 1e-9:
                raise ValueError(f"step h must divide extent {name}")

    @property
    def n1(self) -> int:
        return int(round(2 * self.L / self.h)) - 1

    @property
    def n2(self) -> int:
        return int(round((self.H_lo + self.d + self.H_hi) / self.h)) - 1

    @property
    def size(self) -> int:
        return self.n1 * self.n2

    @property
    def x1(self) -> np.ndarray:
        return -self.L + self.h * np.arange(1, self.n1 + 1)

    @property
    def x2(self) -> np.ndarray:
        return -self.H_lo + self.h * np.arange(1, self.n2 + 1)


def make_grid(params: WellParams, kappa1: float, h: float,
              L: Optional[float] = None, H: Optional[float] = None,
              delta_hat: Optional[float] = None,
              length_factor: float = 10.0,
              clearance_factor: float = 10.0) -> Grid2D:
    """Grid with extents tied to the decay rates of the target bound state.

    Longitudinal half-length defaults to max(40 d, length_factor/delta_hat);
    transverse clearance to clearance_factor/sqrt(-mu1) (kappa1 = sqrt(-mu1)).
    Extents are rounded up to multiples of h.
    """
    def round_up(v):
        return math.ceil(v / h - 1e-9) * h

    if L is None:
        L = 40.0 * params.d
        if delta_hat is not None and delta_hat > 0:
            L = max(L, length_factor / delta_hat)
    if H is None:
        H = clearance_factor / kappa1
    return Grid2D(L=round_up(L), H_lo=round_up(H), H_hi=round_up(H),
                  d=params.d, h=h)


@dataclass
class DiscreteOperator:
    """Sparse symmetric FD matrix -Laplacian + V with its grid and potential."""

    matrix: sp.csr_matrix
    grid: Grid2D
    params: WellParams
    frac: np.ndarray  # (n1, n2) area fraction of each cell inside Omega_eps
    epsilon: float
    label: str = ""


def area_fractions(grid: Grid2D, params: WellParams, profile: Optional[Profile],
                   epsilon: float) -> np.ndarray:
    """Exact area fraction of every grid cell inside the deformed strip.

    The upper boundary graph x2 = d + eps*f(x1) is averaged across each cell
    with 5-point Gauss quadrature; vertical overlaps are exact.
    """
    x1, x2 = grid.x1, grid.x2
    h, d = grid.h, grid.d
    if profile is None or epsilon == 0.0:
        col = _interval_fraction(x2, h, 0.0, d)
        return np.tile(col, (grid.n1, 1))
    t = x1[:, None] + h * _GL_NODES[None, :]
    b = d + epsilon * profile(t)  # (n1, 5) boundary heights
    if np.any(b <= 0.0):
        raise ValueError("inadmissible geometry: strip boundary reaches x2 = 0")
    if np.any(b >= grid.d + grid.H_hi - h):
        raise ValueError("deformation reaches the top grid boundary; enlarge H_hi")
    y_lo = x2 - h / 2.0
    y_hi = x2 + h / 2.0
    frac = np.zeros((grid.n1, grid.n2))
    bmin_all = float(b.min())
    # rows entirely inside the strip for every column
    full = (y_lo >= 0.0) & (y_hi <= bmin_all)
    frac[:, full] = 1.0
    # bottom edge rows (x2 = 0 cuts the cell); boundary graph is far above
    bottom = (y_lo < 0.0) & (y_hi > 0.0) & (y_hi <= bmin_all)
    frac[:, bottom] = (y_hi[bottom] / h)[None, :]
    # band of rows crossed by the boundary graph somewhere
    band = np.nonzero(y_hi > bmin_all)[0]
    band = band[y_lo[band] < float(b.max())]
    if band.size:
        ylo_b = np.maximum(y_lo[band], 0.0)
        over = np.clip(b[:, None, :] - ylo_b[None, :, None], 0.0, h) / h
        frac[:, band] = np.einsum("ijg,g->ij", over, _GL_WEIGHTS)
    return frac


def build_h2d(params: WellParams, profile: Optional[Profile], epsilon: float,
              grid: Grid2D, assemble: bool = True) -> DiscreteOperator:
    """5-point FD matrix of -Laplacian - alpha*chi_{Omega_eps} on the grid.

    assemble=False skips the sparse matrix (matrix is None) for consumers that
    only need the grid, potential fractions, and separable resolvent — useful
    when the box is far longer than any eigensolve could afford.
    """
    if profile is not None and epsilon > 0.0:
        require_admissible(profile, params.d, epsilon)
    frac = area_fractions(grid, params, profile, epsilon)
    if not assemble:
        return DiscreteOperator(matrix=None, grid=grid, params=params,
                                frac=frac, epsilon=epsilon,
                                label=f"H(alpha={params.alpha:g}, eps={epsilon:g})")
    h = grid.h
    lap1 = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1],
                    shape=(grid.n1, grid.n1)) / h**2
    lap2 = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1],
                    shape=(grid.n2, grid.n2)) / h**2
    a = sp.kron(lap1, sp.identity(grid.n2)) + sp.kron(sp.identity(grid.n1), lap2)
    a = a + sp.diags((-params.alpha * frac).ravel())
    return DiscreteOperator(matrix=a.tocsr(), grid=grid, params=params,
                            frac=frac, epsilon=epsilon,
                            label=f"H(alpha={params.alpha:g}, eps={epsilon:g})")


def transverse_threshold(params: WellParams, grid: Grid2D) -> float:
    """Bottom of the x2-factor of the straight-strip FD operator.

    This is the discrete analogue of mu_1 for the grid at hand: the essential
    spectrum of the x1-infinite discrete operator starts here, free of the
    (pi/2L)^2 longitudinal-box artifact.
    """
    x2 = grid.x2
    h = grid.h
    v = -params.alpha * _interval_fraction(x2, h, 0.0, grid.d)
    diag = 2.0 / h**2 + v
    off = np.full(grid.n2 - 1, -1.0 / h**2)
    eigs = eigh_tridiagonal(diag, off, select="i", select_range=(0, 0),
                            eigvals_only=True)
    return float(eigs[0])


def box_mode_energy(grid: Grid2D, index: int = 1) -> float:
    """index-th Dirichlet eigenvalue of the discrete 1-D Laplacian on [-L, L]."""
    n = grid.n1
    return 2.0 * (1.0 - math.cos(index * math.pi / (n + 1))) / grid.h**2


def free_bottom(params: WellParams, grid: Grid2D) -> float:
    """Exact lowest eigenvalue of the straight-strip FD operator on the box."""
    return transverse_threshold(params, grid) + box_mode_energy(grid)


# ---------------------------------------------------------------------------
# eigensolves
# ---------------------------------------------------------------------------

@dataclass
class SpectralResult:
    eigenvalues: np.ndarray          # all below threshold, ascending
    eigenvectors: np.ndarray         # columns, grid-normalized sum v^2 h^2 = 1
    residuals: np.ndarray
    threshold: float
    diagnostics: dict = field(default_factory=dict)
    truncation_estimate: Optional[float] = None


# Shift-invert LU fill scales like n * bandwidth (5-point kron ordering);
# beyond this estimate the factorization no longer fits in memory.
_DIRECT_FILL_LIMIT = 3.0e8


def lowest_eigs(op: DiscreteOperator, threshold: float, k_max: int = 3,
                rtol: float = 1e-8, maxiter: int = 2000,
                seed: int = 0, sigma: Optional[float] = None) -> SpectralResult:
    """Eigenpairs of the FD operator below `threshold`.

    Small problems use ARPACK shift-invert; large ones use AMG-preconditioned
    LOBPCG on the positively shifted matrix.  The block is grown until at
    least one returned eigenvalue clears the threshold, so no state below it
    can be missed (up to k_max).

    `sigma` is the shift-invert target.  On a long box the spectrum just above
    `threshold` is a dense cluster of longitudinal box modes spaced by
    ~(pi/2L)^2, so a shift inside that cluster stalls Lanczos; callers that
    know where the bound state sits should place sigma just below it.  The
    default sits a small fixed distance under the threshold, which is fine for
    compact boxes.
    """
    a = op.matrix
    n = a.shape[0]
    if sigma is None:
        sigma = threshold - 1e-2 * max(1.0, abs(threshold))
    # absolute residual scale: inf-norm bound of the operator
    scale = float(np.abs(a).sum(axis=1).max())
    k = min(max(k_max, 1) + 2, n - 2)
    diagnostics = {"n": n, "sigma": sigma}
    bandwidth = min(op.grid.n1, op.grid.n2)
    while True:
        if n * bandwidth <= _DIRECT_FILL_LIMIT:
            diagnostics["method"] = "arpack-shift-invert"
            vals, vecs = eigsh(a, k=k, sigma=sigma, which="LM")
        else:
            diagnostics["method"] = "lobpcg-amg"
            vals, vecs = _lobpcg_lowest(a, op.params.alpha, k,
                                        max(rtol, 1e-8) * scale, maxiter, seed)
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        below = vals < threshold
        if below.sum() < len(vals) or k >= min(n - 2, k_max + 6):
            break
        k += 2  # every returned value was below threshold; widen the block
    keep = np.nonzero(vals < threshold)[0][:k_max]
    vals, vecs = vals[keep], vecs[:, keep]
    res = np.array([
        np.linalg.norm(a @ vecs[:, i] - vals[i] * vecs[:, i])
        / np.linalg.norm(vecs[:, i]) for i in range(vecs.shape[1])
    ])
    if np.any(res > max(rtol, 1e-8) * scale):
        raise RuntimeError(
            f"eigensolver failed to converge: residuals {res} exceed tolerance")
    vecs = vecs / np.sqrt(np.sum(vecs**2, axis=0) * op.grid.h**2)[None, :]
    diagnostics["k_used"] = k
    return SpectralResult(eigenvalues=vals, eigenvectors=vecs, residuals=res,
                          threshold=threshold, diagnostics=diagnostics)


def _lobpcg_lowest(a: sp.csr_matrix, alpha: float, k: int, tol: float,
                   maxiter: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    import pyamg

    shift = alpha + 1.0
    a_pos = (a + shift * sp.identity(a.shape[0], format="csr")).tocsr()
    ml = pyamg.smoothed_aggregation_solver(a_pos, max_coarse=400)
    m = ml.aspreconditioner()
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((a.shape[0], k))
    vals, vecs = lobpcg(a_pos, x, M=m, tol=0.5 * tol, maxiter=maxiter,
                        largest=False)
    return vals - shift, vecs


# ---------------------------------------------------------------------------
# resolvent and overlaps
# ---------------------------------------------------------------------------

class ResolventSolver:
    """Direct solver for (H_0^FD + kappa^2) x = rhs with a cached factorization."""

    def __init__(self, op: DiscreteOperator, kappa: float):
        bottom = free_bottom(op.params, op.grid)
        if kappa**2 <= -bottom:
            raise ValueError(
                f"indefinite shift: kappa^2 = {kappa**2:g} <= -bottom = {-bottom:g}")
        self.op = op
        self.kappa = kappa
        n = op.matrix.shape[0]
        self._lu = splu((op.matrix + kappa**2 * sp.identity(n)).tocsc())

    def solve(self, rhs: np.ndarray, check: bool = True) -> np.ndarray:
        x = self._lu.solve(rhs)
        if check:
            shifted = self.op.matrix @ x + self.kappa**2 * x
            denom = np.linalg.norm(rhs)
            if denom > 0:
                rel = np.linalg.norm(shifted - rhs) / denom
                if np.max(np.atleast_1d(rel)) > 1e-10:
                    raise RuntimeError(f"resolvent solve residual {rel:g} > 1e-10")
        return x


def resolvent_solve(op: DiscreteOperator, kappa: float, rhs: np.ndarray) -> np.ndarray:
    return ResolventSolver(op, kappa).solve(rhs)


class SeparableResolvent:
    """Resolvent entries of the straight-strip operator via x2-diagonalization.

    The epsilon = 0 potential depends on x2 only, so the FD matrix separates:
    H_0 = L1 (x) I + I (x) T with T the transverse tridiagonal factor.
    Diagonalizing T turns every resolvent column into a family of banded 1-D
    solves, avoiding the 2-D sparse factorization entirely; the result agrees
    with the direct solver to machine precision.
    """

    def __init__(self, op: DiscreteOperator):
        if op.epsilon != 0.0:
            raise ValueError("separable resolvent requires the straight strip")
        grid = op.grid
        h = grid.h
        v = -op.params.alpha * _interval_fraction(grid.x2, h, 0.0, grid.d)
        diag = 2.0 / h**2 + v
        off = np.full(grid.n2 - 1, -1.0 / h**2)
        from scipy.linalg import eigh_tridiagonal as _eigt
        self.t_eigs, self.t_modes = _eigt(diag, off)
        self.op = op
        self.grid = grid

    def submatrix(self, kappa: float, idx: np.ndarray) -> np.ndarray:
        """[(H_0 + kappa^2)^{-1}]_{idx, idx} for flat grid indices idx.

        The longitudinal factor is the Toeplitz Dirichlet Laplacian, whose
        resolvent entries are hyperbolic-sine Green's functions; together with
        the transverse eigenbasis every entry is closed-form, so the cost is
        O(n2 |idx|^2) independent of the box length.
        """
        grid = self.grid
        n1, n2, h = grid.n1, grid.n2, grid.h
        ell1 = box_mode_energy(grid)
        if kappa**2 + self.t_eigs[0] + ell1 <= 0.0:
            raise ValueError(
                f"indefinite shift: kappa^2 = {kappa**2:g} <= "
                f"-bottom = {-(self.t_eigs[0] + ell1):g}")
        idx = np.asarray(idx, dtype=int)
        i1, i2 = idx // n2, idx % n2
        amp = self.t_modes[i2, :]           # (|S|, n2) transverse amplitudes
        q = i1 + 1                          # 1-based longitudinal positions
        qa, qb = q[:, None], q[None, :]
        lo, hi = np.minimum(qa, qb), np.maximum(qa, qb)
        r = np.zeros((idx.size, idx.size))
        for m, tm in enumerate(self.t_eigs):
            c = (kappa**2 + tm) * h**2
            # Green's function of tridiag(-1, 2+c, -1) with Dirichlet ends.
            if c > 0.0:
                theta = 2.0 * math.asinh(math.sqrt(c) / 2.0)  # cosh th = 1 + c/2
                # G_ij = sinh(th lo) sinh(th (n+1-hi)) / (sinh th sinh(th (n+1)))
                # in overflow-safe exponentials:
                g = (np.exp(-theta * (hi - lo))
                     * (1.0 - np.exp(-2.0 * theta * lo))
                     * (1.0 - np.exp(-2.0 * theta * (n1 + 1 - hi)))
                     / (2.0 * math.sinh(theta)
                        * (1.0 - math.exp(-2.0 * theta * (n1 + 1)))))
            elif c == 0.0:
                g = lo * (n1 + 1 - hi) / (n1 + 1)
            else:
                # oscillatory branch, reachable only above the box ground mode
                theta = 2.0 * math.asin(math.sqrt(-c) / 2.0)
                g = (np.sin(theta * lo) * np.sin(theta * (n1 + 1 - hi))
                     / (math.sin(theta) * math.sin(theta * (n1 + 1))))
            r += (amp[:, m, None] * amp[None, :, m]) * (h**2 * g)
        return r


def overlap(result: SpectralResult, grid: Grid2D,
            analytic_field: Callable[[np.ndarray, np.ndarray], np.ndarray],
            which: int = 0) -> float:
    """|<psi_FD, u>| for grid-normalized vectors; in [0, 1].

    analytic_field(x1_array, x2_array) must return the (n1, n2) sample array.
    """
    if result.eigenvectors.shape[1] <= which:
        raise ValueError("no eigenvector available for overlap")
    psi = result.eigenvectors[:, which]
    u = np.asarray(analytic_field(grid.x1, grid.x2), dtype=float).ravel()
    nu = np.linalg.norm(u)
    if nu == 0:
        raise ValueError("analytic field vanishes on the grid")
    return float(abs(np.dot(psi, u)) * grid.h**2
                 / (np.linalg.norm(psi) * nu * grid.h**2))
