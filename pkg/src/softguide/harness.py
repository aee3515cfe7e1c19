"""Sweep orchestration: config parsing, per-epsilon runs, fitting, persistence.

The config format is flat `key = value` text with [section] headers mapping to
dotted keys.  Results go to <output.dir>/results.csv (schema=1, 17-significant-
digit floats), a results.json mirror with the identical numeric payload, and
best-effort SVG plots.  Re-running an identical config is idempotent: rows
whose config hash matches are kept as-is and their epsilons skipped.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from . import asymptotics, bs_core, fd_oracle
from .profiles import Profile, make_profile, moments, require_admissible
from .well1d import WellParams, WellSpectrum, solve_well


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def _parse_scalar(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def _parse_value(text: str):
    text = text.strip()
    if "," in text:
        return [_parse_scalar(p) for p in text.split(",") if p.strip()]
    return _parse_scalar(text)


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Flat key-value config with [section] headers -> dict of dotted keys."""
    out: dict = {}
    section = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if not section:
                raise ConfigError(f"{source}:{lineno}: empty section header")
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        full = f"{section}.{key}" if section else key
        out[full] = _parse_value(value)
    return out


def load_config(path: str, overrides: Optional[list[str]] = None) -> dict:
    try:
        with open(path) as fh:
            cfg = parse_config_text(fh.read(), source=path)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set needs key=value, got {item!r}")
        key, value = item.split("=", 1)
        cfg[key.strip()] = _parse_value(value)
    return cfg


def _as_list(value) -> list:
    if isinstance(value, list):
        return value
    return [value]


_KNOWN_MODES = ("predict", "fd", "bs-leading", "bs-full", "critical")


@dataclass
class RunConfig:
    alpha: float
    d: float
    profile: Profile
    epsilons: list[float]
    modes: list[str]
    h: float = 0.1
    length_factor: float = 6.0
    bs_length_factor: float = 14.0
    clearance: float = 5.0
    l_override: Optional[float] = None
    out_dir: str = "out"
    dump_eigenvector: Optional[str] = None
    alphas: list[float] = field(default_factory=list)
    trial_lambda: Optional[float] = None

    @classmethod
    def from_dict(cls, cfg: dict) -> "RunConfig":
        try:
            alpha = float(cfg["well.alpha"])
            d = float(cfg["well.d"])
        except KeyError as exc:
            raise ConfigError(f"missing required key {exc.args[0]}") from exc
        kind = cfg.get("profile.kind", "triangle")
        pparams = {}
        for key, val in cfg.items():
            if key.startswith("profile.") and key != "profile.kind":
                name = key.split(".", 1)[1]
                pparams[name] = [float(v) for v in val] if isinstance(val, list) else val
        try:
            profile = make_profile(kind, **pparams)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad profile block: {exc}") from exc
        if "profile.dilate" in cfg:
            from .profiles import dilate
            profile = dilate(profile, float(cfg["profile.dilate"]))
        if cfg.get("profile.negate"):
            from .profiles import negate
            profile = negate(profile)
        eps = [float(e) for e in _as_list(cfg.get("sweep.epsilons", [0.05, 0.1, 0.15, 0.2]))]
        if not eps:
            raise ConfigError("sweep.epsilons must be a non-empty list")
        if any(e <= 0 for e in eps) or sorted(eps) != eps:
            raise ConfigError("sweep.epsilons must be positive and ascending")
        for e in eps:
            m = moments(profile)
            if d + e * m.min_f <= 0:
                raise ConfigError(f"epsilon = {e:g} is inadmissible for this profile")
        modes = [str(m) for m in _as_list(cfg.get("sweep.modes", ["predict"]))]
        for m in modes:
            if m not in _KNOWN_MODES:
                raise ConfigError(f"unknown sweep mode {m!r} (choose from {_KNOWN_MODES})")
        tl = cfg.get("critical.lambda")
        return cls(
            alpha=alpha, d=d, profile=profile, epsilons=eps, modes=modes,
            h=float(cfg.get("grid.h", 0.1)),
            length_factor=float(cfg.get("grid.length_factor", 6.0)),
            bs_length_factor=float(cfg.get("grid.bs_length_factor", 14.0)),
            clearance=float(cfg.get("grid.clearance", 5.0)),
            l_override=float(cfg["grid.L"]) if "grid.L" in cfg else None,
            out_dir=str(cfg.get("output.dir", "out")),
            alphas=[float(a) for a in _as_list(cfg.get("dirichlet.alphas", []))],
            trial_lambda=float(tl) if tl not in (None, "auto") else None,
        )

    def config_hash(self) -> str:
        m = moments(self.profile)
        payload = json.dumps({
            "alpha": self.alpha, "d": self.d,
            "profile": [self.profile.kind, self.profile.support, m.i1, m.i2],
            "epsilons": self.epsilons, "modes": self.modes,
            "h": self.h, "length_factor": self.length_factor,
            "bs_length_factor": self.bs_length_factor,
            "clearance": self.clearance, "L": self.l_override,
        }, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------

_CSV_COLUMNS = [
    "epsilon", "status", "lambda1_pred", "delta_hat", "delta_leading",
    "lambda1_leading", "delta_full", "lambda1_full", "lambda1_fd",
    "fd_threshold", "fd_count", "overlap", "u_norm", "u_norm_leading",
    "trial_energy", "seconds",
]


@dataclass
class SweepRecord:
    epsilon: float
    status: str = "ok"
    lambda1_pred: float = math.nan
    delta_hat: float = math.nan
    delta_leading: float = math.nan
    lambda1_leading: float = math.nan
    delta_full: float = math.nan
    lambda1_full: float = math.nan
    lambda1_fd: float = math.nan
    fd_threshold: float = math.nan
    fd_count: int = -1
    overlap: float = math.nan
    u_norm: float = math.nan
    u_norm_leading: float = math.nan
    trial_energy: float = math.nan
    seconds: float = 0.0

    def row(self) -> list[str]:
        out = []
        for col in _CSV_COLUMNS:
            val = getattr(self, col)
            if isinstance(val, str):
                out.append(val)
            elif isinstance(val, int):
                out.append(str(val))
            else:
                out.append(format(float(val), ".17g"))
        return out

    @classmethod
    def from_row(cls, row: list[str]) -> "SweepRecord":
        kwargs = {}
        for col, text in zip(_CSV_COLUMNS, row):
            if col == "status":
                kwargs[col] = text
            elif col == "fd_count":
                kwargs[col] = int(text)
            else:
                kwargs[col] = float(text)
        return cls(**kwargs)


@dataclass(frozen=True)
class FitResult:
    c0: float
    c1: float
    c0_stderr: float
    target: float
    deviation: float  # signed relative deviation (c0 - target) / target
    n_points: int


def fit_coefficient(eps: np.ndarray, coeff: np.ndarray, target: float) -> FitResult:
    """Least-squares line c(eps) = c0 + c1*eps; compare intercept to target."""
    eps = np.asarray(eps, dtype=float)
    coeff = np.asarray(coeff, dtype=float)
    keep = np.isfinite(coeff)
    eps, coeff = eps[keep], coeff[keep]
    if len(eps) < 3:
        raise ValueError("coefficient fit needs at least 3 points")
    a = np.column_stack([np.ones_like(eps), eps])
    sol, res, _, _ = np.linalg.lstsq(a, coeff, rcond=None)
    c0, c1 = sol
    dof = len(eps) - 2
    if dof > 0 and len(res):
        sigma2 = res[0] / dof
        cov = sigma2 * np.linalg.inv(a.T @ a)
        stderr = math.sqrt(cov[0, 0])
    else:
        stderr = 0.0
    return FitResult(c0=float(c0), c1=float(c1), c0_stderr=stderr, target=target,
                     deviation=(c0 - target) / target if target != 0 else math.inf,
                     n_points=len(eps))


# ---------------------------------------------------------------------------
# numeric building blocks shared by sweep modes, tests, and the CLI
# ---------------------------------------------------------------------------

def eigengrid(rc: RunConfig, well: WellSpectrum, epsilon: float,
              length_factor: Optional[float] = None) -> fd_oracle.Grid2D:
    """Eigensolve grid: box length tied to the predicted decay rate."""
    m = moments(rc.profile)
    dh = None
    if m.i1 > 0:
        dh = asymptotics.predict_delta(well, rc.profile, epsilon)
    lf = rc.length_factor if length_factor is None else length_factor
    L = rc.l_override
    if L is None:
        L = 40.0 * rc.d
        if dh is not None:
            L = max(L, lf / dh)
    hclear = rc.clearance + epsilon * max(m.max_f, 0.0)
    return fd_oracle.Grid2D(
        L=math.ceil(L / rc.h) * rc.h,
        H_lo=math.ceil(rc.clearance / rc.h) * rc.h,
        H_hi=math.ceil(hclear / rc.h) * rc.h,
        d=rc.d, h=rc.h)


def fd_ground(rc: RunConfig, well: WellSpectrum, epsilon: float,
              grid: Optional[fd_oracle.Grid2D] = None,
              k_max: int = 3) -> tuple[fd_oracle.SpectralResult, float, fd_oracle.Grid2D]:
    """Lowest FD eigenpairs of the deformed operator plus the grid threshold.

    The eigensolver threshold sits above the free-box bottom so the ground
    state is always captured, even in the no-bound-state regime; counting
    against the transverse threshold happens downstream.
    """
    if grid is None:
        grid = eigengrid(rc, well, epsilon)
    params = WellParams(alpha=rc.alpha, d=rc.d)
    op = fd_oracle.build_h2d(params, rc.profile, epsilon, grid)
    mu1h = fd_oracle.transverse_threshold(params, grid)
    ell1 = fd_oracle.box_mode_energy(grid)
    thr = mu1h + 3.0 * ell1 + 1e-12
    # place the shift just below where the ground state can sit: binding depth
    # ~delta_hat^2 in the attractive regime, a box-mode spacing otherwise
    m = moments(rc.profile)
    depth = 2.0 * ell1
    if m.i1 > 0:
        depth = max(depth, 2.0 * asymptotics.predict_delta(well, rc.profile, epsilon)**2)
    res = fd_oracle.lowest_eigs(op, thr, k_max=k_max, sigma=mu1h - depth)
    return res, mu1h, grid


def count_below(res: fd_oracle.SpectralResult, threshold: float) -> int:
    return int(np.sum(res.eigenvalues < threshold))


# ---------------------------------------------------------------------------
# sweep driver
# ---------------------------------------------------------------------------

def run_epsilon(rc: RunConfig, well: WellSpectrum, epsilon: float) -> SweepRecord:
    """Execute every requested mode for one epsilon."""
    rec = SweepRecord(epsilon=epsilon)
    t0 = time.time()
    m = moments(rc.profile)
    try:
        if "predict" in rc.modes:
            pred = asymptotics.predict_lambda1(well, rc.profile, epsilon)
            rec.lambda1_pred = pred.value
            if m.i1 > 0:
                rec.delta_hat = asymptotics.predict_delta(well, rc.profile, epsilon)
        if "bs-leading" in rc.modes or "bs-full" in rc.modes:
            pot = bs_core.DeformationPotential(well, rc.profile, epsilon)
            if "bs-leading" in rc.modes:
                try:
                    lead = bs_core.solve_secular(pot, None, mode="leading")
                    rec.delta_leading = lead.delta_root
                    rec.lambda1_leading = lead.lambda1
                except bs_core.BracketError:
                    pass  # no root: absence regime, fields stay NaN
            if "bs-full" in rc.modes:
                grid = eigengrid(rc, well, epsilon,
                                 length_factor=rc.bs_length_factor)
                params = WellParams(alpha=rc.alpha, d=rc.d)
                h0 = fd_oracle.build_h2d(params, None, 0.0, grid, assemble=False)
                try:
                    full = bs_core.solve_secular(pot, h0, mode="discrete-full")
                    rec.delta_full = full.delta_root
                    rec.lambda1_full = full.lambda1
                except bs_core.BracketError:
                    pass
        if "fd" in rc.modes:
            res, mu1h, grid = fd_ground(rc, well, epsilon)
            rec.fd_threshold = mu1h
            rec.fd_count = count_below(res, mu1h)
            if len(res.eigenvalues):
                rec.lambda1_fd = float(res.eigenvalues[0])
            if m.i1 > 0 and rec.fd_count >= 1:
                u = asymptotics.LeadingEigenfunction(well, rc.profile, epsilon)
                rec.overlap = fd_oracle.overlap(res, grid, u)
                rec.u_norm = u.norm()
                rec.u_norm_leading = u.norm_leading()
        if "critical" in rc.modes:
            lam = rc.trial_lambda
            if lam is None:
                lam = asymptotics.optimal_lambda(well)
            te = asymptotics.trial_energy(well, rc.profile, lam, epsilon)
            rec.trial_energy = te.j_exact
    except Exception as exc:  # noqa: BLE001 - a failed row must not kill the sweep
        rec.status = f"failed: {type(exc).__name__}: {exc}"
    rec.seconds = time.time() - t0
    return rec


def _read_existing(csv_path: str, cfg_hash: str) -> dict[float, SweepRecord]:
    if not os.path.exists(csv_path):
        return {}
    with open(csv_path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("# schema=1"):
        return {}
    if f"config={cfg_hash}" not in lines[0]:
        return {}
    done = {}
    for line in lines[2:]:
        if not line.strip():
            continue
        rec = SweepRecord.from_row(line.split(","))
        if not rec.status.startswith("failed"):
            done[rec.epsilon] = rec
    return done


def _write_results(rc: RunConfig, cfg_hash: str,
                   records: list[SweepRecord]) -> None:
    os.makedirs(rc.out_dir, exist_ok=True)
    csv_path = os.path.join(rc.out_dir, "results.csv")
    with open(csv_path, "w") as fh:
        fh.write(f"# schema=1 config={cfg_hash}\n")
        fh.write(",".join(_CSV_COLUMNS) + "\n")
        for rec in records:
            fh.write(",".join(rec.row()) + "\n")
    payload = {
        "schema": 1,
        "config": cfg_hash,
        "columns": _CSV_COLUMNS,
        "rows": [dict(zip(_CSV_COLUMNS, rec.row())) for rec in records],
    }
    with open(os.path.join(rc.out_dir, "results.json"), "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def run(rc: RunConfig) -> tuple[list[SweepRecord], int]:
    """Run the sweep; returns records and an exit code (0 ok, 3 all failed)."""
    well = solve_well(WellParams(alpha=rc.alpha, d=rc.d))
    cfg_hash = rc.config_hash()
    csv_path = os.path.join(rc.out_dir, "results.csv")
    done = _read_existing(csv_path, cfg_hash)
    records: list[SweepRecord] = []
    for eps in rc.epsilons:
        if eps in done:
            records.append(done[eps])
        else:
            records.append(run_epsilon(rc, well, eps))
        _write_results(rc, cfg_hash, records)
    _plot_coefficient(rc, well, records)
    failed = sum(1 for r in records if r.status.startswith("failed"))
    return records, (3 if failed == len(records) else 0)


def _plot_coefficient(rc: RunConfig, well: WellSpectrum,
                      records: list[SweepRecord]) -> None:
    try:
        pred = asymptotics.predict(well, rc.profile)
        target = pred.eps2_coefficient
        pts = [(r.epsilon, (well.mu1 - r.lambda1_fd) / r.epsilon**2)
               for r in records if math.isfinite(r.lambda1_fd)]
        pts_grid = [(r.epsilon, (r.fd_threshold - r.lambda1_fd) / r.epsilon**2)
                    for r in records
                    if math.isfinite(r.lambda1_fd) and math.isfinite(r.fd_threshold)]
        if not pts:
            return
        series = [("measured", pts)]
        if pts_grid:
            series.append(("grid-threshold", pts_grid))
        xs = [p[0] for p in pts]
        series.append(("target", [(min(xs), target), (max(xs), target)]))
        write_svg(os.path.join(rc.out_dir, "plots", "coeff.svg"), series,
                  title="binding-energy coefficient vs epsilon",
                  xlabel="epsilon", ylabel="(mu1 - lambda1)/eps^2")
    except Exception:  # noqa: BLE001 - plots are best-effort, never gate
        pass


# ---------------------------------------------------------------------------
# hard-wall comparison table
# ---------------------------------------------------------------------------

def compare_dirichlet(rc: RunConfig) -> list[asymptotics.CoefficientLimitRow]:
    if not rc.alphas:
        raise ConfigError("compare-dirichlet needs dirichlet.alphas")
    if sorted(rc.alphas) != rc.alphas:
        raise ConfigError("dirichlet.alphas must be ascending")
    rows = asymptotics.coefficient_limit_check(rc.alphas, rc.d, rc.profile)
    try:
        series = [("coefficient ratio", [(math.log10(r.alpha), r.ratio) for r in rows])]
        write_svg(os.path.join(rc.out_dir, "plots", "dirichlet.svg"), series,
                  title="soft/hard-wall coefficient ratio",
                  xlabel="log10 alpha", ylabel="ratio")
    except Exception:  # noqa: BLE001
        pass
    return rows


# ---------------------------------------------------------------------------
# minimal SVG plotting (no plotting dependency)
# ---------------------------------------------------------------------------

_SVG_COLORS = ["#1f6fb2", "#c2502a", "#3a8f4d", "#7a4fa3", "#777777"]


def write_svg(path: str, series: list[tuple[str, list[tuple[float, float]]]],
              title: str = "", xlabel: str = "", ylabel: str = "",
              width: int = 640, height: int = 440) -> None:
    """Scatter/line chart with axes and a legend, written as bare SVG."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    pts_all = [p for _, pts in series for p in pts if math.isfinite(p[1])]
    if not pts_all:
        raise ValueError("nothing to plot")
    xs = [p[0] for p in pts_all]
    ys = [p[1] for p in pts_all]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    padx, pady = 0.06 * (x1 - x0), 0.08 * (y1 - y0)
    x0, x1, y0, y1 = x0 - padx, x1 + padx, y0 - pady, y1 + pady
    ml, mr, mt, mb = 70, 20, 40, 50

    def sx(x):
        return ml + (x - x0) / (x1 - x0) * (width - ml - mr)

    def sy(y):
        return height - mb - (y - y0) / (y1 - y0) * (height - mt - mb)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width/2:.0f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
        f'<text x="{width/2:.0f}" y="{height-10}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{xlabel}</text>',
        f'<text x="15" y="{height/2:.0f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 15 {height/2:.0f})">{ylabel}</text>',
        f'<line x1="{ml}" y1="{height-mb}" x2="{width-mr}" y2="{height-mb}" '
        'stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{height-mb}" stroke="black"/>',
    ]
    for k in range(5):
        xv = x0 + (x1 - x0) * k / 4
        yv = y0 + (y1 - y0) * k / 4
        parts.append(f'<text x="{sx(xv):.1f}" y="{height-mb+16}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="10">{xv:.3g}</text>')
        parts.append(f'<text x="{ml-6}" y="{sy(yv)+3:.1f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="10">{yv:.3g}</text>')
    for si, (name, pts) in enumerate(series):
        color = _SVG_COLORS[si % len(_SVG_COLORS)]
        coords = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in pts
                          if math.isfinite(y))
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                     'stroke-width="1.5"/>')
        for x, y in pts:
            if math.isfinite(y):
                parts.append(f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="3" '
                             f'fill="{color}"/>')
        parts.append(f'<text x="{width-mr-5}" y="{mt+14*si+12}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11" '
                     f'fill="{color}">{name}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def dump_eigenvector(path: str, res: fd_oracle.SpectralResult,
                     grid: fd_oracle.Grid2D, which: int = 0) -> None:
    """Eigenvector as CSV rows x1, x2, value."""
    if res.eigenvectors.shape[1] <= which:
        raise ValueError("no eigenvector to dump")
    v = res.eigenvectors[:, which].reshape(grid.n1, grid.n2)
    with open(path, "w") as fh:
        fh.write("x1,x2,value\n")
        for i, x1 in enumerate(grid.x1):
            for j, x2 in enumerate(grid.x2):
                fh.write(f"{x1:.17g},{x2:.17g},{v[i, j]:.17g}\n")
