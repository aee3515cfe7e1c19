"""Command-line front end.

Exit codes: 0 success, 2 config error, 3 numerical failure in every
requested row.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys

from . import asymptotics, bs_core, fd_oracle, harness
from .harness import ConfigError, RunConfig, load_config
from .profiles import moments
from .well1d import WellParams, solve_well


def _well_json(alpha: float, d: float) -> dict:
    spec = solve_well(WellParams(alpha=alpha, d=d))
    return {
        "alpha": alpha,
        "d": d,
        "count": spec.count,
        "modes": [
            {
                "index": m.index,
                "mu": m.mu,
                "k_in": m.k_in,
                "kappa": m.kappa,
                "parity": m.parity,
                "norm_const": m.norm_const,
                "value_at_edge": m.value_at_edge,
            }
            for m in spec.modes
        ],
    }


def _load_run_config(args) -> RunConfig:
    cfg = load_config(args.config, args.set or [])
    rc = RunConfig.from_dict(cfg)
    if getattr(args, "dump_eigenvector", None):
        rc.dump_eigenvector = args.dump_eigenvector
    return rc


def _cmd_well(args) -> int:
    print(json.dumps(_well_json(args.alpha, args.d), indent=1))
    return 0


def _cmd_predict(args) -> int:
    rc = _load_run_config(args)
    well = solve_well(WellParams(alpha=rc.alpha, d=rc.d))
    pred = asymptotics.predict(well, rc.profile)
    out = dataclasses.asdict(pred)
    out["per_epsilon"] = [
        {"epsilon": e,
         "lambda1": asymptotics.predict_lambda1(well, rc.profile, e).value,
         "delta_hat": (asymptotics.predict_delta(well, rc.profile, e)
                       if moments(rc.profile).i1 > 0 else None)}
        for e in rc.epsilons
    ]
    print(json.dumps(out, indent=1))
    return 0


def _cmd_critical(args) -> int:
    rc = _load_run_config(args)
    well = solve_well(WellParams(alpha=rc.alpha, d=rc.d))
    check = asymptotics.critical_check(well, rc.profile)
    lam = rc.trial_lambda or asymptotics.optimal_lambda(well)
    rows = []
    failures = 0
    for e in rc.epsilons:
        try:
            te = asymptotics.trial_energy(well, rc.profile, lam, e)
            rows.append({"epsilon": e, "lambda": lam, "trial_energy": te.j_exact,
                         "quadratic_coeff": te.j_quadratic_coeff})
        except Exception as exc:  # noqa: BLE001
            rows.append({"epsilon": e, "error": str(exc)})
            failures += 1
    print(json.dumps({"check": dataclasses.asdict(check), "rows": rows}, indent=1))
    return 3 if rows and failures == len(rows) else 0


def _cmd_compare_dirichlet(args) -> int:
    rc = _load_run_config(args)
    rows = harness.compare_dirichlet(rc)
    print(json.dumps([dataclasses.asdict(r) for r in rows], indent=1))
    return 0


def _cmd_fd_solve(args) -> int:
    rc = _load_run_config(args)
    well = solve_well(WellParams(alpha=rc.alpha, d=rc.d))
    rows = []
    failures = 0
    for e in rc.epsilons:
        try:
            res, mu1h, grid = harness.fd_ground(rc, well, e)
            row = {
                "epsilon": e,
                "threshold": mu1h,
                "eigenvalues": [float(v) for v in res.eigenvalues],
                "count_below_threshold": harness.count_below(res, mu1h),
                "method": res.diagnostics.get("method"),
            }
            if rc.dump_eigenvector and len(res.eigenvalues):
                path = rc.dump_eigenvector
                if len(rc.epsilons) > 1:
                    root, ext = os.path.splitext(path)
                    path = f"{root}-eps{e:g}{ext or '.csv'}"
                harness.dump_eigenvector(path, res, grid)
                row["eigenvector_csv"] = path
            rows.append(row)
        except Exception as exc:  # noqa: BLE001
            rows.append({"epsilon": e, "error": f"{type(exc).__name__}: {exc}"})
            failures += 1
    print(json.dumps(rows, indent=1))
    return 3 if failures == len(rows) else 0


def _cmd_bs_solve(args) -> int:
    rc = _load_run_config(args)
    well = solve_well(WellParams(alpha=rc.alpha, d=rc.d))
    params = WellParams(alpha=rc.alpha, d=rc.d)
    rows = []
    failures = 0
    for e in rc.epsilons:
        pot = bs_core.DeformationPotential(well, rc.profile, e)
        row = {"epsilon": e}
        try:
            lead = bs_core.solve_secular(pot, None, mode="leading")
            row["leading"] = dataclasses.asdict(lead)
        except bs_core.BracketError as exc:
            row["leading"] = {"no_root": str(exc)}
        try:
            grid = harness.eigengrid(rc, well, e,
                                     length_factor=rc.bs_length_factor)
            h0 = fd_oracle.build_h2d(params, None, 0.0, grid, assemble=False)
            full = bs_core.solve_secular(pot, h0, mode="discrete-full")
            row["discrete_full"] = dataclasses.asdict(full)
        except bs_core.BracketError as exc:
            row["discrete_full"] = {"no_root": str(exc)}
        except Exception as exc:  # noqa: BLE001
            row["discrete_full"] = {"error": f"{type(exc).__name__}: {exc}"}
            failures += 1
        rows.append(row)
    print(json.dumps(rows, indent=1))
    return 3 if rows and failures == len(rows) else 0


def _cmd_sweep(args) -> int:
    rc = _load_run_config(args)
    records, code = harness.run(rc)
    for rec in records:
        print(f"epsilon={rec.epsilon:g} status={rec.status} "
              f"lambda1_fd={rec.lambda1_fd:.10g} seconds={rec.seconds:.1f}")
    fd_rows = [r for r in records if math.isfinite(r.lambda1_fd)
               and math.isfinite(r.fd_threshold)]
    if len(fd_rows) >= 3:
        well = solve_well(WellParams(alpha=rc.alpha, d=rc.d))
        target = asymptotics.predict(well, rc.profile).eps2_coefficient
        import numpy as np
        fit = harness.fit_coefficient(
            np.array([r.epsilon for r in fd_rows]),
            np.array([(r.fd_threshold - r.lambda1_fd) / r.epsilon**2
                      for r in fd_rows]),
            target)
        print(f"coefficient fit: c0={fit.c0:.8g} target={fit.target:.8g} "
              f"deviation={fit.deviation:+.2%}")
    print(f"results written to {rc.out_dir}/results.csv")
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="softguide",
        description="Spectral analysis of weakly deformed soft quantum waveguides")
    sub = parser.add_subparsers(dest="command", required=True)

    p_well = sub.add_parser("well", help="1-D well spectrum as JSON")
    p_well.add_argument("--alpha", type=float, required=True)
    p_well.add_argument("--d", type=float, required=True)
    p_well.set_defaults(func=_cmd_well)

    for name, func, extra in [
        ("predict", _cmd_predict, ()),
        ("critical", _cmd_critical, ()),
        ("compare-dirichlet", _cmd_compare_dirichlet, ()),
        ("fd-solve", _cmd_fd_solve, ("dump",)),
        ("bs-solve", _cmd_bs_solve, ()),
        ("sweep", _cmd_sweep, ()),
    ]:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--set", action="append", metavar="KEY=VALUE")
        if "dump" in extra:
            p.add_argument("--dump-eigenvector", metavar="PATH")
        p.set_defaults(func=func)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
