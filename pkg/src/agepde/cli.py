"""Command-line entry point.

    agepde eigen | limits | sweep | equilibrium | simulate | verify
           [--config FILE] [--out DIR] [--jobs N] [--grid NAxNX]
           [--preset NAME] [--d D] [--lambda-adv L]

Settings may also come from ``AGEPDE_*`` environment variables (see
:mod:`agepde.config`). Exit status is 0 on success, 1 when a solver or check
fails and 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import acceptance
from .config import ConfigError, RunConfig, load_config, parse_grid
from .dynamics import Marcher, PopulationState, equilibrium, integral_bound_check, super_solution
from .emit import Table, emit, field_table
from .limits import compute_limits
from .model import build_grid, sample_coefficients
from .spectral import principal_eigenvalue

COMMANDS = ("eigen", "limits", "sweep", "equilibrium", "simulate", "verify")


def _setup(cfg: RunConfig):
    spec = cfg.spec()
    grid = build_grid(spec, *cfg.grid)
    return spec, grid, sample_coefficients(spec, grid)


def _eigen_kwargs(cfg: RunConfig) -> dict:
    return {"tol_lambda": cfg.tol_lambda, "r_tol": cfg.r_tol, "scheme": cfg.scheme,
            "advection": cfg.advection}


def cmd_eigen(cfg: RunConfig, out: Path) -> int:
    spec, grid, tables = _setup(cfg)
    res = principal_eigenvalue(tables, spec.d, spec.lambda_adv, grid, **_eigen_kwargs(cfg))
    emit(res, "json", out / "eigen.json")
    emit(field_table(res.eigenfunction, grid.ages, grid.xs), "csv", out / "eigenfunction.csv")
    print(f"lambda0 = {res.lambda0:.10g}  (r_residual {res.r_residual:.2e})")
    return 0


def cmd_limits(cfg: RunConfig, out: Path) -> int:
    spec, grid, tables = _setup(cfg)
    lims = compute_limits(tables, spec.f, grid)
    emit(lims, "json", out / "limits.json")
    print(f"alpha1 = {lims.alpha1:.10g}  alpha0 = {lims.alpha0:.10g}  "
          f"alpha_max = {lims.alpha_max:.10g}  alpha_bar = {lims.alpha_bar:.10g}")
    return 0


def _sweep_limit(cfg: RunConfig, spec, value: float) -> str:
    if cfg.sweep_limit:
        return cfg.sweep_limit
    lam = value if cfg.sweep_parameter == "lambda_adv" else spec.lambda_adv
    if cfg.sweep_parameter == "d" and value >= 1.0:
        return "alpha_bar"
    if lam > 0:
        return "alpha1"
    if lam < 0:
        return "alpha0"
    return "alpha_max"


def cmd_sweep(cfg: RunConfig, out: Path) -> int:
    spec, grid, tables = _setup(cfg)
    lims = compute_limits(tables, spec.f, grid).to_dict()

    def one(v):
        s = spec.replace(**{cfg.sweep_parameter: v})
        return principal_eigenvalue(tables, s.d, s.lambda_adv, grid, **_eigen_kwargs(cfg))

    values = list(cfg.sweep_values)
    with ThreadPoolExecutor(cfg.jobs) as pool:
        results = list(pool.map(one, values))
    rows = []
    for v, res in zip(values, results):
        name = _sweep_limit(cfg, spec, v)
        rows.append([v, res.lambda0, res.bracket[0], res.bracket[1], res.r_residual,
                     res.pde_residual, name, lims[name], abs(res.lambda0 - lims[name])])
    header = [cfg.sweep_parameter, "lambda0", "bracket_lo", "bracket_hi", "r_residual",
              "pde_residual", "limit", "limit_value", "gap"]
    emit(Table(header, rows), "csv", out / "sweep.csv")
    for r in rows:
        print(f"{cfg.sweep_parameter} = {r[0]:<10g} lambda0 = {r[1]:.8g}  |lambda0 - {r[6]}| = {r[8]:.3e}")
    return 0


def cmd_equilibrium(cfg: RunConfig, out: Path) -> int:
    spec, grid, tables = _setup(cfg)
    eq = equilibrium(tables, spec.f, spec.d, spec.lambda_adv, grid, cfg.t_max, cfg.tol_steady)
    report = eq.to_dict()
    report["integral_bounds"] = integral_bound_check(eq, spec, grid)
    emit(report, "json", out / "equilibrium.json")
    emit(field_table(eq.u_star_field, grid.ages, grid.xs), "csv", out / "equilibrium.csv")
    print(f"{eq.classification} equilibrium, sup {np.max(eq.u_star_field):.6g}, "
          f"residual {eq.residual:.2e}, t = {eq.t_reached:g}, converged = {eq.converged}")
    return 0 if eq.converged else 1


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    spec, grid, tables = _setup(cfg)
    marcher = Marcher(tables, spec.f, spec.d, spec.lambda_adv, grid)
    if cfg.seed is None:
        u = super_solution(spec.f, spec.d, spec.lambda_adv, grid)
    else:
        u = np.full(grid.shape, cfg.seed)
    state = PopulationState(u, 0.0)
    steps = sorted({int(round(t / grid.da)) for t in cfg.times})
    rows = []
    n = 0
    for target in steps:
        while n < target:
            state = PopulationState(marcher(state.u), state.time + grid.da)
            n += 1
        t = n * grid.da
        for j, a in enumerate(grid.ages):
            for i, x in enumerate(grid.xs):
                rows.append([t, a, x, state.u[j, i]])
        print(f"t = {t:<8g} sup u = {np.max(state.u):.6g}")
    emit(Table(["t", "a", "x", "value"], rows), "csv", out / "simulate.csv")
    return 0


def cmd_verify(cfg: RunConfig, out: Path, preset_name: str | None) -> int:
    outcomes = acceptance.run(preset_name)
    print(acceptance.format_table(outcomes))
    ok = all(o.passed for o in outcomes)
    emit({"passed": ok, "criteria": [o.to_dict() for o in outcomes]}, "json", out / "verify.json")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="agepde", description=__doc__.split("\n\n")[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="TOML run configuration")
    p.add_argument("--out", help="output directory (created if missing)")
    p.add_argument("--jobs", type=int, help="worker threads for sweeps")
    p.add_argument("--grid", help="grid as NAxNX, e.g. 200x100")
    p.add_argument("--preset", help="built-in problem: P0, P1, interior_peak, subcritical")
    p.add_argument("--d", type=float, dest="d", help="diffusion rate")
    p.add_argument("--lambda-adv", type=float, dest="lambda_adv", help="advection rate")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        problem = {k: getattr(args, k) for k in ("d", "lambda_adv") if getattr(args, k) is not None}
        cfg = load_config(args.config, jobs=args.jobs, out=args.out, preset=args.preset,
                          grid=parse_grid(args.grid) if args.grid else None)
        if problem:
            cfg = cfg.replace(problem={**cfg.problem, **problem})
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "verify":
            return cmd_verify(cfg, out, args.preset)
        handler = globals()[f"cmd_{args.command}"]
        return handler(cfg, out)
    except (ArithmeticError, RuntimeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
