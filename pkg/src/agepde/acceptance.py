"""The acceptance suite: twelve end-to-end checks against scalar oracles.

Every reference constant is recomputed here from its scalar equation with
``scipy.optimize.brentq``, independently of the bisection routines in
:mod:`agepde.limits`.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .dynamics import integral_bound_check, mass_curves, profile_checks, verify_global_dynamics, equilibrium
from .limits import compute_limits
from .model import build_grid, preset, sample_coefficients
from .spectral import NextGenerationOperator, eigen_bounds, power_iteration, principal_eigenvalue

__all__ = ["Outcome", "CRITERIA", "s_star", "alpha_star", "run", "format_table"]


def s_star() -> float:
    """Root ``s > 0`` of ``3 (1 - exp(-s)) = s``."""
    return brentq(lambda s: 3.0 * (1.0 - np.exp(-s)) - s, 1.0, 3.0, xtol=1e-15)


def alpha_star() -> float:
    return s_star() - 1.0


@dataclass
class Outcome:
    number: int
    title: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": self.passed,
                "seconds": self.seconds, "detail": self.detail}


def _eig(spec, n_a, n_x, **kw):
    grid = build_grid(spec, n_a, n_x)
    tables = sample_coefficients(spec, grid)
    return principal_eigenvalue(tables, spec.d, spec.lambda_adv, grid, **kw)


def _decreasing(xs) -> bool:
    return all(b < a for a, b in zip(xs, xs[1:]))


def homogeneity_collapse():
    a_star = alpha_star()
    rows = []
    ok = True
    for d, lam in ((0.5, 0.0), (1.0, 2.0), (2.0, -1.0)):
        res = _eig(preset("P0", d=d, lambda_adv=lam), 200, 100)
        v = res.eigenfunction
        variation = float(np.max((v.max(axis=1) - v.min(axis=1)) / np.max(v)))
        err = abs(res.lambda0 - a_star)
        ok &= err <= 5e-3 and variation <= 1e-3
        rows.append({"d": d, "lambda_adv": lam, "lambda0": res.lambda0, "error": err,
                     "variation": variation})
    return ok, {"alpha_star": a_star, "points": rows}


def monotone_bracketing():
    a_star = alpha_star()
    detail = {}
    ok = True
    for name, d, lam in (("P0", 1.0, 0.0), ("P1", 1.0, 1.0)):
        spec = preset(name, d=d, lambda_adv=lam)
        grid = build_grid(spec, 100, 50)
        tables = sample_coefficients(spec, grid)
        op = NextGenerationOperator(tables, d, lam, grid)
        radii = [power_iteration(op.matrix(l).__matmul__, np.ones(grid.n_x + 1))[0]
                 for l in (a_star - 1.0, a_star, a_star + 1.0)]
        lo, hi = eigen_bounds(tables, grid)
        lam0 = principal_eigenvalue(tables, d, lam, grid).lambda0
        good = _decreasing(radii) and lo - 0.01 <= lam0 <= hi + 0.01
        ok &= good
        detail[name] = {"radii": radii, "lambda_lo": lo, "lambda_hi": hi, "lambda0": lam0}
    return ok, detail


def _limit(spec, n_a=200, n_x=100):
    grid = build_grid(spec, n_a, n_x)
    tables = sample_coefficients(spec, grid)
    return compute_limits(tables, spec.f, grid)


def large_advection():
    lims = _limit(preset("P1"))
    detail = {"alpha1": lims.alpha1, "alpha0": lims.alpha0}
    ok = True
    for sign, target, key in ((1.0, lims.alpha1, "downstream"), (-1.0, lims.alpha0, "upstream")):
        errs = []
        for lam in (10.0, 30.0, 100.0):
            res = _eig(preset("P1", d=1.0, lambda_adv=sign * lam), 200, 100)
            errs.append(abs(res.lambda0 - target))
        ok &= _decreasing(errs) and errs[-1] <= 0.05 * abs(target)
        detail[key] = errs
    return ok, detail


def small_diffusion():
    lims = _limit(preset("P1"))
    errs = []
    for d, n_x in ((1e-1, 100), (1e-2, 100), (1e-3, 400)):
        res = _eig(preset("P1", d=d, lambda_adv=1.0), 200, n_x)
        errs.append(abs(res.lambda0 - lims.alpha1))
    ok1 = _decreasing(errs) and errs[-1] <= 0.05 * abs(lims.alpha1)
    peak = preset("interior_peak", d=1e-3, lambda_adv=0.0)
    amax = _limit(peak, 200, 400).alpha_max
    lam0 = _eig(peak, 200, 400).lambda0
    ok2 = abs(lam0 - amax) <= 0.05 * abs(amax)
    return ok1 and ok2, {"alpha1": lims.alpha1, "errors": errs, "alpha_max": amax,
                         "lambda0_interior_peak": lam0}


def large_diffusion():
    abar = _limit(preset("P1")).alpha_bar
    errs = [abs(_eig(preset("P1", d=d, lambda_adv=1.0), 200, 100).lambda0 - abar) for d in (10.0, 100.0)]
    return errs[-1] <= 0.01 * abs(abar), {"alpha_bar": abar, "errors": errs}


def truncation_independence():
    base = _eig(preset("P1", d=1.0, lambda_adv=1.0), 200, 100).lambda0
    longer = _eig(preset("P1", d=1.0, lambda_adv=1.0, a_plus=1.5), 300, 100).lambda0
    return abs(base - longer) <= 5e-3, {"a_plus_1": base, "a_plus_1.5": longer,
                                        "difference": abs(base - longer)}


def _bump(a, x):
    return 2.0 * ((x > 0.3) & (x < 0.6))


def global_dynamics():
    grid_n = (100, 50)
    sup = preset("P1", d=1.0, lambda_adv=1.0)
    rep = verify_global_dynamics(sup, build_grid(sup, *grid_n), [0.1, _bump])
    ok_sup = (rep["passed"] and rep["expected"] == "positive" and max(rep["residuals"]) <= 1e-6)
    sub = preset("subcritical", d=1.0, lambda_adv=1.0)
    rep2 = verify_global_dynamics(sub, build_grid(sub, *grid_n), [0.1, _bump], t_max=100.0)
    ok_sub = (rep2["expected"] == "extinct" and max(rep2["sup"]) <= 1e-6
              and max(rep2["t_reached"]) <= 100.0 + 1e-9)
    strip = lambda r: {k: v for k, v in r.items() if k != "runs"}
    return ok_sup and ok_sub, {"supercritical": strip(rep), "subcritical": strip(rep2)}


def advective_extinction():
    spec = preset("P1", d=0.05)
    rows = mass_curves(spec, build_grid(spec, 100, 100), "lambda_adv", [1.0, 10.0, 50.0])
    m0 = [float(r["mass"][0]) for r in rows]
    ok = (all(r["ok"] and r["monotone"] for r in rows) and m0[-1] <= 0.1 * m0[0])
    return ok, {"mass_at_birth": m0, "monotone": [r["monotone"] for r in rows]}


def small_diffusion_profile():
    spec = preset("P1", d=1e-3, lambda_adv=0.0)
    rep = profile_checks(spec, build_grid(spec, 100, 200), "small_d_no_advection")
    return rep["passed"], rep


def large_diffusion_profile():
    spec = preset("P1", d=100.0, lambda_adv=1.0)
    rep = profile_checks(spec, build_grid(spec, 100, 50), "large_d")
    return rep["passed"], rep


def integral_bounds():
    detail = {}
    ok = True
    for d in (0.5, 0.05):
        spec = preset("P1", d=d, lambda_adv=2.0)
        grid = build_grid(spec, 100, 100)
        tables = sample_coefficients(spec, grid)
        eq = equilibrium(tables, spec.f, d, 2.0, grid, cross_check=False)
        rep = integral_bound_check(eq, spec, grid)
        detail[f"d={d}"] = rep
        ok &= rep["passed"] and rep["uniform_bound"]
        if d < rep["exponential_threshold"]:
            ok &= rep["exponential_bound"] is True
    return ok, detail


def grid_convergence():
    a_star = alpha_star()
    errs = [abs(_eig(preset("P0"), n_a, n_x).lambda0 - a_star)
            for n_a, n_x in ((50, 25), (100, 50), (200, 100))]
    orders = [float(np.log2(errs[i] / errs[i + 1])) for i in range(2)]
    return min(orders) >= 1.8, {"errors": errs, "orders": orders}


CRITERIA = [
    (1, "homogeneity collapse", ("P0",), homogeneity_collapse),
    (2, "monotonicity and bracketing", ("P0", "P1"), monotone_bracketing),
    (3, "large-advection limit", ("P1",), large_advection),
    (4, "small-diffusion limits", ("P1", "interior_peak"), small_diffusion),
    (5, "large-diffusion limit", ("P1",), large_diffusion),
    (6, "truncation-age independence", ("P1",), truncation_independence),
    (7, "global dynamics", ("P1", "subcritical"), global_dynamics),
    (8, "extinction under advection", ("P1",), advective_extinction),
    (9, "small-diffusion equilibrium profile", ("P1",), small_diffusion_profile),
    (10, "large-diffusion equilibrium profile", ("P1",), large_diffusion_profile),
    (11, "integral bounds", ("P1",), integral_bounds),
    (12, "grid convergence", ("P0",), grid_convergence),
]


def run_one(number: int) -> Outcome:
    for num, title, _, fn in CRITERIA:
        if num == number:
            t0 = time.perf_counter()
            try:
                passed, detail = fn()
            except Exception as exc:  # noqa: BLE001 - a crash is a failed check
                passed, detail = False, {"error": f"{type(exc).__name__}: {exc}"}
            return Outcome(num, title, bool(passed), detail, time.perf_counter() - t0)
    raise KeyError(f"no criterion {number}")


def run(preset_name: str | None = None, numbers=None) -> list[Outcome]:
    """Run the criteria touching ``preset_name`` (all when ``None``)."""
    chosen = [num for num, _, presets, _ in CRITERIA
              if (preset_name is None or preset_name in presets) and (numbers is None or num in numbers)]
    return [run_one(n) for n in chosen]


def format_table(outcomes) -> str:
    lines = [f"{'#':>3}  {'criterion':<38} {'result':<6} {'seconds':>8}"]
    for o in outcomes:
        lines.append(f"{o.number:>3}  {o.title:<38} {'PASS' if o.passed else 'FAIL':<6} {o.seconds:>8.2f}")
    return "\n".join(lines)
