"""Time marching of the nonlinear age-structured model and equilibrium checks.

The model is

    u_t + u_a = d u_xx - Lambda u_x - mu u,
    u(t, 0, x) = f(x, int beta u da),
    d u_x - Lambda u = 0 at x = 0, 1.

The time step equals the age step, so transport along characteristics is a
shift of age rows. Each shifted row takes one monotone flux-gauge step
(``split`` scheme), then the newborn row is set from the renewal condition.
The whole update is monotone: ordered data stay ordered and nonnegative data
stay nonnegative.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .evolution import AgeStepper
from .limits import gamma_threshold, u_star_profile, v_star_profile
from .model import BirthLaw, CoefficientTables, Grid, ProblemSpec, sample_coefficients, trapezoid_weights
from .spectral import principal_eigenvalue

__all__ = [
    "PopulationState",
    "EquilibriumResult",
    "Marcher",
    "advance",
    "super_solution",
    "equilibrium",
    "linearized_eigenvalue",
    "verify_global_dynamics",
    "mass_curves",
    "profile_checks",
    "integral_bound_check",
]

EXTINCTION = 1e-8
TOL_STEADY = 1e-8
T_MAX = 200.0
MAX_EXPONENT = 50.0


@dataclass(frozen=True, eq=False)
class PopulationState:
    u: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        if not np.all(np.isfinite(u)):
            raise ValueError("population state is not finite")
        if np.any(u < 0):
            raise ValueError("population state has negative entries")
        object.__setattr__(self, "u", u)


class Marcher:
    """One-step map of the discrete model, assembled once per parameter set."""

    def __init__(self, tables: CoefficientTables, law: BirthLaw, d: float, lambda_adv: float,
                 grid: Grid, scheme: str = "split"):
        self.grid = grid
        self.law = law
        self.d = d
        self.lambda_adv = lambda_adv
        stepper = AgeStepper.build(tables, d, lambda_adv, grid.da, grid.dx, gauge="flux",
                                   scheme=scheme, advection="fitted")
        self._solve, B, self._pre, self._post = stepper.block_system()
        self._B = None if stepper.explicit[0] is None else B
        self.W = trapezoid_weights(grid.ic, grid.da)[:, None] * tables.renewal_beta

    def renewal(self, u: np.ndarray) -> np.ndarray:
        """Newborn row solving ``u0 = f(x, W_0 u0 + sum_{j>0} W_j u_j)``."""
        ic = self.grid.ic
        xs = self.grid.xs
        rest = np.einsum("ji,ji->i", self.W[1:], u[1 : ic + 1])
        w0 = self.W[0]
        u0 = self.law(xs, rest)
        for _ in range(100):
            nxt = self.law(xs, w0 * u0 + rest)
            done = np.max(np.abs(nxt - u0)) <= 1e-15 * max(1.0, float(np.max(np.abs(nxt))))
            u0 = nxt
            if done:
                return u0
        # slow contraction: fall back to bisection on [0, L]
        lo, hi = np.zeros_like(u0), np.full_like(u0, float(self.law.L))
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            pos = self.law(xs, w0 * mid + rest) - mid > 0
            lo, hi = np.where(pos, mid, lo), np.where(pos, hi, mid)
        return 0.5 * (lo + hi)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        n_a = self.grid.n_a
        v = (self._pre * u[:-1]).ravel()
        if self._B is not None:
            v = self._B @ v
        v = self._solve(v).reshape(n_a, -1) * self._post
        new = np.empty_like(u)
        new[1:] = v
        new[0] = self.renewal(new)
        return new


def advance(state: PopulationState, dt: float, tables: CoefficientTables, birth_law: BirthLaw,
            d: float, lambda_adv: float, grid: Grid, marcher: Marcher | None = None) -> PopulationState:
    """One time step of length ``dt = da``."""
    if abs(dt - grid.da) > 1e-12 * grid.da:
        raise ValueError(f"time step must equal the age step {grid.da}, got {dt}")
    if marcher is None:
        marcher = Marcher(tables, birth_law, d, lambda_adv, grid)
    return PopulationState(marcher(state.u), state.time + dt)


def super_solution(law: BirthLaw, d: float, lambda_adv: float, grid: Grid) -> np.ndarray:
    """``L exp((Lambda/d)(x - x_ref))`` on every age row, with ``x_ref`` the upstream end.

    This profile is a stationary solution of the flux problem without death
    and bounds every newborn flux. Exponents above 50 are clipped, which
    gives up the super-solution property.
    """
    k = lambda_adv / d
    x_ref = 0.0 if k >= 0 else 1.0
    expo = np.minimum(k * (grid.xs - x_ref), MAX_EXPONENT)
    return np.broadcast_to(law.L * np.exp(expo), grid.shape).copy()


@dataclass(eq=False)
class EquilibriumResult:
    u_star_field: np.ndarray = field(repr=False)
    residual: float
    converged: bool
    t_reached: float
    classification: str
    sup_history: np.ndarray = field(repr=False, default=None)
    rate_history: np.ndarray = field(repr=False, default=None)
    cross_check_distance: float | None = None

    def mass(self, dx: float) -> np.ndarray:
        """Trapezoid spatial mass at every age node."""
        w = trapezoid_weights(self.u_star_field.shape[1] - 1, dx)
        return self.u_star_field @ w

    def to_dict(self) -> dict:
        return {
            "residual": self.residual,
            "converged": self.converged,
            "t_reached": self.t_reached,
            "classification": self.classification,
            "cross_check_distance": self.cross_check_distance,
            "sup": float(np.max(self.u_star_field)),
        }


def _march(marcher: Marcher, u: np.ndarray, t_max: float, tol_steady: float, extinction: float):
    dt = marcher.grid.da
    n_max = int(round(t_max / dt))
    sups = [float(np.max(u))]
    rates = []
    t = 0.0
    converged = False
    for _ in range(n_max):
        new = marcher(u)
        t += dt
        sup = float(np.max(new))
        rate = float(np.max(np.abs(new - u))) / dt
        sups.append(sup)
        rates.append(rate)
        u = new
        if sup < extinction or rate < tol_steady * sup:
            converged = True
            break
    return u, t, converged, np.array(sups), np.array(rates)


def equilibrium(tables: CoefficientTables, birth_law: BirthLaw, d: float, lambda_adv: float,
                grid: Grid, t_max: float = T_MAX, tol_steady: float = TOL_STEADY, *, u0=None,
                cross_check: bool = True, extinction: float = EXTINCTION,
                marcher: Marcher | None = None) -> EquilibriumResult:
    """March to the long-time limit.

    Starts from :func:`super_solution` unless ``u0`` is given. Steadiness is
    declared when the sup-norm rate of change per unit time falls below
    ``tol_steady`` times the sup-norm of the state, or the state drops below
    ``extinction``. When the limit is positive and ``cross_check`` is set, a
    second march from a small positive state must land within 1e-4.
    """
    if marcher is None:
        marcher = Marcher(tables, birth_law, d, lambda_adv, grid)
    start = super_solution(birth_law, d, lambda_adv, grid) if u0 is None else np.asarray(u0, float)
    u, t, converged, sups, rates = _march(marcher, start, t_max, tol_steady, extinction)
    sup = float(np.max(u))
    cls = "extinct" if sup < extinction else "positive"
    residual = float(np.max(np.abs(marcher(u) - u)))
    dist = None
    if cross_check and cls == "positive":
        small = np.full(grid.shape, 1e-3 * birth_law.L)
        u2, *_ = _march(marcher, small, t_max, tol_steady, extinction)
        dist = float(np.max(np.abs(u2 - u)))
    return EquilibriumResult(u, residual, converged, t, cls, sups, rates, dist)


def linearized_eigenvalue(tables: CoefficientTables, birth_law: BirthLaw, d: float,
                          lambda_adv: float, grid: Grid):
    """Principal eigenvalue of the model linearized at zero.

    Solved in the Neumann gauge with unit advection profile, renewal weight
    ``f_u(x, 0)`` and the same age scheme and advection fitting as the
    marcher, so its sign matches the discrete dynamics.
    """
    flat = CoefficientTables(tables.mu, tables.beta, np.ones_like(tables.q), tables.beta_edge, tables.ic)
    return principal_eigenvalue(flat, d, lambda_adv, grid, weight=birth_law.slope(grid.xs),
                                scheme="split", advection="fitted")


def _seed_array(seed, grid: Grid) -> np.ndarray:
    if callable(seed):
        A, X = np.meshgrid(grid.ages, grid.xs, indexing="ij")
        arr = np.broadcast_to(np.asarray(seed(A, X), float), grid.shape).copy()
    else:
        arr = np.broadcast_to(np.asarray(seed, float), grid.shape).copy()
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError("seeds must be finite and nonnegative")
    if not np.any(arr > 0):
        raise ValueError("seeds must not vanish identically")
    return arr


def verify_global_dynamics(spec: ProblemSpec, grid: Grid, seeds, t_max: float = T_MAX,
                           tol_steady: float = TOL_STEADY, agree: float = 1e-4) -> dict:
    """March several seeds and check they share one limit, of the predicted kind."""
    seeds = [_seed_array(s, grid) for s in seeds]
    if len(seeds) < 2:
        raise ValueError("need at least two seeds")
    tables = sample_coefficients(spec, grid)
    lam0 = linearized_eigenvalue(tables, spec.f, spec.d, spec.lambda_adv, grid).lambda0
    marcher = Marcher(tables, spec.f, spec.d, spec.lambda_adv, grid)
    runs = [equilibrium(tables, spec.f, spec.d, spec.lambda_adv, grid, t_max, tol_steady, u0=s,
                        cross_check=False, marcher=marcher) for s in seeds]
    dists = [float(np.max(np.abs(a.u_star_field - b.u_star_field)))
             for a, b in itertools.combinations(runs, 2)]
    expected = "positive" if lam0 > 0 else "extinct"
    classes = [r.classification for r in runs]
    passed = max(dists) <= agree and all(c == expected for c in classes)
    return {
        "lambda0": lam0,
        "expected": expected,
        "classifications": classes,
        "sup": [float(np.max(r.u_star_field)) for r in runs],
        "residuals": [r.residual for r in runs],
        "t_reached": [r.t_reached for r in runs],
        "converged": [r.converged for r in runs],
        "distances": dists,
        "passed": bool(passed),
        "runs": runs,
    }


def mass_curves(spec: ProblemSpec, grid: Grid, parameter: str, values, *, t_max: float = T_MAX,
                tol_steady: float = TOL_STEADY, jobs: int = 1) -> list[dict]:
    """Spatial mass of the equilibrium at every age node along a sweep of ``d`` or ``lambda_adv``."""
    if parameter not in ("d", "lambda_adv"):
        raise ValueError("parameter must be 'd' or 'lambda_adv'")
    values = list(values)
    if not values:
        raise ValueError("empty sweep")
    tables = sample_coefficients(spec, grid)
    if not gamma_threshold(tables, spec.f, grid).hypotheses["downstream"]:
        raise ValueError("downstream persistence hypothesis fails; no positive equilibrium family")

    def one(v):
        s = spec.replace(**{parameter: v})
        try:
            eq = equilibrium(tables, s.f, s.d, s.lambda_adv, grid, t_max, tol_steady, cross_check=False)
        except Exception as exc:  # noqa: BLE001 - partial table carries the failure
            return {"parameter": v, "mass": None, "ok": False, "error": str(exc)}
        mass = eq.mass(grid.dx)
        monotone = bool(np.all(np.diff(mass) <= 1e-12 * max(1.0, mass[0])))
        return {"parameter": v, "mass": mass, "ok": eq.converged, "monotone": monotone,
                "classification": eq.classification, "residual": eq.residual}

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(one, values))
    return [one(v) for v in values]


PROBE = (0.25, 0.75)


def profile_checks(spec: ProblemSpec, grid: Grid, regime: str, *, tol: float | None = None,
                   t_max: float = T_MAX, probe=PROBE) -> dict:
    """Compare the computed equilibrium with its small- or large-diffusion limit profile."""
    tables = sample_coefficients(spec, grid)
    law = spec.f
    if regime == "small_d_no_advection":
        tol = 0.05 if tol is None else tol
        s = spec.replace(lambda_adv=0.0)
        mask = (grid.xs >= probe[0] - 1e-12) & (grid.xs <= probe[1] + 1e-12)
        gamma = gamma_threshold(tables, law, grid).gamma[mask]
        if np.all(gamma > 1.0):
            mode = "supercritical"
        elif np.all(gamma <= 1.0):
            mode = "subcritical"
        else:
            return {"regime": regime, "passed": False, "aborted": "Gamma crosses 1 on the probe interval"}
        eq = equilibrium(tables, law, s.d, 0.0, grid, t_max, cross_check=False)
        if not eq.converged:
            return {"regime": regime, "passed": False, "aborted": "equilibrium did not converge"}
        u = eq.u_star_field[:, mask]
        if mode == "supercritical":
            v = v_star_profile(tables, law, grid).field[:, mask]
            scale = float(np.max(v))
            err = float(np.max(np.abs(u - v)))
            rel = err / scale
            return {"regime": regime, "mode": mode, "max_abs_error": err, "sup_reference": scale,
                    "relative_error": rel, "tolerance": tol, "passed": bool(rel <= tol)}
        top = float(np.max(u))
        return {"regime": regime, "mode": mode, "max_on_probe": top, "tolerance": tol,
                "passed": bool(top <= tol)}
    if regime == "large_d":
        tol = 0.02 if tol is None else tol
        us = u_star_profile(tables, law, grid)
        if not us.exists:
            return {"regime": regime, "passed": False, "aborted": "average persistence hypothesis fails"}
        eq = equilibrium(tables, law, spec.d, spec.lambda_adv, grid, t_max, cross_check=False)
        if not eq.converged:
            return {"regime": regime, "passed": False, "aborted": "equilibrium did not converge"}
        u = eq.u_star_field
        scale = float(np.max(us.profile))
        err = float(np.max(np.abs(u - us.profile[:, None]))) / scale
        variation = float(np.max(u.max(axis=1) - u.min(axis=1))) / scale
        return {"regime": regime, "relative_error": err, "relative_variation": variation,
                "tolerance": tol, "passed": bool(err <= tol and variation <= tol)}
    raise ValueError(f"unknown regime {regime!r}")


def integral_bound_check(eq: EquilibriumResult, spec: ProblemSpec, grid: Grid) -> dict:
    """Check the explicit upper bounds on ``int_0^a u*(s, x) ds`` at every node.

    The first bound holds for every ``d > 0`` when ``Lambda > 0``; the
    sharper exponential bound is checked only when
    ``d < Lambda**2 / (4 max beta max f_u(., 0))``.
    """
    lam, d = spec.lambda_adv, spec.d
    if lam <= 0:
        return {"skipped": "requires Lambda > 0", "passed": True}
    if eq.classification != "positive":
        return {"skipped": "requires a positive equilibrium", "passed": True}
    tables = sample_coefficients(spec, grid)
    L = float(spec.f.L)
    a_plus = grid.a_plus
    xs = grid.xs
    M1 = a_plus * L * float(np.max(tables.mu)) + 2.0 * L
    k = lam / d
    one_minus = -np.expm1(-k)
    C = (lam * L * a_plus + M1 * (1.0 - one_minus / k)) / (d * one_minus)
    lhs = cumulative_trapezoid(eq.u_star_field, dx=grid.da, axis=0, initial=0.0)
    down = np.exp(-k * (1.0 - xs))
    rhs1 = C * down + (L / lam) * (1.0 - down)
    margin1 = float(np.min(rhs1[None, :] - lhs))
    report = {"M1": M1, "C": C, "uniform_margin": margin1, "uniform_bound": bool(margin1 >= 0)}
    beta_max = float(max(np.max(tables.beta), np.max(tables.beta_edge)))
    fu_max = float(np.max(spec.f.slope(xs)))
    threshold = lam**2 / (4.0 * beta_max * fu_max)
    report["exponential_threshold"] = threshold
    if d < threshold:
        M2 = 2.0 * beta_max * fu_max
        rhs2 = C * np.exp(-k * (1.0 - M2 * d / lam**2) * (1.0 - xs))
        margin2 = float(np.min(rhs2[None, :] - lhs))
        report.update(M2=M2, exponential_margin=margin2, exponential_bound=bool(margin2 >= 0))
    else:
        report["exponential_bound"] = None
    report["passed"] = bool(report["uniform_bound"] and report["exponential_bound"] is not False)
    return report
