"""Scalar characteristic equations and limiting profiles.

Every limit of the principal eigenvalue reduces to a root of a scalar renewal
equation

    F(alpha) = int_0^{a_c} b(a) exp(-alpha a - m(a)) da = 1

for some birth kernel ``b`` and cumulative death ``m``. Quadrature is the
trapezoid rule on the age nodes of the PDE grid, so eigenvalues from the PDE
solver and the scalar roots carry the same quadrature bias.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .model import BirthLaw, CoefficientTables, Grid, trapezoid_weights

__all__ = [
    "RootError",
    "ScalarRenewalKernel",
    "LimitSet",
    "Threshold",
    "VStar",
    "UStar",
    "cumulative_death",
    "characteristic_root",
    "per_position_roots",
    "limit_values",
    "gamma_threshold",
    "v_star_profile",
    "u_star_profile",
    "compute_limits",
]

MAX_BISECTIONS = 200
# reproduction numbers within roundoff of 1 count as critical, not supercritical
CRITICAL_MARGIN = 1e-12


class RootError(ValueError):
    """A scalar characteristic equation has no root."""


def cumulative_death(mu: np.ndarray, da: float) -> np.ndarray:
    """Trapezoid ``int_0^a mu`` along axis 0, zero at ``a = 0``."""
    return cumulative_trapezoid(mu, dx=da, axis=0, initial=0.0)


@dataclass(frozen=True, eq=False)
class ScalarRenewalKernel:
    """Birth slice and cumulative death on the age nodes ``0..a_c``."""

    beta_slice: np.ndarray
    mu_cum: np.ndarray
    da: float

    def __post_init__(self):
        b = np.asarray(self.beta_slice, dtype=float)
        m = np.asarray(self.mu_cum, dtype=float)[: b.size]
        if np.any(b < 0):
            raise ValueError("beta_slice must be nonnegative")
        if m.size != b.size or m[0] != 0.0 or np.any(np.diff(m) < -1e-14):
            raise ValueError("mu_cum must start at 0 and be non-decreasing")
        object.__setattr__(self, "beta_slice", b)
        object.__setattr__(self, "mu_cum", m)

    @property
    def ages(self) -> np.ndarray:
        return np.arange(self.beta_slice.size) * self.da

    def __call__(self, alpha: float) -> float:
        w = trapezoid_weights(self.beta_slice.size - 1, self.da)
        with np.errstate(over="ignore", invalid="ignore"):
            terms = w * self.beta_slice * np.exp(-alpha * self.ages - self.mu_cum)
        terms = np.where(self.beta_slice > 0, terms, 0.0)
        return float(np.sum(terms))

    def mass(self) -> float:
        """``F(0)``."""
        return self(0.0)


def characteristic_root(kernel: ScalarRenewalKernel, tol: float = 1e-10) -> float:
    """Unique ``alpha`` with ``F(alpha) = 1``, by bisection.

    The starting bracket ``[-50, 50]`` is doubled outward until it straddles 1.
    """
    if not kernel.mass() > 0:
        raise RootError("kernel has no mass; no characteristic root")
    lo, hi = -50.0, 50.0
    for _ in range(12):
        if kernel(lo) >= 1.0:
            break
        lo *= 2.0
    else:
        raise RootError("kernel too weak: F stays below 1 on the search window")
    for _ in range(60):
        if kernel(hi) <= 1.0:
            break
        hi *= 2.0
    else:
        raise RootError("F stays above 1 on the search window")
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        val = kernel(mid)
        if np.isnan(val):
            raise RootError(f"quadrature produced NaN at alpha={mid}")
        if val > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def _kernel(beta_col, mu_col, grid: Grid) -> ScalarRenewalKernel:
    ic = grid.ic
    return ScalarRenewalKernel(beta_col[: ic + 1], cumulative_death(mu_col, grid.da)[: ic + 1], grid.da)


def per_position_roots(tables: CoefficientTables, grid: Grid) -> np.ndarray:
    """Characteristic root of the local kernel at every space node.

    Nodes where the local kernel cannot reach 1 get ``-inf``.
    """
    rb = tables.renewal_beta
    roots = np.empty(grid.n_x + 1)
    for i in range(grid.n_x + 1):
        try:
            roots[i] = characteristic_root(_kernel(rb[:, i], tables.mu[:, i], grid))
        except RootError:
            roots[i] = -np.inf
    return roots


def _average_kernel(tables: CoefficientTables, grid: Grid, weight=None) -> ScalarRenewalKernel:
    wx = trapezoid_weights(grid.n_x, grid.dx)
    rb = tables.renewal_beta
    if weight is not None:
        rb = rb * np.asarray(weight, dtype=float)
    return _kernel(rb @ wx, tables.mu @ wx, grid)


def limit_values(tables: CoefficientTables, grid: Grid) -> tuple[float, float, float, float]:
    """``(alpha1, alpha0, alpha_max, alpha_bar)``.

    ``alpha1``/``alpha0`` use the kernels at ``x = 1``/``x = 0``; ``alpha_max``
    is the largest per-position root (the unit level set of a max of
    decreasing functions of alpha sits at the max of their roots);
    ``alpha_bar`` uses the space-averaged birth rate and death rate.
    """
    roots = per_position_roots(tables, grid)
    if not np.isfinite(roots[-1]) or not np.isfinite(roots[0]):
        raise RootError("boundary kernel too weak for alpha1/alpha0")
    alpha_bar = characteristic_root(_average_kernel(tables, grid))
    return float(roots[-1]), float(roots[0]), float(np.max(roots)), alpha_bar


class Threshold(NamedTuple):
    gamma: np.ndarray
    hypotheses: dict


def gamma_threshold(tables: CoefficientTables, law: BirthLaw, grid: Grid) -> Threshold:
    """Local reproduction numbers ``Gamma(x)`` and the three persistence hypotheses.

    ``downstream``: ``Gamma(1) > 1``; ``max``: ``max Gamma > 1``;
    ``average``: the space-averaged condition with averaged death rate.
    """
    fu = law.slope(grid.xs)
    mcum = cumulative_death(tables.mu, grid.da)[: grid.ic + 1]
    wa = trapezoid_weights(grid.ic, grid.da)
    local = wa @ (tables.renewal_beta * np.exp(-mcum))
    gamma = fu * local
    avg = _average_kernel(tables, grid, weight=fu).mass()
    hyp = {
        "downstream": bool(gamma[-1] > 1.0 + CRITICAL_MARGIN),
        "max": bool(np.max(gamma) > 1.0 + CRITICAL_MARGIN),
        "average": bool(avg > 1.0 + CRITICAL_MARGIN),
        "average_value": float(avg),
    }
    return Threshold(gamma, hyp)


def _bisect_fixed_point(gap, hi, tol=1e-14):
    """Positive root of a gap that is positive below the root and <= 0 at ``hi``."""
    lo = np.zeros_like(hi)
    hi = hi.copy()
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        pos = gap(mid) > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
        if np.all(hi - lo <= tol * np.maximum(1.0, hi)):
            break
    return 0.5 * (lo + hi)


class VStar(NamedTuple):
    field: np.ndarray
    positive: np.ndarray


def v_star_profile(tables: CoefficientTables, law: BirthLaw, grid: Grid) -> VStar:
    """Pointwise renewal equilibria with no spatial coupling.

    At every position ``x`` with ``Gamma(x) > 1``: ``v(0, x)`` solves
    ``v0 = f(x, v0 K(x))`` with ``K(x) = int beta exp(-int mu)``, and
    ``v(a, x) = v0 exp(-int_0^a mu)``. Elsewhere the profile is 0.
    """
    xs = grid.xs
    mcum = cumulative_death(tables.mu, grid.da)
    wa = trapezoid_weights(grid.ic, grid.da)
    K = wa @ (tables.renewal_beta * np.exp(-mcum[: grid.ic + 1]))
    gamma = law.slope(xs) * K
    positive = gamma > 1.0 + CRITICAL_MARGIN
    v0 = np.zeros_like(xs)
    if np.any(positive):
        xp, Kp = xs[positive], K[positive]
        v0[positive] = _bisect_fixed_point(lambda v: law(xp, v * Kp) - v,
                                           np.full(xp.size, float(law.L)))
    return VStar(v0 * np.exp(-mcum), positive)


class UStar(NamedTuple):
    profile: np.ndarray
    u0: float
    exists: bool


def u_star_profile(tables: CoefficientTables, law: BirthLaw, grid: Grid) -> UStar:
    """Spatially flat renewal equilibrium driven by averaged death.

    ``u(a) = U0 exp(-int_0^a mean_x mu)`` with ``U0 = mean_x f(x, U0 K_x)``
    and ``K_x = int beta(a, x) exp(-int_0^a mean_x mu) da``.
    """
    wx = trapezoid_weights(grid.n_x, grid.dx)
    mbar = cumulative_death(tables.mu @ wx, grid.da)
    wa = trapezoid_weights(grid.ic, grid.da)
    Kx = (wa * np.exp(-mbar[: grid.ic + 1])) @ tables.renewal_beta
    xs = grid.xs
    if not float(wx @ (law.slope(xs) * Kx)) > 1.0 + CRITICAL_MARGIN:
        return UStar(np.zeros_like(mbar), 0.0, False)
    u0 = float(_bisect_fixed_point(lambda U: np.array([wx @ law(xs, U[0] * Kx) - U[0]]),
                                   np.array([float(law.L)]))[0])
    return UStar(u0 * np.exp(-mbar), u0, True)


@dataclass(eq=False)
class LimitSet:
    alpha1: float
    alpha0: float
    alpha_max: float
    alpha_bar: float
    gamma: np.ndarray
    hypotheses: dict
    v_star: np.ndarray | None = field(default=None, repr=False)
    u_star: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "alpha1": self.alpha1,
            "alpha0": self.alpha0,
            "alpha_max": self.alpha_max,
            "alpha_bar": self.alpha_bar,
            "gamma": [float(g) for g in self.gamma],
            "hypotheses": dict(self.hypotheses),
        }


def compute_limits(tables: CoefficientTables, law: BirthLaw, grid: Grid) -> LimitSet:
    a1, a0, amax, abar = limit_values(tables, grid)
    thr = gamma_threshold(tables, law, grid)
    return LimitSet(a1, a0, amax, abar, thr.gamma, thr.hypotheses,
                    v_star=v_star_profile(tables, law, grid).field,
                    u_star=u_star_profile(tables, law, grid).profile)
