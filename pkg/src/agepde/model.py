"""Problem definitions, grids and coefficient tables.

A problem is the set of coefficient functions (death rate ``mu``, birth rate
``beta``, advection profile ``q``), the birth law ``f`` of the nonlinear
model, the diffusion rate ``d``, the advection rate ``lambda_adv`` and the
ages ``a_c`` (fertility cutoff) and ``a_plus`` (truncation of the age axis).

All coefficient callables are evaluated on numpy arrays and must broadcast:
``mu(a, x)``, ``beta(a, x)``, ``q(x)``, ``f(x, u)``, ``f_u0(x)``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.interpolate import RegularGridInterpolator

__all__ = [
    "BirthLaw",
    "ProblemSpec",
    "Grid",
    "CoefficientTables",
    "Check",
    "AssumptionReport",
    "Extrema",
    "holling_ii",
    "logistic",
    "tabulated",
    "tabulated_profile",
    "preset",
    "PRESETS",
    "build_grid",
    "sample_coefficients",
    "validate_assumptions",
    "spatial_extrema",
    "trapezoid_weights",
]


@dataclass(frozen=True)
class BirthLaw:
    """Newborn flux ``f(x, u)`` of the nonlinear renewal condition.

    ``f_u0`` is the derivative of ``f`` in ``u`` at ``u = 0`` and ``L`` an
    upper bound of ``f`` over ``u >= 0``.
    """

    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    f_u0: Callable[[np.ndarray], np.ndarray]
    L: float
    name: str = "custom"

    def __call__(self, x, u):
        return np.asarray(self.f(x, u), dtype=float)

    def slope(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.f_u0(x), dtype=float), x.shape).copy()

    def scaled(self, c: float) -> "BirthLaw":
        """The law ``c * f``."""
        f, fu = self.f, self.f_u0
        return BirthLaw(
            f=lambda x, u: c * np.asarray(f(x, u)),
            f_u0=lambda x: c * np.asarray(fu(x)),
            L=c * self.L,
            name=f"{c}*{self.name}",
        )


def holling_ii(tau: float = 1.0, gain: Callable | float = 1.0) -> BirthLaw:
    """Holling type II law ``gain(x) * u / (1 + tau u)``."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    g = gain if callable(gain) else (lambda x, c=float(gain): np.full_like(np.asarray(x, float), c))
    gmax = float(np.max(g(np.linspace(0.0, 1.0, 257))))
    return BirthLaw(
        f=lambda x, u: g(x) * u / (1.0 + tau * u),
        f_u0=lambda x: g(x),
        L=gmax / tau,
        name="holling_ii",
    )


def logistic() -> BirthLaw:
    """The law ``1 - exp(-u)``."""
    return BirthLaw(
        f=lambda x, u: -np.expm1(-np.asarray(u, dtype=float)) + 0.0 * np.asarray(x),
        f_u0=lambda x: np.ones_like(np.asarray(x, dtype=float)),
        L=1.0,
        name="logistic",
    )


def tabulated(ages, xs, values) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Bilinear interpolant of a dense (age x space) table.

    Values outside the table are clamped to the nearest edge.
    """
    ages = np.asarray(ages, dtype=float)
    xs = np.asarray(xs, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape != (ages.size, xs.size):
        raise ValueError(f"table shape {values.shape} does not match axes ({ages.size}, {xs.size})")
    interp = RegularGridInterpolator((ages, xs), values, method="linear")

    def fn(a, x):
        a, x = np.broadcast_arrays(np.asarray(a, float), np.asarray(x, float))
        pts = np.stack(
            [np.clip(a, ages[0], ages[-1]).ravel(), np.clip(x, xs[0], xs[-1]).ravel()], axis=-1
        )
        return interp(pts).reshape(a.shape)

    return fn


def tabulated_profile(xs, values) -> Callable[[np.ndarray], np.ndarray]:
    xs = np.asarray(xs, dtype=float)
    values = np.asarray(values, dtype=float)
    return lambda x: np.interp(np.asarray(x, float), xs, values)


@dataclass(frozen=True)
class ProblemSpec:
    mu: Callable[[np.ndarray, np.ndarray], np.ndarray]
    beta: Callable[[np.ndarray, np.ndarray], np.ndarray]
    q: Callable[[np.ndarray], np.ndarray]
    f: BirthLaw
    d: float = 1.0
    lambda_adv: float = 0.0
    a_c: float = 1.0
    a_plus: float | None = None
    name: str = "custom"

    def __post_init__(self):
        if self.a_plus is None:
            object.__setattr__(self, "a_plus", self.a_c)
        if not self.d > 0:
            raise ValueError(f"diffusion rate must be positive, got d={self.d}")
        if not self.a_c > 0:
            raise ValueError(f"a_c must be positive, got {self.a_c}")
        if self.a_plus < self.a_c:
            raise ValueError(f"a_plus={self.a_plus} must be >= a_c={self.a_c}")

    def replace(self, **changes) -> "ProblemSpec":
        return dataclasses.replace(self, **changes)


def _const(c):
    return lambda a, x: np.full(np.broadcast(np.asarray(a), np.asarray(x)).shape, float(c))


def _fertile(c, a_c):
    def beta(a, x):
        a, x = np.broadcast_arrays(np.asarray(a, float), np.asarray(x, float))
        return np.where(a < a_c, float(c), 0.0)

    return beta


def _unit_q(x):
    return np.ones_like(np.asarray(x, dtype=float))


def _p0(**kw) -> ProblemSpec:
    # spatially homogeneous: mu = 1, beta = 3 on [0, 1)
    return ProblemSpec(mu=_const(1.0), beta=_fertile(3.0, 1.0), q=_unit_q, f=holling_ii(),
                       a_c=1.0, name="P0", **kw)


def _p1(**kw) -> ProblemSpec:
    def mu(a, x):
        a, x = np.broadcast_arrays(np.asarray(a, float), np.asarray(x, float))
        return 2.0 - x

    return ProblemSpec(mu=mu, beta=_fertile(3.0, 1.0), q=_unit_q, f=holling_ii(),
                       a_c=1.0, name="P1", **kw)


def _interior_peak(**kw) -> ProblemSpec:
    def mu(a, x):
        a, x = np.broadcast_arrays(np.asarray(a, float), np.asarray(x, float))
        return 1.0 + 4.0 * (x - 0.5) ** 2

    return ProblemSpec(mu=mu, beta=_fertile(3.0, 1.0), q=_unit_q, f=holling_ii(),
                       a_c=1.0, name="interior_peak", **kw)


def _subcritical(**kw) -> ProblemSpec:
    return ProblemSpec(mu=_const(0.0), beta=_fertile(0.9, 1.0), q=_unit_q, f=holling_ii(),
                       a_c=1.0, name="subcritical", **kw)


PRESETS: dict[str, Callable[..., ProblemSpec]] = {
    "P0": _p0,
    "P1": _p1,
    "interior_peak": _interior_peak,
    "subcritical": _subcritical,
}


def preset(name: str, **overrides) -> ProblemSpec:
    """Built-in problem by name; keyword overrides go to :class:`ProblemSpec`."""
    try:
        factory = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; known: {sorted(PRESETS)}") from None
    return factory().replace(**overrides)


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform tensor grid on [0, a_plus] x [0, 1]."""

    n_a: int
    n_x: int
    a_plus: float
    a_c: float
    ages: np.ndarray = field(repr=False)
    xs: np.ndarray = field(repr=False)

    @property
    def da(self) -> float:
        return self.a_plus / self.n_a

    @property
    def dx(self) -> float:
        return 1.0 / self.n_x

    @property
    def ic(self) -> int:
        """Index of the age node carrying ``a_c``."""
        return int(round(self.a_c / self.da))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_a + 1, self.n_x + 1)


def _fits(n: int, a_c: float, a_plus: float) -> bool:
    r = a_c * n / a_plus
    return round(r) >= 1 and abs(r - round(r)) < 1e-9


def build_grid(spec: ProblemSpec, n_a: int, n_x: int) -> Grid:
    """Grid with ``a_c`` snapped onto an age node.

    The age step may move by at most 1% from ``a_plus / n_a``.
    """
    if n_a < 8 or n_x < 8:
        raise ValueError(f"need n_a >= 8 and n_x >= 8, got {n_a}x{n_x}")
    a_plus, a_c = float(spec.a_plus), float(spec.a_c)
    if a_plus <= 0:
        raise ValueError("a_plus must be positive")
    da = a_plus / n_a
    window = range(max(8, math.floor(n_a / 1.01)), math.ceil(n_a * 1.01) + 1)
    exact = [n for n in window if abs(a_plus / n - da) <= 0.01 * da and _fits(n, a_c, a_plus)]
    if exact:
        n = min(exact, key=lambda m: (abs(m - n_a), m))
        return Grid(n, n_x, a_plus, a_c, np.linspace(0.0, a_plus, n + 1), np.linspace(0.0, 1.0, n_x + 1))
    # a_plus / a_c not commensurate with any nearby step: snap a_c and extend a_plus by < da
    k = max(1, round(a_c / da))
    da_new = a_c / k
    if abs(da_new - da) > 0.01 * da:
        raise ValueError(
            f"cannot place a_c={a_c} on an age node within 1% of da={da:g}; increase n_a"
        )
    n = math.ceil(a_plus / da_new - 1e-9)
    top = n * da_new
    return Grid(n, n_x, top, a_c, np.linspace(0.0, top, n + 1), np.linspace(0.0, 1.0, n_x + 1))


def trapezoid_weights(n: int, h: float) -> np.ndarray:
    """Composite trapezoid weights for ``n`` intervals of width ``h``."""
    w = np.full(n + 1, h)
    w[0] = w[-1] = 0.5 * h
    return w


@dataclass(frozen=True, eq=False)
class CoefficientTables:
    """Coefficients sampled on grid nodes.

    ``beta_edge`` holds the left limit ``beta(a_c-, x)``; the stored table is
    zero on the ``a_c`` row itself. Age quadratures over ``[0, a_c]`` use the
    left limit so a jump of ``beta`` at the cutoff costs no accuracy.
    """

    mu: np.ndarray
    beta: np.ndarray
    q: np.ndarray
    beta_edge: np.ndarray
    ic: int

    @property
    def renewal_beta(self) -> np.ndarray:
        """Rows ``0..ic`` of beta with the cutoff row replaced by its left limit."""
        b = self.beta[: self.ic + 1].copy()
        b[self.ic] = self.beta_edge
        return b

    def with_weight(self, weight) -> "CoefficientTables":
        """Tables with ``beta`` multiplied by a per-position weight."""
        w = np.asarray(weight, dtype=float)
        return dataclasses.replace(self, beta=self.beta * w, beta_edge=self.beta_edge * w)


def _evaluate(name, fn, *args, shape):
    with np.errstate(all="ignore"):
        vals = np.broadcast_to(np.asarray(fn(*args), dtype=float), shape).astype(float)
    return vals


def _reject(name, vals, mask, ages, xs, what):
    idx = np.argwhere(mask)[0]
    if vals.ndim == 2:
        loc = f"a={ages[idx[0]]:g}, x={xs[idx[1]]:g}"
    else:
        loc = f"x={xs[idx[0]]:g}"
    raise ValueError(f"{name} is {what} at {loc} (value {vals[tuple(idx)]!r})")


def sample_coefficients(spec: ProblemSpec, grid: Grid) -> CoefficientTables:
    """Evaluate mu, beta and q at the grid nodes."""
    A, X = np.meshgrid(grid.ages, grid.xs, indexing="ij")
    mu = _evaluate("mu", spec.mu, A, X, shape=grid.shape)
    beta = _evaluate("beta", spec.beta, A, X, shape=grid.shape)
    q = _evaluate("q", spec.q, grid.xs, shape=(grid.n_x + 1,))
    edge_age = np.full(grid.n_x + 1, grid.a_c * (1.0 - 1e-12))
    edge = _evaluate("beta", spec.beta, edge_age, grid.xs, shape=(grid.n_x + 1,))
    for name, vals in (("mu", mu), ("beta", beta), ("q", q), ("beta", edge)):
        if not np.all(np.isfinite(vals)):
            _reject(name, vals, ~np.isfinite(vals), grid.ages, grid.xs, "not finite")
        if np.any(vals < 0):
            _reject(name, vals, vals < 0, grid.ages, grid.xs, "negative")
    if np.any(q <= 0):
        _reject("q", q, q <= 0, grid.ages, grid.xs, "not strictly positive")
    beta[grid.ages >= grid.a_c - 1e-12 * grid.a_c] = 0.0
    return CoefficientTables(mu=mu, beta=beta, q=q, beta_edge=edge, ic=grid.ic)


class Extrema(NamedTuple):
    mu_under: np.ndarray
    mu_over: np.ndarray
    beta_under: np.ndarray
    beta_over: np.ndarray


def spatial_extrema(tables: CoefficientTables) -> Extrema:
    """Per-age min/max over space of mu and beta."""
    return Extrema(
        tables.mu.min(axis=1), tables.mu.max(axis=1),
        tables.beta.min(axis=1), tables.beta.max(axis=1),
    )


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class AssumptionReport:
    checks: tuple[Check, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _f_lattice(law: BirthLaw, n: int = 64):
    x = np.linspace(0.0, 1.0, n)
    u = np.concatenate([[0.0], np.logspace(-3.0, 1.5, n - 1)])
    X, U = np.meshgrid(x, u, indexing="ij")
    with np.errstate(all="ignore"):
        F = np.broadcast_to(np.asarray(law.f(X, U), dtype=float), X.shape)
    return x, u, F


def validate_assumptions(spec: ProblemSpec, grid: Grid) -> AssumptionReport:
    """Sampled checks of the standing hypotheses on beta, mu, q and f."""
    checks: list[Check] = []
    A, X = np.meshgrid(grid.ages, grid.xs, indexing="ij")
    with np.errstate(all="ignore"):
        beta = np.broadcast_to(np.asarray(spec.beta(A, X), float), A.shape)
        mu = np.broadcast_to(np.asarray(spec.mu(A, X), float), A.shape)
        q = np.broadcast_to(np.asarray(spec.q(grid.xs), float), grid.xs.shape)
        edge = np.broadcast_to(
            np.asarray(spec.beta(np.full_like(grid.xs, grid.a_c * (1 - 1e-12)), grid.xs), float),
            grid.xs.shape,
        )

    late = grid.ages >= grid.a_c * (1 - 1e-12)
    tail = beta[late]
    checks.append(Check("beta cutoff", bool(np.all(tail == 0.0)),
                        f"max beta for a >= a_c: {np.max(np.abs(tail)) if tail.size else 0.0:g}"))

    fin_beta = bool(np.all(np.isfinite(beta)) and np.all(beta >= 0))
    checks.append(Check("beta nonnegative", fin_beta))

    # int_a^{a_c} min_x beta > 0 for every age node a < a_c
    ic = grid.ic
    lower = beta[: ic + 1].min(axis=1).copy()
    lower[ic] = edge.min()
    seg = 0.5 * (lower[1:] + lower[:-1]) * grid.da
    tail_int = np.cumsum(seg[::-1])[::-1]
    checks.append(Check("underline-beta integral", bool(np.all(tail_int > 0)),
                        f"min tail integral {tail_int.min():g}"))

    checks.append(Check("mu nonnegative finite", bool(np.all(np.isfinite(mu)) and np.all(mu >= 0))))
    checks.append(Check("q positivity", bool(np.all(np.isfinite(q)) and np.all(q > 0)),
                        f"min q {np.nanmin(q):g}"))

    law = spec.f
    x, u, F = _f_lattice(law)
    with np.errstate(all="ignore"):
        fu0 = np.broadcast_to(np.asarray(law.f_u0(x), float), x.shape)
        ratio = F[:, 1:] / u[1:]
        big = np.broadcast_to(np.asarray(law.f(x, np.full_like(x, 1e6)), float), x.shape)
    checks.append(Check("f(x,0) = 0", bool(np.allclose(F[:, 0], 0.0, atol=1e-14))))
    checks.append(Check("f strictly increasing", bool(np.all(np.diff(F, axis=1) > 0)
                                                     and np.all(fu0 > 0))))
    tol = 1e-10 * np.abs(ratio[:, :-1]) + 1e-14
    checks.append(Check("f(x,u)/u non-increasing",
                        bool(np.all(np.isfinite(ratio)) and np.all(np.diff(ratio, axis=1) <= tol))))
    bound = float(law.L) * (1 + 1e-12)
    checks.append(Check("f bounded by L", bool(np.all(F <= bound) and np.all(big <= bound)),
                        f"max sampled f {max(np.nanmax(F), np.nanmax(big)):g}, L={law.L:g}"))
    # slope at zero against a one-sided difference quotient
    h = 1e-7
    with np.errstate(all="ignore"):
        dq = np.asarray(law.f(x, np.full_like(x, h)), float) / h
    checks.append(Check("f_u(x,0) consistent", bool(np.allclose(dq, fu0, rtol=1e-4, atol=1e-6))))
    return AssumptionReport(tuple(checks))
