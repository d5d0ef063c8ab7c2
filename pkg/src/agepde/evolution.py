"""Age marching of the linear age-parabolic problem.

Age plays the role of time. Two boundary gauges are supported:

``neumann``
    ``v_a = d v_xx + Lambda q(x) v_x - mu v`` with ``v_x = 0`` at ``x = 0, 1``.
``flux``
    ``u_a = d u_xx - Lambda u_x - mu u`` with ``d u_x - Lambda u = 0`` at
    ``x = 0, 1``.

The two are related by ``v = exp(-(Lambda/d) x) u`` when ``q = 1``.

Age-stepping schemes:

``cn``      Crank-Nicolson, second order; not positivity preserving once
            ``da * d / dx**2`` is large.
``euler``   backward Euler, first order, monotone.
``split``   exact death factor ``exp(-mu da / 2)`` on both sides of a backward
            Euler transport step; monotone, conservative for ``mu = 0`` and
            exact for spatially constant profiles.

Death rates are taken at the age midpoint of each step.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import solve_banded

from .model import CoefficientTables, Grid

__all__ = [
    "EvolutionError",
    "Trajectory",
    "Tridiag",
    "bernoulli",
    "peclet",
    "neumann_generator",
    "flux_generator",
    "AgeStepper",
    "step_neumann",
    "step_flux",
    "propagate",
    "gauge_transform",
]

SCHEMES = ("cn", "euler", "split")
ADVECTION = ("hybrid", "fitted")


class EvolutionError(RuntimeError):
    """A linear solve inside an age step failed."""


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Rows ``j = 0..n`` hold the profile at age ``a_j``."""

    values: np.ndarray
    gauge: str
    ages: np.ndarray

    def __post_init__(self):
        if self.gauge not in ("neumann", "flux"):
            raise ValueError(f"unknown gauge {self.gauge!r}")

    def rows(self, xs):
        """Iterate ``(a, x, value)`` in age-major order."""
        for a, row in zip(self.ages, self.values):
            for x, v in zip(xs, row):
                yield a, x, v


@dataclass(frozen=True, eq=False)
class Tridiag:
    """Tridiagonal matrix; ``lower[0]`` and ``upper[-1]`` are unused."""

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        lo = self.lower.reshape((-1,) + (1,) * (v.ndim - 1))
        di = self.diag.reshape(lo.shape)
        up = self.upper.reshape(lo.shape)
        out = di * v
        out[1:] += lo[1:] * v[:-1]
        out[:-1] += up[:-1] * v[1:]
        return out

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.lower[1:], -1) + np.diag(self.upper[:-1], 1)

    def scaled(self, c: float, shift: float = 0.0) -> "Tridiag":
        """``shift * I + c * self``."""
        return Tridiag(c * self.lower, shift + c * self.diag, c * self.upper)


def bernoulli(z):
    """``z / (exp(z) - 1)`` with the removable singularity filled in."""
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    nz = np.abs(z) > 1e-10
    with np.errstate(over="ignore"):
        out[nz] = z[nz] / np.expm1(z[nz])
    out[~nz] = 1.0 - 0.5 * z[~nz]
    return out


def peclet(q: np.ndarray, d: float, lambda_adv: float, dx: float) -> float:
    """Cell Peclet number ``|Lambda| max q dx / (2 d)``."""
    return abs(lambda_adv) * float(np.max(np.abs(q))) * dx / (2.0 * d)


def neumann_generator(mu_row, q, d, lambda_adv, dx, advection="hybrid") -> Tridiag:
    """Spatial operator ``d v_xx + Lambda q v_x - mu v`` with mirror Neumann ends.

    ``hybrid`` differences advection centrally while the cell Peclet number
    is at most 1 and upwind otherwise. ``fitted`` uses exponentially fitted
    coefficients, which make this operator exactly similar to the
    Scharfetter-Gummel flux operator under the gauge transform.
    """
    if advection not in ADVECTION:
        raise ValueError(f"advection must be one of {ADVECTION}")
    mu_row = np.asarray(mu_row, dtype=float)
    q = np.asarray(q, dtype=float)
    n1 = q.size
    k = d / dx**2
    if advection == "fitted":
        pe = lambda_adv * 0.5 * (q[1:] + q[:-1]) * dx / d
        upper = np.zeros(n1)
        lower = np.zeros(n1)
        upper[:-1] = k * bernoulli(-pe)
        lower[1:] = k * bernoulli(pe)
        upper[0] *= 2.0
        lower[-1] *= 2.0
    else:
        s = lambda_adv * q / dx
        if peclet(q, d, lambda_adv, dx) <= 1.0:
            up, lo = k + 0.5 * s, k - 0.5 * s
        elif lambda_adv > 0:
            up, lo = k + s, np.full(n1, k)
        else:
            up, lo = np.full(n1, k), k - s
        upper = up.copy()
        lower = lo.copy()
        # ghost node v_{-1} = v_1, v_{n+1} = v_{n-1}
        upper[0] = up[0] + lo[0]
        lower[-1] = up[-1] + lo[-1]
        lower[0] = 0.0
        upper[-1] = 0.0
    diag = -(lower + upper) - mu_row
    return Tridiag(lower, diag, upper)


def flux_generator(mu_row, d, lambda_adv, dx) -> Tridiag:
    """Spatial operator ``d u_xx - Lambda u_x - mu u`` with zero total flux ends.

    Finite-volume form with Scharfetter-Gummel face fluxes
    ``J = (d/dx) (B(Pe) u_{i+1} - B(-Pe) u_i)``, ``Pe = Lambda dx / d``. Half
    cells at the ends carry ``J = 0``; trapezoid mass is conserved exactly
    and ``exp((Lambda/d) x)`` is an exact null vector.
    """
    mu_row = np.asarray(mu_row, dtype=float)
    n1 = mu_row.size
    k = d / dx**2
    pe = lambda_adv * dx / d
    bp, bm = float(bernoulli(pe)), float(bernoulli(-pe))
    upper = np.full(n1, k * bp)
    lower = np.full(n1, k * bm)
    diag = np.full(n1, -k * (bp + bm))
    upper[0] = 2 * k * bp
    diag[0] = -2 * k * bm
    lower[-1] = 2 * k * bm
    diag[-1] = -2 * k * bp
    lower[0] = 0.0
    upper[-1] = 0.0
    return Tridiag(lower, diag - mu_row, upper)


def _banded(t: Tridiag) -> np.ndarray:
    ab = np.zeros((3, t.diag.size))
    ab[0, 1:] = t.upper[:-1]
    ab[1] = t.diag
    ab[2, :-1] = t.lower[1:]
    return ab


class AgeStepper:
    """Precomputed step operators for every age interval of a grid.

    Step ``j`` maps the profile at ``a_j`` to the profile at ``a_{j+1}`` as
    ``post * A_j^{-1} (B_j (pre * v))``.
    """

    def __init__(self, implicit: list[Tridiag], explicit: list[Tridiag | None],
                 pre: np.ndarray, post: np.ndarray, gauge: str, scheme: str):
        self.implicit = implicit
        self.explicit = explicit
        self.pre = pre
        self.post = post
        self.gauge = gauge
        self.scheme = scheme
        self._banded = [_banded(t) for t in implicit]

    @classmethod
    def build(cls, tables: CoefficientTables, d: float, lambda_adv: float, da: float, dx: float,
              *, gauge: str = "neumann", scheme: str = "cn", advection: str = "hybrid",
              n_steps: int | None = None) -> "AgeStepper":
        if scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if not d > 0:
            raise ValueError("d must be positive")
        n_steps = tables.mu.shape[0] - 1 if n_steps is None else n_steps
        mu_mid = 0.5 * (tables.mu[1 : n_steps + 1] + tables.mu[:n_steps])
        n1 = tables.mu.shape[1]
        implicit, explicit = [], []
        if scheme == "split":
            pre = np.exp(-0.5 * da * mu_mid)
            post = pre
        else:
            pre = post = np.ones((n_steps, n1))
        for j in range(n_steps):
            mu_j = np.zeros(n1) if scheme == "split" else mu_mid[j]
            if gauge == "neumann":
                L = neumann_generator(mu_j, tables.q, d, lambda_adv, dx, advection)
            elif gauge == "flux":
                L = flux_generator(mu_j, d, lambda_adv, dx)
            else:
                raise ValueError(f"unknown gauge {gauge!r}")
            if scheme == "cn":
                implicit.append(L.scaled(-0.5 * da, 1.0))
                explicit.append(L.scaled(0.5 * da, 1.0))
            else:
                implicit.append(L.scaled(-da, 1.0))
                explicit.append(None)
        return cls(implicit, explicit, pre, post, gauge, scheme)

    def __len__(self) -> int:
        return len(self.implicit)

    def step(self, j: int, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        shape = (-1,) + (1,) * (v.ndim - 1)
        rhs = self.pre[j].reshape(shape) * v
        if self.explicit[j] is not None:
            rhs = self.explicit[j].matvec(rhs)
        try:
            out = solve_banded((1, 1), self._banded[j], rhs, check_finite=False)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise EvolutionError(f"tridiagonal solve failed at age index {j}: {exc}") from exc
        out = self.post[j].reshape(shape) * out
        if not np.all(np.isfinite(out)):
            raise EvolutionError(f"non-finite state after step at age index {j}")
        return out

    def block_system(self):
        """Block-diagonal form of all steps at once, for batched marching.

        Returns ``(solve, B, pre, post)`` where ``solve`` is a factorized
        solver for the stacked implicit matrices and ``B`` the stacked
        explicit matrices (identity for one-stage schemes).
        """
        lower = np.concatenate([t.lower for t in self.implicit])
        diag = np.concatenate([t.diag for t in self.implicit])
        upper = np.concatenate([t.upper for t in self.implicit])
        n = diag.size
        A = sp.diags([lower[1:], diag, upper[:-1]], [-1, 0, 1], shape=(n, n), format="csc")
        solve = spla.factorized(A)
        if self.explicit[0] is None:
            B = sp.identity(n, format="csr")
        else:
            bl = np.concatenate([t.lower for t in self.explicit])
            bd = np.concatenate([t.diag for t in self.explicit])
            bu = np.concatenate([t.upper for t in self.explicit])
            B = sp.diags([bl[1:], bd, bu[:-1]], [-1, 0, 1], shape=(n, n), format="csr")
        return solve, B, self.pre, self.post


def _single(tables, j, d, lambda_adv, da, dx, gauge, scheme, advection) -> AgeStepper:
    if not 0 <= j < tables.mu.shape[0] - 1:
        raise ValueError(f"age index {j} out of range")
    sub = CoefficientTables(mu=tables.mu[j : j + 2], beta=tables.beta[j : j + 2], q=tables.q,
                            beta_edge=tables.beta_edge, ic=tables.ic)
    return AgeStepper.build(sub, d, lambda_adv, da, dx, gauge=gauge, scheme=scheme,
                            advection=advection)


def step_neumann(state, age_index, tables, d, lambda_adv, da, dx, *, scheme="cn",
                 advection="hybrid") -> np.ndarray:
    """One age step of the Neumann-gauge problem from ``a_j`` to ``a_{j+1}``."""
    stepper = _single(tables, age_index, d, lambda_adv, da, dx, "neumann", scheme, advection)
    try:
        return stepper.step(0, state)
    except EvolutionError as exc:
        raise EvolutionError(str(exc).replace("age index 0", f"age index {age_index}")) from exc


def step_flux(state, age_index, tables, d, lambda_adv, da, dx, *, scheme="cn") -> np.ndarray:
    """One age step of the flux-gauge problem from ``a_j`` to ``a_{j+1}``."""
    stepper = _single(tables, age_index, d, lambda_adv, da, dx, "flux", scheme, "fitted")
    try:
        return stepper.step(0, state)
    except EvolutionError as exc:
        raise EvolutionError(str(exc).replace("age index 0", f"age index {age_index}")) from exc


def propagate(phi, tables: CoefficientTables, d: float, lambda_adv: float, grid: Grid, *,
              gauge: str = "neumann", scheme: str = "cn", advection: str = "hybrid",
              stepper: AgeStepper | None = None, n_steps: int | None = None) -> Trajectory:
    """March ``phi`` from age 0 through ``n_steps`` age steps (default: all).

    ``phi`` may carry extra trailing columns, which are marched independently.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.shape[0] != grid.n_x + 1:
        raise ValueError(f"profile has {phi.shape[0]} nodes, grid has {grid.n_x + 1}")
    if not np.all(np.isfinite(phi)):
        raise ValueError("initial profile is not finite")
    if stepper is None:
        stepper = AgeStepper.build(tables, d, lambda_adv, grid.da, grid.dx, gauge=gauge,
                                   scheme=scheme, advection=advection, n_steps=n_steps)
    n_steps = len(stepper) if n_steps is None else n_steps
    out = np.empty((n_steps + 1,) + phi.shape)
    out[0] = phi
    for j in range(n_steps):
        out[j + 1] = stepper.step(j, out[j])
    return Trajectory(out, stepper.gauge, grid.ages[: n_steps + 1].copy())


def gauge_transform(field, d: float, lambda_adv: float, xs, direction: str = "to_neumann"):
    """Multiply by ``exp(-(Lambda/d) x)`` (``to_neumann``) or its inverse (``to_flux``).

    Accepts a profile, a 2-D (age x space) array or a :class:`Trajectory`.
    """
    if not d > 0:
        raise ValueError("d must be positive")
    xs = np.asarray(xs, dtype=float)
    k = lambda_adv / d
    if xs.size > 1 and abs(k) * (xs[1] - xs[0]) > 30:
        warnings.warn(f"gauge factor exp({k:g} x) varies by more than e^30 per cell",
                      RuntimeWarning, stacklevel=2)
    if direction == "to_neumann":
        g = np.exp(-k * xs)
        gauge = "neumann"
    elif direction == "to_flux":
        g = np.exp(k * xs)
        gauge = "flux"
    else:
        raise ValueError("direction must be 'to_neumann' or 'to_flux'")
    if isinstance(field, Trajectory):
        return Trajectory(field.values * g, gauge, field.ages)
    return np.asarray(field, dtype=float) * g
