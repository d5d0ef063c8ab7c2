"""Next-generation operator and the principal eigenvalue.

For a trial growth rate ``lam`` the next-generation operator maps a newborn
profile ``phi`` to the newborns it produces,

    M_lam phi = int_0^{a_c} beta(a, .) exp(-lam a) (U(a, 0) phi) da,

where ``U`` is the age evolution of :mod:`agepde.evolution`. Its spectral
radius decreases strictly in ``lam``; the principal eigenvalue is the unique
``lam`` with radius 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .evolution import AgeStepper, propagate
from .limits import RootError, ScalarRenewalKernel, characteristic_root, cumulative_death
from .model import CoefficientTables, Grid, trapezoid_weights

__all__ = [
    "SpectralError",
    "EigenResult",
    "NextGenerationOperator",
    "apply_M",
    "power_iteration",
    "spectral_radius",
    "eigen_bounds",
    "principal_eigenvalue",
]

R_TOL = 1e-10
MAX_POWER_ITERS = 2000
LAMBDA_TOL = 1e-8


class SpectralError(RuntimeError):
    pass


def _renewal_weights(tables: CoefficientTables, grid: Grid) -> np.ndarray:
    """Trapezoid weight times birth rate on age rows ``0..ic``."""
    return trapezoid_weights(grid.ic, grid.da)[:, None] * tables.renewal_beta


def apply_M(lam: float, phi, tables: CoefficientTables, d: float, lambda_adv: float, grid: Grid,
            **scheme) -> np.ndarray:
    """Newborns produced by the cohort ``phi`` at growth rate ``lam``."""
    traj = propagate(phi, tables, d, lambda_adv, grid, n_steps=grid.ic, **scheme)
    disc = np.exp(-lam * grid.ages[: grid.ic + 1])
    W = _renewal_weights(tables, grid) * disc[:, None]
    if traj.values.ndim == 3:
        return np.einsum("ji,jik->ik", W, traj.values)
    return np.einsum("ji,ji->i", W, traj.values)


class NextGenerationOperator:
    """Assembled matrices of ``M_lam`` for one ``(d, Lambda)``.

    The dependence on ``lam`` is only through the scalar discount
    ``exp(-lam a_j)``, so the weighted evolution matrices are built once
    and recombined for every trial ``lam``.
    """

    def __init__(self, tables: CoefficientTables, d: float, lambda_adv: float, grid: Grid, *,
                 gauge: str = "neumann", scheme: str = "cn", advection: str = "hybrid"):
        self.tables = tables
        self.grid = grid
        self.d = d
        self.lambda_adv = lambda_adv
        self.stepper = AgeStepper.build(tables, d, lambda_adv, grid.da, grid.dx, gauge=gauge,
                                        scheme=scheme, advection=advection)
        W = _renewal_weights(tables, grid)
        n1 = grid.n_x + 1
        K = np.empty((grid.ic + 1, n1, n1))
        P = np.eye(n1)
        K[0] = W[0][:, None] * P
        for j in range(grid.ic):
            P = self.stepper.step(j, P)
            K[j + 1] = W[j + 1][:, None] * P
        self._stack = K
        self._ages = grid.ages[: grid.ic + 1]

    def matrix(self, lam: float) -> np.ndarray:
        return np.tensordot(np.exp(-lam * self._ages), self._stack, axes=1)

    def __call__(self, lam: float, phi) -> np.ndarray:
        return self.matrix(lam) @ np.asarray(phi, dtype=float)

    def trajectory(self, phi, lam: float = 0.0) -> np.ndarray:
        """``exp(-lam a_j) U(a_j, 0) phi`` over every age node of the grid."""
        traj = propagate(phi, self.tables, self.d, self.lambda_adv, self.grid, stepper=self.stepper)
        return traj.values * np.exp(-lam * self.grid.ages)[:, None]


def power_iteration(matvec, x0, tol: float = R_TOL, max_iters: int = MAX_POWER_ITERS):
    """Dominant eigenpair of a positive operator.

    Iterates are normalized to sup-norm 1. The radius estimate is the
    sup-norm growth factor averaged over the last two steps.

    Returns ``(r, x, iterations)``.
    """
    x = np.asarray(x0, dtype=float)
    x = x / np.max(np.abs(x))
    prev_rho = prev_est = None
    for k in range(1, max_iters + 1):
        y = matvec(x)
        rho = float(np.max(np.abs(y)))
        if rho == 0.0:
            return 0.0, x, k
        x = y / rho
        if prev_rho is not None:
            est = 0.5 * (rho + prev_rho)
            if prev_est is not None and abs(est - prev_est) < tol:
                return est, x, k
            prev_est = est
        prev_rho = rho
    gap = abs(est - prev_est) if prev_est is not None else float("nan")
    raise SpectralError(f"power iteration did not converge in {max_iters} steps; "
                        f"last estimate gap {gap:.3e}")


def spectral_radius(lam: float, tables: CoefficientTables, d: float, lambda_adv: float, grid: Grid,
                    tol: float = R_TOL, max_iters: int = MAX_POWER_ITERS, *, start=None,
                    operator: NextGenerationOperator | None = None, **scheme):
    """``(r(M_lam), principal profile)`` by power iteration from ``start`` (default 1)."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    x0 = np.ones(grid.n_x + 1) if start is None else np.asarray(start, dtype=float)
    if operator is not None:
        A = operator.matrix(lam)
        matvec = A.__matmul__
    else:
        matvec = lambda v: apply_M(lam, v, tables, d, lambda_adv, grid, **scheme)
    r, x, _ = power_iteration(matvec, x0, tol, max_iters)
    return r, x


def _kernel_bound(beta_row, mu_row, grid) -> float:
    kern = ScalarRenewalKernel(beta_row, cumulative_death(mu_row, grid.da)[: grid.ic + 1], grid.da)
    return characteristic_root(kern)


def eigen_bounds(tables: CoefficientTables, grid: Grid) -> tuple[float, float]:
    """``(lambda_lo, lambda_hi)`` from the worst- and best-case local kernels.

    ``lambda_hi`` pairs the largest birth rate with the smallest death rate at
    every age, ``lambda_lo`` the smallest birth rate with the largest death rate.
    """
    rb = tables.renewal_beta
    hi = _kernel_bound(rb.max(axis=1), tables.mu.min(axis=1), grid)
    try:
        lo = _kernel_bound(rb.min(axis=1), tables.mu.max(axis=1), grid)
    except RootError as exc:
        raise RootError(f"bracket undefined: {exc}") from exc
    return lo, hi


@dataclass(eq=False)
class EigenResult:
    lambda0: float
    eigenfunction: np.ndarray = field(repr=False)
    r_residual: float
    pde_residual: float
    bracket: tuple[float, float]
    iterations: dict

    def to_dict(self) -> dict:
        return {
            "lambda0": self.lambda0,
            "r_residual": self.r_residual,
            "pde_residual": self.pde_residual,
            "bracket": [self.bracket[0], self.bracket[1]],
            "iterations": dict(self.iterations),
        }


class _Radius:
    """Warm-started radius evaluations with a dense fallback."""

    def __init__(self, op: NextGenerationOperator, tol, max_iters):
        self.op = op
        self.tol = tol
        self.max_iters = max_iters
        self.x = np.ones(op.grid.n_x + 1)
        self.power_steps = 0
        self.dense = 0
        self.use_dense = False

    def __call__(self, lam):
        A = self.op.matrix(lam)
        if not self.use_dense:
            try:
                r, x, k = power_iteration(A.__matmul__, self.x, self.tol, self.max_iters)
                self.power_steps += k
                self.x = x
                return r, x
            except SpectralError:
                # near-degenerate spectrum (tiny diffusion): the power method stalls
                self.use_dense = True
        self.dense += 1
        w, V = np.linalg.eig(A)
        i = int(np.argmax(np.abs(w)))
        x = np.real(V[:, i])
        x = x / x[np.argmax(np.abs(x))]
        self.x = x
        return float(np.abs(w[i])), x


def principal_eigenvalue(tables: CoefficientTables, d: float, lambda_adv: float, grid: Grid,
                         tol_lambda: float = LAMBDA_TOL, *, weight=None, gauge: str = "neumann",
                         scheme: str = "cn", advection: str = "hybrid", r_tol: float = R_TOL,
                         max_iters: int = MAX_POWER_ITERS) -> EigenResult:
    """Principal eigenvalue by bisection on ``r(M_lam) - 1``.

    ``weight`` multiplies the birth rate pointwise in space (the renewal
    weight ``f_u(x, 0)`` of a linearized nonlinear model).
    """
    if weight is not None:
        tables = tables.with_weight(weight)
    lo, hi = eigen_bounds(tables, grid)
    op = NextGenerationOperator(tables, d, lambda_adv, grid, gauge=gauge, scheme=scheme,
                                advection=advection)
    radius = _Radius(op, r_tol, max_iters)

    r_lo, _ = radius(lo)
    r_hi, _ = radius(hi)
    for _ in range(50):
        if r_lo >= 1.0 and r_hi <= 1.0:
            break
        if r_lo < 1.0:
            lo -= 1.0
            r_lo, _ = radius(lo)
        if r_hi > 1.0:
            hi += 1.0
            r_hi, _ = radius(hi)
    else:
        raise SpectralError(f"no root in search window [{lo}, {hi}]")
    bracket0 = (lo, hi)

    n_bisect = 0
    while hi - lo >= tol_lambda:
        mid = 0.5 * (lo + hi)
        r_mid, _ = radius(mid)
        n_bisect += 1
        if r_mid > 1.0:
            lo, r_lo = mid, r_mid
        else:
            hi, r_hi = mid, r_mid
    # secant point inside the final bracket
    lam0 = lo + (r_lo - 1.0) / (r_lo - r_hi) * (hi - lo) if r_lo != r_hi else 0.5 * (lo + hi)
    r0, phi = radius(lam0)
    phi = phi / np.max(np.abs(phi))

    values = op.trajectory(phi, lam0)
    values /= np.max(np.abs(values))
    pde_res = _discrete_residual(op, values, lam0, grid)

    return EigenResult(
        lambda0=float(lam0),
        eigenfunction=values,
        r_residual=abs(r0 - 1.0),
        pde_residual=pde_res,
        bracket=(float(lo), float(hi)),
        iterations={"bisection": n_bisect, "power": radius.power_steps,
                    "dense": radius.dense, "initial_bracket": list(bracket0)},
    )


def _discrete_residual(op: NextGenerationOperator, v: np.ndarray, lam: float, grid: Grid) -> float:
    """Sup-norm residual of the discrete eigenproblem.

    Age steps are checked on interior space nodes (per unit age) and the
    renewal condition at every node.
    """
    st = op.stepper
    decay = np.exp(-lam * grid.da)
    worst = 0.0
    for j in range(len(st)):
        pred = decay * st.step(j, v[j])
        worst = max(worst, float(np.max(np.abs(v[j + 1, 1:-1] - pred[1:-1]))) / grid.da)
    W = _renewal_weights(op.tables, grid)
    births = np.einsum("ji,ji->i", W, v[: grid.ic + 1])
    return max(worst, float(np.max(np.abs(v[0] - births))))
