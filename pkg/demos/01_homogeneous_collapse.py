"""
When space does not matter
==========================

With spatially constant coefficients the growth rate of the population
cannot depend on how fast individuals diffuse or drift. The principal
eigenvalue then equals the root of a scalar renewal equation.

Here birth is 3 on ages [0, 1) and death is 1, so the growth rate alpha
solves 3 (1 - exp(-(alpha + 1))) = alpha + 1.
"""

import numpy as np
from scipy.optimize import brentq

from agepde import build_grid, preset, principal_eigenvalue, sample_coefficients

# the scalar answer, from a one-line root find
s = brentq(lambda s: 3 * (1 - np.exp(-s)) - s, 1.0, 3.0)
alpha = s - 1
print(f"scalar growth rate: {alpha:.8f}")

# the PDE answer for a few very different motility settings
spec = preset("P0")
grid = build_grid(spec, 200, 100)
tables = sample_coefficients(spec, grid)
for d, lam in [(0.5, 0.0), (1.0, 2.0), (2.0, -1.0)]:
    res = principal_eigenvalue(tables, d, lam, grid)
    v = res.eigenfunction
    flat = np.max(v.max(axis=1) - v.min(axis=1))
    print(f"d={d:<4} Lambda={lam:<5} lambda0={res.lambda0:.8f}  "
          f"error={abs(res.lambda0 - alpha):.1e}  spatial spread={flat:.1e}")

# halving both steps cuts the error by four
for n_a, n_x in [(50, 25), (100, 50), (200, 100)]:
    g = build_grid(spec, n_a, n_x)
    lam0 = principal_eigenvalue(sample_coefficients(spec, g), 1.0, 0.0, g).lambda0
    print(f"grid {n_a:>3}x{n_x:<3} error {abs(lam0 - alpha):.3e}")
