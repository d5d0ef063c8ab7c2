"""
The long-time state of the nonlinear model
==========================================

Newborns follow a saturating Holling II law f(u) = u / (1 + u). When the
population can grow from low density it settles on one positive
equilibrium whatever the starting state. Strong drift washes it out of the
habitat, while the diffusion rate decides whether each location keeps its
own local equilibrium or the whole profile flattens out.
"""

import numpy as np

from agepde import build_grid, equilibrium, mass_curves, preset, profile_checks, sample_coefficients
from agepde.limits import v_star_profile

# one equilibrium, reached from above
spec = preset("P1", d=1.0, lambda_adv=1.0)
grid = build_grid(spec, 100, 50)
tables = sample_coefficients(spec, grid)
eq = equilibrium(tables, spec.f, spec.d, spec.lambda_adv, grid)
print(f"{eq.classification}: sup u* = {eq.u_star_field.max():.5f}, reached at t = {eq.t_reached:.2f}")
print(f"second run from a small start lands {eq.cross_check_distance:.1e} away")

# drift pushes the population against the downstream wall and starves it
spec = preset("P1", d=0.05)
rows = mass_curves(spec, build_grid(spec, 100, 100), "lambda_adv", [0.0, 1.0, 10.0, 50.0])
for r in rows:
    print(f"Lambda={r['parameter']:>5}: newborn mass {r['mass'][0]:.5f}")

# slow diffusion: the local fixed point at every x
spec = preset("P1", d=1e-3)
grid = build_grid(spec, 100, 200)
tables = sample_coefficients(spec, grid)
v = v_star_profile(tables, spec.f, grid).field
print("local newborn densities at x = 0, 0.5, 1:", np.round(v[0, [0, 100, 200]], 5))
print("small-diffusion check:", profile_checks(spec, grid, "small_d_no_advection"))

# fast diffusion: flat in space
spec = preset("P1", d=100.0, lambda_adv=1.0)
print("large-diffusion check:", profile_checks(spec, build_grid(spec, 100, 50), "large_d"))
