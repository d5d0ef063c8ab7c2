"""
Advection and diffusion pick the habitat
========================================

Death now grows toward the left end: mu(x) = 2 - x. The best place to live
is x = 1 (growth rate alpha1), the worst is x = 0 (alpha0), and the spatial
average gives alpha_bar.

* strong drift to the right pins the population at x = 1,
* strong drift to the left pins it at x = 0,
* slow diffusion with a little drift also settles at x = 1,
* fast diffusion averages the habitat.
"""

from agepde import build_grid, compute_limits, preset, principal_eigenvalue, sample_coefficients

spec = preset("P1")
grid = build_grid(spec, 200, 100)
tables = sample_coefficients(spec, grid)
lims = compute_limits(tables, spec.f, grid)
print(f"alpha1={lims.alpha1:.5f} alpha0={lims.alpha0:.5f} alpha_bar={lims.alpha_bar:.5f}")

print("\ndrift, d = 1")
for lam in (10, 30, 100, -10, -30, -100):
    lam0 = principal_eigenvalue(tables, 1.0, lam, grid).lambda0
    target = lims.alpha1 if lam > 0 else lims.alpha0
    print(f"  Lambda={lam:>5}  lambda0={lam0:.5f}  gap to limit {abs(lam0 - target):.4f}")

print("\nslow diffusion, Lambda = 1")
for d, n_x in ((1e-1, 100), (1e-2, 100), (1e-3, 400)):
    g = build_grid(spec, 200, n_x)
    lam0 = principal_eigenvalue(sample_coefficients(spec, g), d, 1.0, g).lambda0
    print(f"  d={d:<6} lambda0={lam0:.5f}  gap to alpha1 {abs(lam0 - lims.alpha1):.4f}")

print("\nfast diffusion, Lambda = 1")
for d in (1, 10, 100):
    lam0 = principal_eigenvalue(tables, d, 1.0, grid).lambda0
    print(f"  d={d:<4} lambda0={lam0:.5f}  gap to alpha_bar {abs(lam0 - lims.alpha_bar):.4f}")
