import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid
from scipy.optimize import brentq

from conftest import scalar_root

from agepde.limits import (
    RootError,
    ScalarRenewalKernel,
    characteristic_root,
    compute_limits,
    cumulative_death,
    gamma_threshold,
    limit_values,
    per_position_roots,
    u_star_profile,
    v_star_profile,
)
from agepde.model import build_grid, holling_ii, preset, sample_coefficients, trapezoid_weights


def _kernel(beta, mu, n=200):
    da = 1.0 / n
    return ScalarRenewalKernel(np.full(n + 1, beta), cumulative_death(np.full(n + 1, mu), da), da)


def _setup(name, n_a=200, n_x=50, **kw):
    spec = preset(name, **kw)
    grid = build_grid(spec, n_a, n_x)
    return spec, grid, sample_coefficients(spec, grid)


def test_identity_kernel_root_is_zero():
    assert characteristic_root(_kernel(1.0, 0.0)) == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("mu", [1.0, 2.0])
def test_root_matches_scalar_oracle(mu):
    assert characteristic_root(_kernel(3.0, mu)) == pytest.approx(scalar_root(3.0, mu), abs=1e-4)


def test_shift_structure_is_exact():
    a1 = characteristic_root(_kernel(3.0, 1.0))
    a2 = characteristic_root(_kernel(3.0, 2.0))
    assert a1 - a2 == pytest.approx(1.0, abs=1e-9)


def test_root_residual_and_resolution_drift():
    k = _kernel(3.0, 1.0)
    alpha = characteristic_root(k)
    assert abs(k(alpha) - 1.0) <= 1e-9
    fine = _kernel(3.0, 1.0, n=400)
    assert abs(fine(alpha) - 1.0) <= 1e-4


def test_root_errors():
    with pytest.raises(RootError, match="no mass"):
        characteristic_root(_kernel(0.0, 1.0))
    with pytest.raises(ValueError, match="nonnegative"):
        ScalarRenewalKernel(np.array([-1.0, 1.0]), np.zeros(2), 0.5)
    with pytest.raises(ValueError, match="non-decreasing"):
        ScalarRenewalKernel(np.ones(3), np.array([0.0, 1.0, 0.5]), 0.5)


def test_weak_kernel_reported():
    # fertility only at birth: F is the constant w_0 beta_0 < 1 for every alpha
    n = 200
    beta = np.zeros(n + 1)
    beta[0] = 0.1
    k = ScalarRenewalKernel(beta, cumulative_death(np.full(n + 1, 1.0), 1 / n), 1 / n)
    with pytest.raises(RootError):
        characteristic_root(k)


def test_limit_values_on_p1(s_star):
    spec, grid, t = _setup("P1")
    a1, a0, amax, abar = limit_values(t, grid)
    assert a1 == pytest.approx(s_star - 1.0, abs=1e-4)
    assert a0 == pytest.approx(s_star - 2.0, abs=1e-4)
    assert amax == pytest.approx(a1, abs=1e-12)
    assert abar == pytest.approx(s_star - 1.5, abs=1e-4)


def test_homogeneous_limits_coincide():
    spec, grid, t = _setup("P0")
    vals = limit_values(t, grid)
    assert np.ptp(vals) < 1e-9


def test_interior_peak_maximum_in_middle(s_star):
    spec, grid, t = _setup("interior_peak", n_x=100)
    roots = per_position_roots(t, grid)
    assert np.argmax(roots) == 50
    a1, a0, amax, _ = limit_values(t, grid)
    assert amax == pytest.approx(s_star - 1.0, abs=1e-4)
    assert a0 == pytest.approx(s_star - 2.0, abs=1e-4) and a1 == pytest.approx(a0, abs=1e-12)
    assert amax > max(a0, a1)


def test_gamma_closed_forms():
    spec, grid, t = _setup("P1")
    thr = gamma_threshold(t, spec.f, grid)
    assert thr.gamma[-1] == pytest.approx(3 * (1 - np.exp(-1.0)), abs=1e-4)
    assert thr.gamma[0] == pytest.approx(1.5 * (1 - np.exp(-2.0)), abs=1e-4)
    assert thr.hypotheses["downstream"] and thr.hypotheses["max"] and thr.hypotheses["average"]


def test_gamma_identity_case():
    spec = preset("P0").replace(mu=lambda a, x: 0 * np.asarray(a) * np.asarray(x),
                                beta=lambda a, x: np.where(np.asarray(a) < 1, 1.0, 0.0) + 0 * np.asarray(x))
    grid = build_grid(spec, 50, 10)
    thr = gamma_threshold(sample_coefficients(spec, grid), spec.f, grid)
    assert np.allclose(thr.gamma, 1.0, atol=1e-12)
    assert not thr.hypotheses["downstream"]


def test_v_star_closed_forms():
    spec, grid, t = _setup("P1")
    vs = v_star_profile(t, spec.f, grid)
    gamma1 = 3 * (1 - np.exp(-1.0))
    assert vs.field[0, -1] == pytest.approx(1 - 1 / gamma1, abs=1e-4)
    assert np.allclose(vs.field[:, -1], vs.field[0, -1] * np.exp(-grid.ages), rtol=1e-12)
    # renewal residual against the same trapezoid rule
    K = trapezoid_weights(grid.ic, grid.da) @ (t.renewal_beta * np.exp(-cumulative_death(t.mu, grid.da)))
    v0 = vs.field[0]
    assert np.max(np.abs(spec.f(grid.xs, v0 * K) - v0)) < 1e-8


def test_v_star_two_fixed_point():
    # K = 2 under Holling II gives v0 = 1/2
    spec = preset("P0").replace(mu=lambda a, x: 0 * np.asarray(a) * np.asarray(x),
                                beta=lambda a, x: np.where(np.asarray(a) < 1, 2.0, 0.0) + 0 * np.asarray(x))
    grid = build_grid(spec, 20, 10)
    vs = v_star_profile(sample_coefficients(spec, grid), spec.f, grid)
    assert np.allclose(vs.field, 0.5, atol=1e-12)


def test_v_star_vanishes_at_threshold():
    spec = preset("P0").replace(mu=lambda a, x: 0 * np.asarray(a) * np.asarray(x),
                                beta=lambda a, x: np.where(np.asarray(a) < 1, 1.0, 0.0) + 0 * np.asarray(x))
    grid = build_grid(spec, 20, 10)
    vs = v_star_profile(sample_coefficients(spec, grid), spec.f, grid)
    assert np.all(vs.field == 0.0) and not np.any(vs.positive)


def test_u_star_homogeneous_closed_form():
    spec, grid, t = _setup("P0")
    us = u_star_profile(t, spec.f, grid)
    K = 3 * (1 - np.exp(-1.0))
    assert us.exists
    assert us.u0 == pytest.approx((K - 1) / K, abs=1e-4)
    assert np.allclose(us.profile, us.u0 * np.exp(-grid.ages), rtol=1e-12)


def test_u_star_subcritical_flagged():
    spec, grid, t = _setup("subcritical")
    us = u_star_profile(t, spec.f, grid)
    assert not us.exists and np.all(us.profile == 0.0)


def test_u_star_against_dense_quadrature_oracle():
    gain = lambda x: 1.0 + np.asarray(x, float)
    spec = preset("P0", f=holling_ii(gain=gain))
    grid = build_grid(spec, 8000, 16)
    us = u_star_profile(sample_coefficients(spec, grid), spec.f, grid)
    # oracle: one million point trapezoid in age and in space, then brentq
    a = np.linspace(0.0, 1.0, 1_000_001)
    K = trapezoid(3.0 * np.exp(-a), a)
    x = np.linspace(0.0, 1.0, 1_000_001)
    g = gain(x)
    U0 = brentq(lambda U: trapezoid(g * U * K / (1 + U * K), x) - U, 1e-6, 2.0, xtol=1e-15)
    assert us.u0 == pytest.approx(U0, abs=1e-8)


def test_scaled_birth_law_raises_fixed_points():
    spec, grid, t = _setup("P1")
    big = spec.f.scaled(1.5)
    assert np.all(v_star_profile(t, big, grid).field[0] > v_star_profile(t, spec.f, grid).field[0])
    assert u_star_profile(t, big, grid).u0 > u_star_profile(t, spec.f, grid).u0


def test_limit_set_json_keys():
    spec, grid, t = _setup("P1")
    d = compute_limits(t, spec.f, grid).to_dict()
    assert set(d) == {"alpha1", "alpha0", "alpha_max", "alpha_bar", "gamma", "hypotheses"}
    assert len(d["gamma"]) == grid.n_x + 1


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 2.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_more_death_never_raises_limits(bump, centre, width):
    spec, grid, t = _setup("P1", n_a=50, n_x=20)
    base = limit_values(t, grid)
    extra = bump * np.exp(-((grid.xs - centre) ** 2) / (0.01 + width))
    worse = type(t)(t.mu + extra, t.beta, t.q, t.beta_edge, t.ic)
    new = limit_values(worse, grid)
    assert all(n <= b + 1e-12 for n, b in zip(new, base))
