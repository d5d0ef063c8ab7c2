import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agepde.model import (
    BirthLaw,
    ProblemSpec,
    build_grid,
    holling_ii,
    logistic,
    preset,
    sample_coefficients,
    spatial_extrema,
    tabulated,
    trapezoid_weights,
    validate_assumptions,
)


def test_presets_have_expected_coefficients():
    p1 = preset("P1")
    x = np.linspace(0, 1, 5)
    assert np.allclose(p1.mu(0.3, x), 2.0 - x)
    assert np.allclose(p1.beta(np.array([0.0, 0.5, 0.999, 1.0, 1.2]), 0.5), [3, 3, 3, 0, 0])
    assert np.allclose(preset("P0").mu(0.2, x), 1.0)
    assert np.allclose(preset("interior_peak").mu(0.0, x), 1 + 4 * (x - 0.5) ** 2)
    sub = preset("subcritical")
    assert np.allclose(sub.beta(0.5, x), 0.9) and np.allclose(sub.mu(0.5, x), 0.0)


def test_preset_overrides_and_unknown_name():
    spec = preset("P1", d=0.5, lambda_adv=-2.0)
    assert (spec.d, spec.lambda_adv, spec.a_plus) == (0.5, -2.0, 1.0)
    with pytest.raises(KeyError, match="unknown preset"):
        preset("P9")


@pytest.mark.parametrize("kw", [{"d": 0.0}, {"d": -1.0}, {"a_plus": 0.5}])
def test_spec_rejects_bad_parameters(kw):
    with pytest.raises(ValueError):
        preset("P0", **kw)


def test_grid_places_cutoff_on_node():
    g = build_grid(preset("P0"), 200, 100)
    assert g.ic == 200 and g.ages[g.ic] == pytest.approx(1.0)
    g = build_grid(preset("P0", a_plus=1.5), 300, 50)
    assert g.ic == 200 and g.da == pytest.approx(1 / 200)
    # 1.37 / a_c = 1.37 is commensurate only with multiples of 137
    g = build_grid(preset("P0", a_plus=1.37), 140, 20)
    assert abs(g.ages[g.ic] - 1.0) < 1e-12
    assert abs(g.da - 1.37 / 140) <= 0.01 * 1.37 / 140


def test_grid_too_coarse_rejected():
    with pytest.raises(ValueError, match="n_a >= 8"):
        build_grid(preset("P0"), 4, 50)


def test_trapezoid_weights_integrate_linear_exactly():
    w = trapezoid_weights(10, 0.1)
    x = np.linspace(0, 1, 11)
    assert w.sum() == pytest.approx(1.0)
    assert w @ (3 * x + 1) == pytest.approx(2.5)


def test_sampled_tables_cut_birth_and_keep_left_limit():
    spec = preset("P1")
    g = build_grid(spec, 50, 10)
    t = sample_coefficients(spec, g)
    assert np.all(t.beta[g.ic:] == 0.0)
    assert np.allclose(t.beta_edge, 3.0)
    assert np.allclose(t.renewal_beta, 3.0)
    ex = spatial_extrema(t)
    assert np.allclose(ex.mu_under, 1.0) and np.allclose(ex.mu_over, 2.0)


def test_sampling_reports_location_of_bad_values():
    spec = preset("P0").replace(mu=lambda a, x: np.where(np.asarray(x) > 0.5, -1.0, 1.0) + 0 * np.asarray(a))
    with pytest.raises(ValueError, match=r"mu is negative at a=0, x=0\.6"):
        sample_coefficients(spec, build_grid(spec, 10, 10))
    spec = preset("P0").replace(q=lambda x: np.zeros_like(np.asarray(x, float)))
    with pytest.raises(ValueError, match="q is not strictly positive"):
        sample_coefficients(spec, build_grid(spec, 10, 10))
    spec = preset("P0").replace(beta=lambda a, x: np.full(np.broadcast(a, x).shape, np.nan))
    with pytest.raises(ValueError, match="not finite"):
        sample_coefficients(spec, build_grid(spec, 10, 10))


def test_assumptions_pass_on_presets():
    for name in ("P0", "P1", "interior_peak", "subcritical"):
        spec = preset(name)
        rep = validate_assumptions(spec, build_grid(spec, 50, 20))
        assert rep.ok, rep.failures


def test_assumptions_flag_bad_birth_laws():
    spec = preset("P0")
    g = build_grid(spec, 20, 10)
    linear = BirthLaw(f=lambda x, u: u + 0 * x, f_u0=lambda x: np.ones_like(x), L=1.0)
    rep = validate_assumptions(spec.replace(f=linear), g)
    assert not rep["f bounded by L"].passed
    convex = BirthLaw(f=lambda x, u: u**2 / (1 + u**2) + 0 * x, f_u0=lambda x: np.ones_like(x), L=1.0)
    rep = validate_assumptions(spec.replace(f=convex), g)
    assert not rep["f(x,u)/u non-increasing"].passed
    assert not rep["f_u(x,0) consistent"].passed


def test_assumptions_flag_vanishing_birth_tail():
    spec = preset("P0").replace(beta=lambda a, x: np.where(np.asarray(a) < 0.5, 3.0, 0.0) + 0 * np.asarray(x))
    rep = validate_assumptions(spec, build_grid(spec, 20, 10))
    assert not rep["underline-beta integral"].passed
    assert rep["beta cutoff"].passed


def test_holling_closed_form_and_scaling():
    law = holling_ii(tau=2.0, gain=3.0)
    assert law(0.4, 1.0) == pytest.approx(1.0)
    assert law.L == 1.5
    assert np.allclose(law.slope(np.linspace(0, 1, 3)), 3.0)
    s = law.scaled(2.0)
    assert s(0.1, 1.0) == pytest.approx(2.0) and s.L == 3.0


def test_logistic_law():
    law = logistic()
    assert law(0.2, np.log(2.0)) == pytest.approx(0.5)
    assert law.L == 1.0


def test_tabulated_interpolates_and_clamps():
    fn = tabulated([0.0, 1.0], [0.0, 1.0], [[0.0, 1.0], [2.0, 3.0]])
    assert fn(0.5, 0.5) == pytest.approx(1.5)
    assert fn(5.0, -1.0) == pytest.approx(2.0)
    with pytest.raises(ValueError, match="table shape"):
        tabulated([0.0, 1.0], [0.0], [[1.0, 2.0]])


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(0.1, 4.0),
       st.lists(st.one_of(st.just(0.0), st.floats(1e-12, 1e4)), min_size=2, max_size=10))
def test_holling_is_bounded_sublinear_and_increasing(tau, gain, us):
    law = holling_ii(tau, gain)
    u = np.sort(np.asarray(us))
    f = law(0.5, u)
    assert np.all(f <= law.L * (1 + 1e-12))
    assert np.all(np.diff(f) >= 0)
    pos = u > 0
    ratio = f[pos] / u[pos]
    assert np.all(np.diff(ratio) <= 1e-12 * ratio[:-1])


def test_problem_spec_replace_validates():
    spec = ProblemSpec(mu=preset("P0").mu, beta=preset("P0").beta, q=preset("P0").q, f=holling_ii())
    assert spec.a_plus == 1.0
    with pytest.raises(ValueError):
        spec.replace(d=-0.1)
