import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from noisyflow.errors import BoundaryError, PositivityError
from noisyflow.fields import (
    Const,
    NoiseFamily,
    Trig,
    VectorField,
    builtin_catalog,
    construct_selecting_noise,
    coordinate_noise,
)
from noisyflow.geometry import Circle, Interval, Torus2, build_grid
from noisyflow.operator import assemble_for
from noisyflow.stationary import (
    Density,
    discrete_w12_seminorm,
    oracle_1d_circle,
    oracle_1d_interval,
    solve_stationary,
)


def unit_noise(grid, epsilons):
    return coordinate_noise(grid, epsilons)


# ---------------------------------------------------------------------------
# direct solves
# ---------------------------------------------------------------------------


def test_uniform_stationary_zero_drift():
    g = build_grid(Circle(), 64)
    op = assemble_for(builtin_catalog("zero-drift", g), unit_noise(g, [0.5]), 0.5)
    rep = solve_stationary(op)
    assert rep.residual <= 1e-13
    assert np.max(np.abs(rep.density.values - 1.0)) <= 1e-12


@pytest.mark.parametrize("eps", [0.5, 0.1])
def test_torus_shear_uniform(eps):
    g = build_grid(Torus2(), (32, 32))
    sys = builtin_catalog("torus-shear", g)
    rep = solve_stationary(assemble_for(sys, unit_noise(g, [0.5, 0.1]), eps))
    assert np.max(np.abs(rep.density.values - 1.0)) <= 1e-10


def test_circle_positive_matches_oracle():
    g = build_grid(Circle(), 256)
    sys = builtin_catalog("circle-positive", g)
    nf = unit_noise(g, [0.3])
    rep = solve_stationary(assemble_for(sys, nf, 0.3))
    u_oracle, _ = oracle_1d_circle(sys.drift, nf.a0(0.3), nf.ai(0.3), 0.3, g)
    err = np.max(np.abs(rep.density.values - u_oracle)) / np.max(np.abs(u_oracle))
    assert err <= 5e-4


def test_direct_and_inverse_iteration_agree():
    g = build_grid(Circle(), 256)
    sys = builtin_catalog("circle-positive", g)
    op = assemble_for(sys, unit_noise(g, [0.3]), 0.3)
    direct = solve_stationary(op, method="direct")
    inverse = solve_stationary(op, method="inverse-iteration")
    assert np.max(np.abs(direct.density.values - inverse.density.values)) <= 1e-10
    assert inverse.iterations >= 1


def test_positivity_on_catalog():
    g = build_grid(Torus2(), (24, 24))
    for name in ("torus-rotation", "torus-shear", "hamiltonian-cellular"):
        sys = builtin_catalog(name, g)
        rep = solve_stationary(assemble_for(sys, unit_noise(g, [0.2]), 0.2))
        assert rep.min_u > 0.0


@settings(max_examples=10, deadline=None)
@given(
    st.floats(min_value=1.5, max_value=3.0),
    st.floats(min_value=-0.9, max_value=0.9),
    st.floats(min_value=0.15, max_value=0.8),
)
def test_random_positive_drift_properties(offset, amp, eps):
    # positive 1D drifts: solve succeeds, density positive, unit mass
    from noisyflow.fields import ConservativeSystem

    g = build_grid(Circle(), 64)
    drift = VectorField([Trig("sin", 0, 1, amp, offset, 1.0)])
    sys = ConservativeSystem(drift, Const(1.0), g, "random")
    nf = unit_noise(g, [eps])
    rep = solve_stationary(assemble_for(sys, nf, eps))
    assert rep.min_u > 0.0
    assert abs(rep.density.mass() - 1.0) <= 1e-12
    assert rep.residual <= 1e-10


# ---------------------------------------------------------------------------
# circle oracle
# ---------------------------------------------------------------------------


def test_oracle_constant_coefficients():
    g = build_grid(Circle(), 64)
    drift = VectorField([Const(1.0)])
    nf = unit_noise(g, [0.4])
    u, c_eps = oracle_1d_circle(drift, nf.a0(0.4), nf.ai(0.4), 0.4, g, quad_n=64 * 64)
    assert np.ptp(u) <= 1e-12
    assert abs(c_eps + 1.0) <= 1e-10


def test_oracle_requires_positive_drift():
    g = build_grid(Circle(), 64)
    drift = VectorField([Trig("sin", 0, 1, 1.0, 0.0, 1.0)])
    nf = unit_noise(g, [0.4])
    with pytest.raises(PositivityError):
        oracle_1d_circle(drift, nf.a0(0.4), nf.ai(0.4), 0.4, g)


def test_oracle_quad_resolution_validation():
    g = build_grid(Circle(), 64)
    drift = VectorField([Const(1.0)])
    nf = unit_noise(g, [0.4])
    with pytest.raises(ValueError):
        oracle_1d_circle(drift, nf.a0(0.4), nf.ai(0.4), 0.4, g, quad_n=100)


def test_oracle_converges_to_invariant_density():
    g = build_grid(Circle(), 512)
    sys = builtin_catalog("circle-positive", g)
    u0 = math.sqrt(3.0) / (2.0 + np.sin(2 * np.pi * g.cell_centers()[:, 0]))
    eps_list = (0.4, 0.2, 0.1, 0.05)
    nf = unit_noise(g, eps_list)
    dists = []
    for eps in eps_list:
        u, _ = oracle_1d_circle(sys.drift, nf.a0(eps), nf.ai(eps), eps, g)
        dists.append(np.max(np.abs(u - u0)))
    assert all(b < a for a, b in zip(dists, dists[1:]))
    assert dists[-1] <= 0.01


def test_oracle_selection_family_small_drift():
    # with the selecting family, a u* = 1 and b = 0; a tiny constant
    # drift delta makes B > 0 and C_eps = -delta exactly
    g = build_grid(Circle(), 128)
    delta = 1e-6
    u_target = Trig("cos", 0, 1, 0.5, 1.0, 1.0)
    nf = construct_selecting_noise(u_target, g, [0.3])
    drift = VectorField([Const(delta)])
    u, c_eps = oracle_1d_circle(drift, nf.a0(0.3), nf.ai(0.3), 0.3, g)
    target = u_target(g.cell_centers())
    assert abs(c_eps + delta) <= 1e-12
    assert np.max(np.abs(u - target)) <= 1e-4


def test_oracle_self_consistency_across_eps():
    # C_eps must reproduce -int (B + eps^2 b) u at quadrature accuracy
    g = build_grid(Circle(), 256)
    sys = builtin_catalog("circle-positive", g)
    for eps in (0.4, 0.1, 0.05):
        nf = unit_noise(g, [eps])
        u, c_eps = oracle_1d_circle(sys.drift, nf.a0(eps), nf.ai(eps), eps, g)
        assert np.all(u > 0.0)
        assert c_eps < 0.0


# ---------------------------------------------------------------------------
# interval oracle
# ---------------------------------------------------------------------------


def test_interval_oracle_uniform():
    g = build_grid(Interval(), 64)
    nf = unit_noise(g, [0.5])
    u = oracle_1d_interval(VectorField.zero(1), nf.a0(0.5), nf.ai(0.5), 0.5, g)
    assert np.allclose(u, 1.0, atol=1e-12)


def test_interval_oracle_exponential_tilt():
    # B = 0, A0 = c, A1 = 1: u is proportional to e^{2 c x}, independent
    # of eps; closed form 2 e^{2x} / (e^2 - 1) for c = 1
    g = build_grid(Interval(), 256)
    a0 = VectorField([Const(1.0)])
    a1 = VectorField([Const(1.0)])
    nf = NoiseFamily(1, a0, [a1], [0.3])
    u = oracle_1d_interval(VectorField.zero(1), nf.a0(0.3), nf.ai(0.3), 0.3, g)
    x = g.cell_centers()[:, 0]
    exact = 2.0 * np.exp(2.0 * x) / (math.e ** 2 - 1.0)
    assert np.max(np.abs(u - exact)) <= 1e-10
    u2 = oracle_1d_interval(VectorField.zero(1), nf.a0(0.3), nf.ai(0.3), 0.9, g)
    assert np.allclose(u, u2, atol=1e-13)


def test_interval_oracle_selection_family():
    g = build_grid(Interval(), 128)
    u_target = Trig("cos", 0, 1, 0.5, 1.0, 1.0)
    nf = construct_selecting_noise(u_target, g, [0.4])
    u = oracle_1d_interval(VectorField.zero(1), nf.a0(0.4), nf.ai(0.4), 0.4, g)
    target = u_target(g.cell_centers())
    target /= np.sum(target) * g.cell_volume
    assert np.max(np.abs(u - target)) <= 1e-10


def test_interval_oracle_boundary_compatibility():
    g = build_grid(Interval(), 64)
    nf = unit_noise(g, [0.5])
    with pytest.raises(BoundaryError):
        oracle_1d_interval(VectorField([Const(1.0)]), nf.a0(0.5), nf.ai(0.5), 0.5, g)


# ---------------------------------------------------------------------------
# W^{1,2} seminorm
# ---------------------------------------------------------------------------


def test_w12_constant_is_zero():
    g = build_grid(Circle(), 64)
    assert discrete_w12_seminorm(Density.uniform(g)) == 0.0


def test_w12_cosine_value():
    # int (u')^2 = 2 pi^2 for u = 1 + cos(2 pi x); the face-difference
    # seminorm is sqrt(2 pi^2) sinc(pi h)
    g = build_grid(Circle(), 512)
    u = Density.normalized(1.0 + np.cos(2 * np.pi * g.cell_centers()[:, 0]), g)
    assert abs(discrete_w12_seminorm(u) - math.sqrt(2 * math.pi ** 2)) <= 5e-5


def test_w12_grid_stable_on_catalog_density():
    values = {}
    for n in (256, 512):
        g = build_grid(Circle(), n)
        sys = builtin_catalog("circle-positive", g)
        values[n] = discrete_w12_seminorm(Density(sys.u0, g))
    assert abs(values[256] - values[512]) <= 1e-3 * values[512]


# ---------------------------------------------------------------------------
# density invariants
# ---------------------------------------------------------------------------


def test_density_validation():
    g = build_grid(Circle(), 16)
    with pytest.raises(PositivityError):
        Density(np.full(16, -1.0), g)
    with pytest.raises(ValueError):
        Density(np.full(16, 2.0), g)  # mass 2
    with pytest.raises(ValueError):
        Density(np.ones(15), g)
