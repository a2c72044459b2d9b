import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vpdgauge.hamiltonian_dynamics import (
    CANONICAL,
    FIELD_EQUATIONS,
    EvolutionError,
    HamiltonianSystem,
    conjugate_momenta,
    maxwell_plane_wave,
    mode_kinetics,
    project_gauss_zero_mode,
    random_cone_state,
    reconstruct_timelike,
    spacelike_control_state,
    stress_divergence,
)
from vpdgauge.inner_space import (
    NO_FILTER,
    ConfigurationError,
    Domain,
    SpacetimeGrid,
    build_mode_lattice,
)

LAT2 = build_mode_lattice(1.0, 2)
SYS8 = HamiltonianSystem(Domain(LAT2, SpacetimeGrid.spatial(1, 8, 2 * np.pi)))
SYS16 = HamiltonianSystem(Domain(LAT2, SpacetimeGrid.spatial(1, 16, 2 * np.pi)))


def test_mode_kinetics_worked_case():
    mk = mode_kinetics([2.0, 1.0, 0.0, 0.0])
    assert np.allclose(mk.M, np.diag([0.75, 1.0, 1.0]))
    assert np.allclose(mk.eigenvalues, [1.0, 1.0, 0.75])
    assert np.allclose(mk.C[2], [1.0, 0.0, 0.0])
    assert np.allclose(mk.C @ mk.M @ mk.C.T, np.diag(mk.eigenvalues), atol=1e-15)
    assert np.allclose(mk.C @ mk.C.T, np.eye(3), atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=4, max_size=4))
def test_mode_kinetics_diagonalizes(n):
    if n[0] == 0:
        with pytest.raises(ConfigurationError):
            mode_kinetics(n)
        return
    mk = mode_kinetics(n)
    k2 = sum(x * x for x in n[1:])
    assert mk.eigenvalues[2] == pytest.approx(1 - k2 / n[0] ** 2)
    assert np.allclose(mk.C @ mk.M @ mk.C.T, np.diag(mk.eigenvalues), atol=1e-12)
    for row in mk.C:
        assert row[np.flatnonzero(np.abs(row) > 1e-14)[0]] > 0


def test_reconstruct_timelike_component():
    a = np.zeros((3, LAT2.size))
    m = LAT2.index[(2, 1, 0, 0)]
    a[0, m] = 1.0
    full = reconstruct_timelike(LAT2, a)
    assert full.shape == (4, LAT2.size)
    assert full[0, m] == pytest.approx(-0.5)
    assert np.all(full[0, LAT2.origin] == 0)


def test_reconstruct_rejects_content_on_k0_zero_modes():
    lat = build_mode_lattice(1.0, 1, NO_FILTER)
    a = np.zeros((3, lat.size))
    a[1, lat.index[(0, 1, 0, 0)]] = 1.0
    with pytest.raises(ConfigurationError):
        reconstruct_timelike(lat, a)


def test_system_requires_spatial_grid():
    with pytest.raises(ConfigurationError):
        HamiltonianSystem(Domain(LAT2, SpacetimeGrid((0, 3), (8, 8), (1.0, 1.0))))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 2.0))
def test_hamiltonian_is_nonnegative_and_routes_agree(seed, amplitude):
    state = random_cone_state(SYS8, seed, amplitude)
    H = SYS8.hamiltonian(state)
    assert H >= 0
    assert SYS8.hamiltonian_tilde(state) == pytest.approx(H, rel=1e-10)


def test_spacelike_control_is_negative():
    sys = HamiltonianSystem(Domain(build_mode_lattice(1.0, 2, NO_FILTER),
                                   SpacetimeGrid.spatial(1, 8, 2 * np.pi)))
    assert sys.hamiltonian(spacelike_control_state(sys)) < 0


def test_forms_agree_in_abelian_sector():
    state = maxwell_plane_wave(SYS16, k3=2, polarization=(2, 1))
    a = HamiltonianSystem(SYS16.dom, form=CANONICAL).time_derivatives(state)
    b = HamiltonianSystem(SYS16.dom, form=FIELD_EQUATIONS).time_derivatives(state)
    for x, y in zip(a, b):
        assert np.allclose(x, y, atol=1e-13)


def test_unknown_form_rejected():
    with pytest.raises(ConfigurationError):
        HamiltonianSystem(SYS8.dom, form="bogus")


def _directional(sys, state, dA, dP, h=1e-6):
    def H(s):
        return sys.hamiltonian(type(state)(state.A + s * dA, state.Pi + s * dP))
    return (H(h) - H(-h)) / (2 * h)


def test_canonical_flow_is_tangent_to_energy_surface():
    state = random_cone_state(SYS8, 3, 0.3)
    dA, dP = SYS8.time_derivatives(state)
    other = random_cone_state(SYS8, 4, 0.3)
    along = _directional(SYS8, state, dA, dP)
    generic = _directional(SYS8, state, other.A, other.Pi)
    assert abs(generic) > 1e-3
    assert abs(along) < 1e-7 * np.linalg.norm(np.concatenate([dA.ravel(), dP.ravel()]))


def test_maxwell_wave_returns_after_one_period():
    state = maxwell_plane_wave(SYS16, k3=1)
    end = SYS16.evolve(state, 2 * np.pi / 400, 400, every=400)[-1]
    assert end.t == pytest.approx(2 * np.pi)
    assert np.allclose(end.A, state.A, atol=1e-8)
    assert np.allclose(end.Pi, state.Pi, atol=1e-8)


def test_gauss_projection_removes_zero_mode():
    state = random_cone_state(SYS16, 5, 0.3)
    before = SYS16.gauss_residual(state)
    fixed = project_gauss_zero_mode(SYS16, state)
    assert before > 1e-6
    assert SYS16.gauss_residual(fixed) < 1e-10
    d = SYS16.diagnostics(fixed)
    assert d["divfree_residual"] < 1e-12 and d["reality_residual"] < 1e-12
    assert d["support_leak"] == 0.0


def test_midpoint_conserves_energy():
    state = project_gauss_zero_mode(SYS8, random_cone_state(SYS8, 6, 0.2))
    H0 = SYS8.hamiltonian(state)
    snaps = SYS8.evolve(state, 0.02, 25, integrator="midpoint", every=25)
    assert abs(SYS8.hamiltonian(snaps[-1]) - H0) < 1e-6 * H0


def test_non_finite_state_raises_with_last_good_step():
    state = random_cone_state(SYS8, 7, 0.2)
    state.Pi[0, 0, 0, LAT2.origin] = math.nan
    with pytest.raises(EvolutionError) as info:
        SYS8.evolve(state, 0.01, 5)
    assert info.value.last_good == 0


def test_momentum_matches_hamiltonian():
    state = project_gauss_zero_mode(SYS16, random_cone_state(SYS16, 8, 0.2))
    assert SYS16.momentum(state)[0] == pytest.approx(SYS16.hamiltonian(state), rel=1e-8)


def test_stress_divergence_needs_odd_stencil():
    state = maxwell_plane_wave(SYS16)
    with pytest.raises(ValueError):
        stress_divergence(SYS16, [state] * 4, 0.01)


def test_abelian_stress_divergence_is_small():
    state = maxwell_plane_wave(SYS16)
    dt = 0.01
    snaps = SYS16.evolve(state, dt, 8)
    resid, mag = stress_divergence(SYS16, snaps, dt)
    assert np.max(np.abs(resid)) < 1e-9 * np.max(mag)


def test_conjugate_momenta_inverts_velocity():
    sys = HamiltonianSystem(SYS8.dom, scale=1.5, form=FIELD_EQUATIONS)
    state = random_cone_state(sys, 9, 0.3)
    dA, _ = sys.time_derivatives(state)
    A = sys.gauge_field(state)
    A_dot = np.zeros_like(A)
    A_dot[1:3] = sys.full(dA)
    Pi = sys.project_band(conjugate_momenta(sys.dom, A, A_dot, sys.scale))
    assert np.allclose(Pi, sys.full(state.Pi), atol=1e-12)


def test_conjugate_momenta_static_and_abelian():
    dom = SYS16.dom
    A = dom.zeros(4, 4)
    assert np.all(conjugate_momenta(dom, A, A) == 0)
    x = dom.grid.coordinates(3)
    A[1, 2, ..., LAT2.origin] = np.sin(x)
    A_dot = np.zeros_like(A)
    A_dot[1, 2, ..., LAT2.origin] = np.cos(x)
    Pi = conjugate_momenta(dom, A, A_dot, scale=2.0)
    assert np.allclose(Pi[0, 2, ..., LAT2.origin], np.cos(x) / 2)
