import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vpdgauge.inner_space import (
    BACKWARD,
    EXCLUDED,
    FORWARD,
    INCLUDE_LIGHTLIKE,
    NO_FILTER,
    ORIGIN,
    ConfigurationError,
    ConstraintError,
    Domain,
    SpacetimeGrid,
    advect,
    build_mode_lattice,
    divergence_residual,
    inner_product,
    lie_bracket,
    pointwise_product,
    project_divergence_free,
    reality_residual,
    single_mode,
    spectral_derivative,
    symmetrize_reality,
)

LAT2 = build_mode_lattice(1.0, 2)
GRID8 = SpacetimeGrid.spatial(1, 8, 2 * np.pi)


def random_field(seed, lat=LAT2, grid=GRID8, vector=True):
    rng = np.random.default_rng(seed)
    shape = ((4,) if vector else ()) + (*grid.shape, lat.size)
    v = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    if vector:
        v = project_divergence_free(lat, v)
    return symmetrize_reality(lat, v)


def test_lattice_sizes():
    # R=1 strict keeps the origin and (+-1, 0, 0, 0)
    assert build_mode_lattice(1.0, 1).size == 3
    assert LAT2.size == 57
    assert build_mode_lattice(1.0, 1, NO_FILTER).size == 81
    # lightlike adds n0^2 == |n|^2 with n0 != 0
    assert build_mode_lattice(1.0, 1, INCLUDE_LIGHTLIKE).size == 3 + 2 * 6


def test_lattice_classes_and_negation():
    lat = LAT2
    assert set(lat.cone_class) == {ORIGIN, FORWARD, BACKWARD}
    assert np.all(lat.n[lat.negation] == -lat.n)
    assert np.all(lat.n[lat.origin] == 0)
    classes = build_mode_lattice(1.0, 2, NO_FILTER).cone_class
    assert EXCLUDED in set(classes)


def test_base_frequency_scales_momenta():
    lat = build_mode_lattice(0.5, 2)
    assert np.allclose(lat.K, 0.5 * lat.n)
    assert np.allclose(lat.minus_k_squared, 0.25 * (lat.n[:, 0] ** 2 - np.sum(lat.n[:, 1:] ** 2, 1)))


@pytest.mark.parametrize("kwargs", [dict(base_frequency=0.0, radius=2),
                                    dict(base_frequency=1.0, radius=-1),
                                    dict(base_frequency=1.0, radius=2, filter="bogus")])
def test_lattice_rejects_bad_parameters(kwargs):
    with pytest.raises(ConfigurationError):
        build_mode_lattice(**kwargs)


def test_grid_validation():
    with pytest.raises(ConfigurationError):
        SpacetimeGrid.spatial(1, 6, 1.0)
    with pytest.raises(ConfigurationError):
        SpacetimeGrid((1,), (8,), (1.0,))
    with pytest.raises(ConfigurationError):
        SpacetimeGrid.spatial(4, 8, 1.0)


def test_projection_worked_example():
    lat = build_mode_lattice(1.0, 2)
    dom = Domain(lat, GRID8)
    v = single_mode(dom, (2, 1, 0, 0), components=4, polarization=[1, 0, 0, 0])
    out = project_divergence_free(lat, v)[:, 0, lat.index[(2, 1, 0, 0)]]
    assert np.allclose(out, [0.2, -0.4, 0.0, 0.0], atol=1e-15)


def test_spectral_derivative_of_plane_wave():
    grid = SpacetimeGrid.spatial(1, 16, 2 * np.pi)
    x = grid.coordinates(3)
    f = np.sin(3 * x)[..., None]
    assert np.allclose(grid.derivative(f, 3).real, 3 * np.cos(3 * x)[..., None], atol=1e-12)
    assert np.all(grid.derivative(f, 1) == 0)


def test_band_projection_removes_high_harmonics():
    grid = SpacetimeGrid.spatial(1, 16, 2 * np.pi)
    x = grid.coordinates(3)
    f = (np.cos(x) + np.cos(6 * x))[..., None]
    out = grid.band_project(f, grid.band_mask(0.5))
    assert np.allclose(out.real, np.cos(x)[..., None], atol=1e-14)


def test_inner_product_parseval():
    lat = build_mode_lattice(1.0, 1)
    grid = SpacetimeGrid.spatial(1, 4, 1.0)
    dom = Domain(lat, grid)
    psi = single_mode(dom, (1, 0, 0, 0), amplitude=2.0)
    # |c|^2 * (2 pi)^4 inner volume * grid volume 1
    assert inner_product(dom, psi, psi) == pytest.approx(4 * (2 * np.pi) ** 4)
    assert inner_product(dom, psi, psi, scale=2.0) == pytest.approx(4 * (2 * np.pi) ** 4 / 16)


def test_product_matches_direct_evaluation():
    # f = cos(X0), g = cos(X0): f g = 1/2 + cos(2 X0)/2
    lat = build_mode_lattice(1.0, 2)
    dom = Domain(lat, GRID8)
    f = single_mode(dom, (1, 0, 0, 0), 0.5) + single_mode(dom, (-1, 0, 0, 0), 0.5)
    prod = pointwise_product(lat, f, f)
    assert np.allclose(prod[..., lat.origin], 0.5)
    assert np.allclose(prod[..., lat.index[(2, 0, 0, 0)]], 0.25)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bracket_closure_and_antisymmetry(seed):
    E, F = random_field(seed), random_field(seed + 1)
    EF = lie_bracket(LAT2, E, F)
    assert divergence_residual(LAT2, EF) < 1e-12
    assert reality_residual(LAT2, EF) < 1e-12
    assert np.array_equal(EF, -lie_bracket(LAT2, F, E))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-3, 3))
def test_advect_is_linear(seed, a):
    u = random_field(seed)
    f, g = random_field(seed + 1, vector=False), random_field(seed + 2, vector=False)
    lhs = advect(LAT2, u, f + a * g)
    assert np.allclose(lhs, advect(LAT2, u, f) + a * advect(LAT2, u, g), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 3))
def test_nabla_is_antihermitian(seed, beta):
    dom = Domain(LAT2, GRID8)
    psi, chi = random_field(seed, vector=False), random_field(seed + 1, vector=False)
    a = inner_product(dom, psi, spectral_derivative(LAT2, chi, beta))
    b = inner_product(dom, spectral_derivative(LAT2, psi, beta), chi)
    assert abs(a + b) <= 1e-12 * (abs(a) + abs(b))


def test_symmetrize_reality_is_idempotent():
    rng = np.random.default_rng(3)
    v = rng.standard_normal((4, 8, LAT2.size)) + 1j * rng.standard_normal((4, 8, LAT2.size))
    once = symmetrize_reality(LAT2, v)
    assert reality_residual(LAT2, v) > 0.1
    assert reality_residual(LAT2, once) == 0.0
    assert np.allclose(symmetrize_reality(LAT2, once), once, atol=1e-15)


def test_checked_bracket_rejects_non_divergence_free():
    dom = Domain(LAT2, GRID8)
    bad = single_mode(dom, (2, 1, 0, 0), components=4, polarization=[1, 0, 0, 0])
    with pytest.raises(ConstraintError):
        lie_bracket(LAT2, bad, bad, check=True)


def test_inner_product_rejects_mismatched_lattice():
    dom = Domain(LAT2, GRID8)
    psi = dom.zeros()
    with pytest.raises(ConfigurationError):
        inner_product(dom, psi, psi, lattice=build_mode_lattice(2.0, 2))
