"""
Tests for fourier_core module
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from exceptions import GridMismatchError, ValidationError
from fourier_core import (
    GridFunction, GridSpec, bessel_potential, boundary_mass, bump, forward_transform, inverse_transform,
    lp_norm, mode_coefficients, norms, pairing, random_trig_polynomial, sobolev_norm_from_modes,
    spectral_derivative, sup_derivatives, synthesize,
)
from utils import seeded_rng


class TestGridSpec:
    """Grid geometry and validation"""

    def test_nodes_and_frequencies(self, grid16):
        nodes = grid16.axis_nodes()
        assert nodes[0] == pytest.approx(-np.pi)
        assert nodes[-1] < np.pi
        assert grid16.frequency_step == pytest.approx(1.0)
        assert grid16.nyquist == pytest.approx(8.0)
        assert sorted(grid16.axis_modes()) == list(range(-8, 8))

    @pytest.mark.parametrize("points", [4, 12, 100])
    def test_rejects_bad_point_counts(self, points):
        with pytest.raises(ValidationError):
            GridSpec(1, np.pi, points)

    def test_rejects_bad_dimension(self):
        with pytest.raises(ValidationError):
            GridSpec(3, np.pi, 8)

    def test_two_dimensional_layout(self, grid2d):
        assert grid2d.shape == (8, 8)
        assert grid2d.flat_nodes.shape == (2, 64)
        assert grid2d.flat_modes.shape == (2, 64)

    def test_wrap_and_index(self, grid16):
        assert grid16.wrap_modes(np.array([8, -9, 3])).tolist() == [-8, 7, 3]
        assert grid16.mode_index(np.array([[-1]]))[0] == 15

    def test_refined(self, grid16):
        assert grid16.refined().points_per_axis == 32


class TestTransforms:
    """The fixed Fourier convention"""

    def test_plane_wave_has_one_coefficient(self, grid16):
        c = mode_coefficients(GridFunction.plane_wave(grid16, [3]))
        expected = np.zeros(16, dtype=complex)
        expected[3] = 1.0
        np.testing.assert_allclose(c, expected, atol=1e-13)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(min_value=0, max_value=2 ** 16))
    def test_round_trip(self, seed):
        grid = GridSpec(1, np.pi, 32)
        f = random_trig_polynomial(grid, seeded_rng(seed), band_fraction=0.5, real=False)
        back = synthesize(mode_coefficients(f), grid)
        assert np.max(np.abs(back.values - f.values)) < 1e-12

    def test_forward_inverse_round_trip_2d(self, grid2d, rng):
        f = random_trig_polynomial(grid2d, rng, band_fraction=0.5, real=False)
        back = inverse_transform(forward_transform(f), grid2d)
        assert np.max(np.abs(back.values - f.values)) < 1e-12

    def test_forward_transform_scaling(self):
        # period 2L = 4π: f̂ samples carry the (π/L)^{-1} factor
        grid = GridSpec(1, 2 * np.pi, 32)
        f = GridFunction.constant(grid, 1.0)
        F = forward_transform(f)
        assert F[0] == pytest.approx(2.0)

    def test_parseval(self, grid32, rng):
        f = random_trig_polynomial(grid32, rng, real=False)
        assert sobolev_norm_from_modes(f, 0) == pytest.approx(lp_norm(f, 2), rel=1e-10)


class TestDerivativesAndPotentials:

    def test_spectral_derivative_of_sine(self, grid32):
        f = GridFunction.from_callable(grid32, lambda x: np.sin(3 * x))
        df = spectral_derivative(f, 1)
        np.testing.assert_allclose(df.values, 3 * np.cos(3 * grid32.nodes()[0]), atol=1e-12)

    def test_mixed_derivative_2d(self, grid2d):
        f = GridFunction.from_callable(grid2d, lambda x, y: np.sin(x) * np.cos(2 * y))
        x, y = grid2d.nodes()
        df = spectral_derivative(f, (1, 1))
        np.testing.assert_allclose(df.values, -2 * np.cos(x) * np.sin(2 * y), atol=1e-12)

    def test_bessel_potential_on_plane_wave(self, grid16):
        f = GridFunction.plane_wave(grid16, [2])
        np.testing.assert_allclose(bessel_potential(f, 2).values, 5 * f.values, atol=1e-12)

    @settings(max_examples=15, deadline=None)
    @given(st.floats(min_value=-2.0, max_value=2.0), st.floats(min_value=-2.0, max_value=2.0))
    def test_bessel_group_law(self, a, b):
        grid = GridSpec(1, np.pi, 16)
        f = random_trig_polynomial(grid, seeded_rng(3), real=False)
        left = bessel_potential(bessel_potential(f, a), b)
        right = bessel_potential(f, a + b)
        assert np.max(np.abs(left.values - right.values)) < 1e-10 * max(1.0, np.max(np.abs(right.values)))


class TestNorms:

    def test_lp_norm_of_constant(self, grid16):
        f = GridFunction.constant(grid16, 2.0)
        assert lp_norm(f, 2) == pytest.approx(2.0 * np.sqrt(2 * np.pi))
        assert lp_norm(f, np.inf) == pytest.approx(2.0)

    def test_lp_norm_rejects_small_p(self, grid16):
        with pytest.raises(ValidationError):
            lp_norm(GridFunction.constant(grid16), 0.5)

    def test_sup_derivatives(self, grid32):
        f = GridFunction.from_callable(grid32, lambda x: np.sin(2 * x))
        assert sup_derivatives(f, 0) == pytest.approx(1.0, abs=1e-3)
        assert sup_derivatives(f, 2) == pytest.approx(4.0, rel=1e-2)

    def test_norms_bundle(self, grid32):
        f = GridFunction.plane_wave(grid32, [1])
        bundle = norms(f, 2, 1)
        assert bundle.l2 == pytest.approx(np.sqrt(2 * np.pi))
        assert bundle.w_m2 == pytest.approx(2 * np.sqrt(2 * np.pi))
        assert bundle.w_s_inf == pytest.approx(1.0)

    def test_norms_reject_negative_orders(self, grid16):
        with pytest.raises(ValidationError):
            norms(GridFunction.constant(grid16), -1, 0)

    def test_pairing_has_no_conjugation(self, grid16):
        f = GridFunction.plane_wave(grid16, [1])
        g = GridFunction.plane_wave(grid16, [-1])
        assert pairing(f, g) == pytest.approx(2 * np.pi)
        assert abs(pairing(f, f)) < 1e-12

    def test_grid_mismatch(self, grid16, grid32):
        with pytest.raises(GridMismatchError):
            GridFunction.constant(grid16) * GridFunction.constant(grid32)


class TestTestFunctions:

    def test_random_polynomial_band(self, grid32, rng):
        f = random_trig_polynomial(grid32, rng, band_fraction=0.25, real=False)
        c = mode_coefficients(f)
        outside = np.abs(grid32.axis_modes()) > 8
        assert np.max(np.abs(c[outside])) < 1e-12

    def test_real_polynomial(self, grid32, rng):
        f = random_trig_polynomial(grid32, rng)
        assert np.max(np.abs(f.values.imag)) == 0.0

    def test_narrow_bump_is_localized(self, grid64):
        assert boundary_mass(bump(grid64, width=0.3)) < 1e-12
        assert boundary_mass(bump(grid64, width=3.0)) > 1e-3


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
