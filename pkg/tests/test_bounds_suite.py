"""
Tests for bounds_suite module
"""

import numpy as np
import pytest

from bounds_suite import (
    DILATION_WIDTHS, check_exponents, dilation_sweep, estimate_norm, holder_sweep, holder_target,
    l2_wsinf_check, leibniz_bound_sweep, leibniz_identity_check, leibniz_split, partition_residual, phi,
    phi_partition, split_class_reports, threshold_s, witness_pair,
)
from exceptions import ExponentMismatchError, HypothesisViolationError, ValidationError
from fourier_core import GridSpec, lp_norm, random_trig_polynomial, spectral_derivative
from symbols import ClassParams, builtin_family


@pytest.fixture
def small_grid():
    return GridSpec(1, np.pi, 32)


def derivative_growth(f, g):
    return lp_norm(spectral_derivative(f, 1), 2) / lp_norm(f, 2)


class TestExponents:

    def test_holder_triple_accepted(self):
        check_exponents(2.0, 2.0, 1.0)
        check_exponents(4.0, 4.0, 2.0)

    @pytest.mark.parametrize("p, q, r", [(1.0, 2.0, 2.0 / 3.0), (2.0, np.inf, 2.0), (1.5, 1.5, 0.75)])
    def test_out_of_range(self, p, q, r):
        with pytest.raises(ValidationError):
            check_exponents(p, q, r)

    def test_mismatch(self):
        with pytest.raises(ExponentMismatchError):
            check_exponents(2.0, 2.0, 2.0)

    def test_holder_target(self):
        assert holder_target(4.0, 4.0) == pytest.approx(2.0)

    @pytest.mark.parametrize("dim, delta, expected", [(1, 0.0, 3), (1, 0.5, 4), (2, 0.0, 5)])
    def test_threshold_s(self, dim, delta, expected):
        assert threshold_s(dim, delta) == expected

    def test_threshold_needs_delta_below_one(self):
        with pytest.raises(HypothesisViolationError):
            threshold_s(1, 1.0)


class TestWitnesses:
    """Seeded witness pairs"""

    def test_reproducible(self, small_grid):
        f1, g1, w1 = witness_pair(small_grid, 5, 0, 2, 0.4)
        f2, g2, w2 = witness_pair(small_grid, 5, 0, 2, 0.4)
        np.testing.assert_array_equal(f1.values, f2.values)
        np.testing.assert_array_equal(g1.values, g2.values)
        assert w1.to_dict() == w2.to_dict()

    def test_families(self, small_grid):
        families = [witness_pair(small_grid, 5, 0, t, 0.4, exponents=(2.0, 2.0))[2].family for t in range(3)]
        assert families == ['matched_bump', 'trig_polynomial', 'modulated_bump']

    def test_matched_pair_without_exponents(self, small_grid):
        assert witness_pair(small_grid, 5, 0, 0, 0.4)[2].family == 'modulated_bump'


class TestDilationSweep:

    def test_detects_growth(self, small_grid):
        sweep = dilation_sweep(derivative_growth, small_grid, trials=2, seed=1)
        assert sweep.unbounded_trend
        assert sweep.trend_slope > 0.5
        assert len(sweep.maxima) == len(DILATION_WIDTHS)

    def test_constant_measure_has_no_trend(self, small_grid):
        sweep = dilation_sweep(lambda f, g: 2.0, small_grid, trials=2, seed=1)
        assert sweep.trend_slope == pytest.approx(0.0, abs=1e-12)
        assert not sweep.unbounded_trend
        assert sweep.witness.scale_index == 0

    def test_zero_measure_has_no_slope(self, small_grid):
        sweep = dilation_sweep(lambda f, g: 0.0, small_grid, trials=1, seed=1)
        assert sweep.trend_slope is None
        assert not sweep.unbounded_trend

    def test_workers_give_same_maxima(self, small_grid):
        serial = dilation_sweep(derivative_growth, small_grid, trials=3, seed=2, workers=1)
        threaded = dilation_sweep(derivative_growth, small_grid, trials=3, seed=2, workers=3)
        assert serial.maxima == threaded.maxima

    @pytest.mark.parametrize("kwargs", [{'trials': 0}, {'trials': 1, 'widths': (0.5,)}])
    def test_validation(self, small_grid, kwargs):
        with pytest.raises(ValidationError):
            dilation_sweep(derivative_growth, small_grid, seed=1, **kwargs)


class TestNormEstimates:
    """L^p x L^q -> L^r lower bounds"""

    @pytest.mark.parametrize("p, q, r", [(2.0, 2.0, 1.0), (4.0, 4.0, 2.0)])
    def test_identity_attains_holder(self, small_grid, p, q, r, tolerances):
        estimate = estimate_norm(builtin_family('identity'), p, q, r, trials=2, seed=3, grid=small_grid)
        assert estimate.ratio_max <= 1.0 + tolerances['norm_slack']
        assert estimate.ratio_max == pytest.approx(1.0, abs=1e-9)
        assert not estimate.unbounded_trend

    def test_positive_order_grows(self, tolerances):
        estimate = estimate_norm(builtin_family('elliptic', {'m': 1.0}), 2.0, 2.0, 1.0, trials=2, seed=3)
        assert estimate.unbounded_trend
        assert estimate.sweep.trend_slope > tolerances['trend_slope']

    def test_report_is_reproducible(self, small_grid):
        symbol = builtin_family('riesz_xi')
        first = estimate_norm(symbol, 4.0, 4.0, 2.0, trials=2, seed=9, grid=small_grid).to_dict()
        second = estimate_norm(symbol, 4.0, 4.0, 2.0, trials=2, seed=9, grid=small_grid).to_dict()
        assert first == second
        assert first['witness_seed'] == 9
        assert first['trials'] == 2 * len(DILATION_WIDTHS)

    @pytest.mark.slow
    def test_holder_sweep_endpoint(self, small_grid, tolerances):
        estimates = holder_sweep(builtin_family('identity'), trials=2, seed=3, grid=small_grid)
        assert len(estimates) == 3
        endpoint = estimates[-1]
        assert endpoint.endpoint_approximated
        assert endpoint.r == pytest.approx(holder_target(2.0, tolerances['large_q']))
        assert all(e.ratio_max <= 1.0 + tolerances['norm_slack'] for e in estimates)


class TestSobolevBound:

    def test_identity_is_bounded(self, small_grid, tolerances):
        report = l2_wsinf_check(builtin_family('identity'), trials=2, seed=4, grid=small_grid)
        assert report.s == 3
        assert report.ratio_max <= 1.0 + tolerances['norm_slack']
        assert report.frozen_ratio_max <= 1.0 + 1e-9
        assert not report.sweep.unbounded_trend

    def test_positive_order_refused(self, small_grid):
        with pytest.raises(HypothesisViolationError):
            l2_wsinf_check(builtin_family('elliptic', {'m': 1.0}), grid=small_grid)

    def test_needs_a_class(self, small_grid):
        with pytest.raises(ValidationError):
            l2_wsinf_check(builtin_family('identity') * 1, grid=small_grid)

    def test_chirp_threshold(self, small_grid):
        report = l2_wsinf_check(builtin_family('chirp', {'delta': 0.5}), trials=1, seed=4, grid=small_grid)
        assert report.s == 4
        assert report.to_dict()['class'] == ClassParams(0.0, 0.5, 0.5).to_dict()


class TestPartition:
    """φ(r) + φ(1/r) = 1"""

    def test_phi_values(self):
        np.testing.assert_allclose(phi([0.25, 0.5, 1.0, 2.0, 4.0]), [1.0, 1.0, 0.5, 0.0, 0.0], atol=1e-15)

    def test_phi_domain(self):
        with pytest.raises(ValidationError):
            phi([0.0])

    def test_partition_of_unity(self, tolerances):
        assert phi_partition(seed=1) <= tolerances['phi_partition']


class TestLeibnizSplit:

    def test_validation(self):
        with pytest.raises(ValidationError):
            leibniz_split(builtin_family('identity'), -1.0)
        with pytest.raises(ValidationError):
            leibniz_split(builtin_family('identity'), 1.0, orientation='sideways')

    def test_class_lowered_by_m(self):
        split = leibniz_split(builtin_family('elliptic', {'m': 2.0}), 2.0)
        assert split.sigma1.declared == ClassParams(0.0, 1.0, 0.0)
        assert split.to_dict()['orientation'] == 'dominant'

    @pytest.mark.parametrize("orientation", ['dominant', 'stated'])
    def test_partition_residual(self, orientation, tolerances):
        split = leibniz_split(builtin_family('x_modulated', {'m': 1.0}), 1.0, orientation)
        assert partition_residual(split, seed=1) <= tolerances['partition_residual']

    @pytest.mark.slow
    def test_dominant_pieces_in_lowered_class(self):
        reports = split_class_reports(leibniz_split(builtin_family('elliptic', {'m': 2.0}), 2.0), max_order=1)
        assert reports['sigma1'].consistent
        assert reports['sigma2'].consistent

    @pytest.mark.parametrize("m", [0.0, 1.0, 2.0])
    def test_identity_check(self, grid32, rng, m, tolerances):
        f, g = random_trig_polynomial(grid32, rng), random_trig_polynomial(grid32, rng)
        residual = leibniz_identity_check(builtin_family('riesz_xi'), m, f, g)
        assert residual.relative_residual <= tolerances['leibniz_residual']
        assert residual.to_dict()['m'] == m


class TestLeibnizBound:

    def test_identity_has_no_growth(self, small_grid):
        report = leibniz_bound_sweep(builtin_family('identity'), 1.0, trials=2, seed=6, grid=small_grid)
        assert report.s == 3
        assert not report.sweep.unbounded_trend
        assert report.to_dict()['witness_seed'] == 6

    def test_negative_m(self, small_grid):
        with pytest.raises(ValidationError):
            leibniz_bound_sweep(builtin_family('identity'), -1.0, grid=small_grid)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
