"""
Tests for utils module
"""

import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from exceptions import InsufficientRangeError
from utils import (
    as_multi_index, derivative_triples, dyadic_radii, fit_loglog, get_cache, index_binomial, index_factorial,
    multi_indices, sanitize_filename, seeded_rng, sub_indices, trend_slope, triple_key,
)


class TestSimpleCache:
    """Test SimpleCache functionality"""

    def test_cache_set_get(self, cache):
        """Test basic cache operations"""
        cache.set('key1', 'value1')
        assert cache.get('key1') == 'value1'

    def test_cache_expiry(self, cache):
        """Test cache expiration"""
        cache.set('key1', 'value1', ttl_seconds=0.1)
        assert cache.get('key1') == 'value1'
        time.sleep(0.2)
        assert cache.get('key1') is None

    def test_cache_clear(self, cache):
        """Test cache clearing"""
        cache.set('key1', 'value1')
        cache.set('key2', 'value2')
        cache.clear()
        assert cache.get('key1') is None
        assert len(cache) == 0

    def test_named_caches_are_shared(self):
        assert get_cache('test-shared') is get_cache('test-shared')
        assert get_cache('test-shared') is not get_cache('test-other')


class TestMultiIndices:
    """Multi-index enumeration and arithmetic"""

    def test_scalar_index(self):
        assert as_multi_index(3, 1) == (3,)
        assert as_multi_index(None, 2) == (0, 0)

    def test_invalid_index(self):
        with pytest.raises(ValueError):
            as_multi_index(2, 2)
        with pytest.raises(ValueError):
            as_multi_index((1, -1), 2)

    def test_graded_order(self):
        indices = multi_indices(2, 2)
        assert indices[0] == (0, 0)
        assert [sum(i) for i in indices] == sorted(sum(i) for i in indices)
        assert len(indices) == 6

    @given(st.integers(min_value=1, max_value=2), st.integers(min_value=0, max_value=3))
    def test_triple_count(self, dim, max_order):
        # compositions of k into 3·dim parts, summed over k <= max_order
        expected = math.comb(3 * dim + max_order, max_order)
        assert len(derivative_triples(dim, max_order)) == expected

    def test_factorial_and_binomial(self):
        assert index_factorial((2, 3)) == 12
        assert index_binomial((3, 2), (1, 1)) == 6
        assert len(list(sub_indices((1, 2)))) == 6

    def test_triple_key(self):
        assert triple_key((1,), (0,), (2,)) == "a(1)b(0)g(2)"


class TestSeededRng:

    def test_reproducible(self):
        a = seeded_rng(7, 1).standard_normal(5)
        b = seeded_rng(7, 1).standard_normal(5)
        np.testing.assert_array_equal(a, b)

    def test_streams_differ(self):
        a = seeded_rng(7, 1).standard_normal(5)
        b = seeded_rng(7, 2).standard_normal(5)
        assert not np.allclose(a, b)


class TestLogLogFit:
    """Decay fits used by every exponent verdict"""

    def test_dyadic_radii(self):
        assert dyadic_radii(8, 64) == [8.0, 16.0, 32.0, 64.0]

    @settings(max_examples=25, deadline=None)
    @given(st.floats(min_value=-4.0, max_value=2.0), st.floats(min_value=0.1, max_value=10.0))
    def test_exact_power_law(self, exponent, constant):
        radii = dyadic_radii(8, 64)
        fit = fit_loglog(radii, [constant * r ** exponent for r in radii])
        assert fit.exponent == pytest.approx(exponent, abs=1e-9)
        assert fit.r_squared == pytest.approx(1.0)
        assert fit.within(exponent, 0.0 + 1e-9)

    def test_degenerate_zero(self):
        fit = fit_loglog([8, 16, 32, 64], [0.0, 1e-14, 0.0, 1e-12])
        assert fit.degenerate_zero
        assert fit.within(-5.0, 0.1)
        assert fit.quality_ok(0.9)

    def test_insufficient_range(self):
        with pytest.raises(InsufficientRangeError):
            fit_loglog([8, 16, 32, 64], [1.0, 0.0, 0.0, 0.5], zero_floor=0.0)

    def test_within_is_one_sided(self):
        radii = dyadic_radii(8, 64)
        fit = fit_loglog(radii, [r ** -3.0 for r in radii])
        assert fit.within(-1.0, 0.35)
        assert not fit.within(-4.0, 0.35)

    def test_trend_slope(self):
        scales = [1.25, 2.5, 5.0, 10.0]
        assert trend_slope(scales, [2.0] * 4) == pytest.approx(0.0, abs=1e-12)
        assert trend_slope(scales, scales) == pytest.approx(1.0)


class TestSanitization:

    def test_sanitize_filename(self):
        """Test filename sanitization"""
        assert sanitize_filename('kernel_decay_bump_cut(riesz_xi, 0.5)_M0') == 'kernel_decay_bump_cutriesz_xi0.5_M0'
        assert sanitize_filename('../../etc/passwd') == '.._.._etc_passwd'
        assert sanitize_filename('***') == 'file'


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
