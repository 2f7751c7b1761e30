"""
Tests for asymptotic_sum module
"""

import numpy as np
import pytest

from asymptotic_sum import (
    CutoffPsi, SumSchedule, borel_sum, check_expansion_criterion, make_cutoff, planted_tail, remainder_fit,
    remainder_window, schedule_difference_fit, schedule_with_factor, select_epsilons,
)
from exceptions import ClassInconsistencyError, ValidationError
from symbols import ClassParams, SymbolExpr, builtin_family, symbol_variables


def elliptic_terms(count):
    return [builtin_family('elliptic', {'m': float(-j)}) for j in range(count)]


@pytest.fixture(scope='module')
def terms():
    return elliptic_terms(3)


@pytest.fixture(scope='module')
def schedule(terms):
    return select_epsilons(terms)


class TestCutoff:

    def test_cutoff_profile(self):
        psi = CutoffPsi()
        values = psi.evaluate(np.array([0.0, 0.5, 2.5, 10.0]), 0.0)
        np.testing.assert_allclose(values, [0.0, 0.0, 1.0, 1.0], atol=1e-12)
        assert 0.0 < psi.evaluate(1.5, 0.0) < 1.0

    def test_scaled_cutoff(self):
        psi = CutoffPsi()
        assert psi.evaluate(1.9, 0.0, epsilon=0.5) == pytest.approx(0.0)
        assert psi.evaluate(3.0, 3.0, epsilon=0.5) == pytest.approx(1.0)

    @pytest.mark.parametrize("inner, outer", [(0.0, 1.0), (2.0, 1.0)])
    def test_make_cutoff_validation(self, inner, outer):
        with pytest.raises(ValidationError):
            make_cutoff(inner, outer)

    def test_derivative_bound_is_finite(self):
        bound = CutoffPsi().derivative_bound((1,), (0,))
        assert 0.0 < bound < np.inf


class TestSchedule:
    """ε_j selection and its invariants"""

    def test_invariants(self, schedule):
        assert schedule.violations() == []
        assert schedule.orders == [0.0, -1.0, -2.0]
        for j, eps in enumerate(schedule.epsilons):
            assert 0 < eps <= 2.0 ** (-j)
            if j:
                assert eps <= schedule.epsilons[j - 1] / 2

    def test_violations_reported(self):
        bad = SumSchedule([0.5, 0.4], [0.0, 1.0], [0.0, 0.0])
        problems = bad.violations()
        assert any('not at most' in p for p in problems)
        assert any('increases' in p for p in problems)

    def test_radii(self, schedule):
        assert schedule.full_radius(1) == pytest.approx(2.0 / schedule.epsilons[1])
        assert schedule.switch_on_radius(1) == pytest.approx(1.0 / schedule.epsilons[1])

    def test_orders_must_not_increase(self):
        with pytest.raises(ValidationError):
            select_epsilons([builtin_family('elliptic', {'m': -1.0}), builtin_family('identity')])

    def test_terms_need_a_class(self):
        (_,), (xi,), _ = symbol_variables(1)
        with pytest.raises(ValidationError):
            select_epsilons([SymbolExpr(xi, 1)])

    def test_inconsistent_term_rejected(self):
        understated = builtin_family('elliptic', {'m': 2.0}).with_class(ClassParams(0.0))
        with pytest.raises(ClassInconsistencyError):
            select_epsilons([understated])

    def test_schedule_with_factor(self, schedule):
        halved = schedule_with_factor(schedule, 0.5)
        np.testing.assert_allclose(halved.epsilons, np.array(schedule.epsilons) / 2)
        assert halved.violations() == []
        with pytest.raises(ValidationError):
            schedule_with_factor(schedule, 0.0)

    def test_to_dict(self, schedule):
        payload = schedule.to_dict()
        assert payload['cutoff'] == {'inner_radius': 1.0, 'outer_radius': 2.0}
        assert len(payload['epsilons']) == 3


class TestBorelSum:

    def test_vanishes_near_origin(self, terms, schedule):
        a = borel_sum(terms, schedule)
        assert a.evaluate(0.0, 0.5, 0.0) == pytest.approx(0.0)

    def test_equals_full_sum_far_out(self, terms, schedule):
        a = borel_sum(terms, schedule)
        r = 2 * schedule.full_radius(2)
        expected = sum(term.evaluate(0.0, r, 0.0) for term in terms)
        assert a.evaluate(0.0, r, 0.0) == pytest.approx(expected, rel=1e-10)

    def test_declared_class_from_first_term(self, terms, schedule):
        assert borel_sum(terms, schedule).declared == ClassParams(0.0, 1.0, 0.0)

    def test_schedule_longer_than_terms(self, terms, schedule):
        with pytest.raises(ValidationError):
            borel_sum(terms[:2], schedule)

    def test_planted_tail(self, terms, schedule):
        a = borel_sum(terms, schedule)
        spurious = planted_tail(a, builtin_family('identity'))
        assert spurious.evaluate(0.0, 0.5, 0.0) == pytest.approx(1.0)
        assert spurious.evaluate(0.0, 100.0, 0.0) == pytest.approx(a.evaluate(0.0, 100.0, 0.0) + 1.0)


class TestRemainders:

    def test_window_without_schedule(self):
        assert remainder_window(None, 1) == [8.0, 16.0, 32.0, 64.0]

    def test_window_starts_beyond_full_radius(self, schedule):
        radii = remainder_window(schedule, 1)
        assert len(radii) == 4
        assert radii[0] >= 2 * schedule.full_radius(1)
        assert radii[1] == 2 * radii[0]

    def test_remainder_after_one_term(self, terms, schedule, tolerances):
        a = borel_sum(terms, schedule)
        fit = remainder_fit(a, terms, 1, remainder_window(schedule, 1), tolerances)
        assert fit.within(-1.0, tolerances['exponent_tolerance'])
        assert fit.exponent == pytest.approx(-1.0, abs=0.35)

    def test_schedule_independence(self, terms, schedule, tolerances):
        fit = schedule_difference_fit(terms, schedule, 2, tolerances=tolerances)
        assert fit.degenerate_zero or fit.within(-2.0, tolerances['exponent_tolerance'])


@pytest.mark.slow
class TestCriterion:
    """Sufficient criterion for a ~ Σ a_j"""

    def test_construction_passes(self, terms, schedule, tolerances):
        a = borel_sum(terms, schedule)
        verdict = check_expansion_criterion(a, terms, [1.0, 2.0], schedule, tolerances)
        assert verdict.growth_ok
        assert verdict.passed
        assert [e.N for e in verdict.entries] == [0, 1]

    def test_planted_tail_rejected(self, terms, schedule, tolerances):
        spurious = planted_tail(borel_sum(terms, schedule), builtin_family('identity'))
        verdict = check_expansion_criterion(spurious, terms, [1.0, 2.0], schedule, tolerances)
        assert not verdict.passed
        assert not verdict.entries[0].passed

    def test_growth_above_leading_order_rejected(self, terms, schedule, tolerances):
        a = builtin_family('elliptic', {'m': 1.0})
        verdict = check_expansion_criterion(a, terms, [1.0, 2.0], schedule, tolerances)
        assert verdict.growth_ok is False
        assert not verdict.passed

    def test_exponents_must_increase(self, terms, schedule):
        with pytest.raises(ValidationError):
            check_expansion_criterion(borel_sum(terms, schedule), terms, [2.0, 1.0], schedule)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
