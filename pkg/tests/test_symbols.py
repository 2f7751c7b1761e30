"""
Tests for symbols module
"""

import json

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from bilinear_operator import DiscreteBilinearOp
from exceptions import (
    HypothesisViolationError, OrderCapError, SymbolParseError, UnknownFamilyError, ValidationError,
)
from symbols import (
    FAMILIES, ClassParams, SeparableSymbol, SymbolExpr, builtin_family, bump_cut, class_report,
    hormander_seminorm, load_symbol_spec, parse_expression, sampled_seminorm_profile, shell_samples,
    stabilized, symbol_variables, transpose_invariant_cutoff,
)

(X,), (XI,), (ETA,) = symbol_variables(1)


class TestClassParams:

    def test_weight_exponent(self):
        params = ClassParams(1.0, 0.75, 0.25)
        assert params.weight_exponent((2,), (1,), (0,)) == pytest.approx(1.0 + 0.5 - 0.75)

    @pytest.mark.parametrize("rho, delta", [(1.5, 0.0), (1.0, -0.1)])
    def test_range_validation(self, rho, delta):
        with pytest.raises(ValidationError):
            ClassParams(0.0, rho, delta)

    def test_hypotheses(self):
        ClassParams(0.0, 0.5, 0.5).require_transpose_hypothesis()
        with pytest.raises(HypothesisViolationError):
            ClassParams(0.0, 0.5, 0.5).require_strict()
        with pytest.raises(HypothesisViolationError):
            ClassParams(0.0, 0.25, 0.5).require_transpose_hypothesis()

    def test_term_order(self):
        assert ClassParams(1.0, 1.0, 0.25).term_order(2) == pytest.approx(-0.5)


class TestSymbolExpr:
    """Expression trees, evaluation and exact derivatives"""

    def test_evaluate_broadcasts(self):
        sigma = builtin_family('derivative_xi')
        values = sigma.evaluate(np.zeros(3), np.array([1.0, 2.0, 3.0]), 0.0)
        np.testing.assert_allclose(values, [1j, 2j, 3j])

    def test_constant_broadcasts_to_sample_shape(self):
        values = builtin_family('identity').evaluate(np.zeros((2, 3)), 0.0, 0.0)
        assert values.shape == (2, 3)
        assert np.all(values == 1.0)

    def test_two_dimensional_components(self):
        sigma = builtin_family('elliptic', {'m': 2.0}, dim=2)
        xi = np.array([[1.0], [2.0]])
        eta = np.array([[0.0], [1.0]])
        assert sigma.evaluate(np.zeros((2, 1)), xi, eta)[0] == pytest.approx(7.0)

    def test_differentiate(self):
        sigma = SymbolExpr(sp.sin(X) * XI ** 2 * ETA, 1)
        d = sigma.differentiate(alpha=1, beta=1, gamma=1)
        assert sp.simplify(d.expr - 2 * sp.cos(X) * XI) == 0

    def test_derivative_cap(self):
        with pytest.raises(OrderCapError):
            builtin_family('riesz_xi').differentiate(beta=4, gamma=3, cap=6)

    def test_stray_variables_rejected(self):
        with pytest.raises(ValidationError):
            SymbolExpr(sp.Symbol('t') * XI, 1)

    def test_arithmetic_drops_declared_class(self):
        total = builtin_family('identity') + builtin_family('derivative_xi')
        assert total.declared is None
        assert total.evaluate(0.0, 2.0, 0.0) == pytest.approx(1 + 2j)

    def test_depends_on_x(self):
        assert builtin_family('x_modulated').depends_on_x
        assert not builtin_family('riesz_xi').depends_on_x


class TestFamilies:

    def test_all_families_declare_a_class(self):
        for name in FAMILIES:
            assert builtin_family(name).declared is not None

    def test_unknown_family(self):
        with pytest.raises(UnknownFamilyError):
            builtin_family('no_such_family')

    def test_chirp_delta_range(self):
        with pytest.raises(ValidationError):
            builtin_family('chirp', {'delta': 1.0})
        assert builtin_family('chirp', {'delta': 0.5}).declared == ClassParams(0.0, 0.5, 0.5)

    def test_frequency_bump_support(self):
        sigma = builtin_family('frequency_bump', {'width': 1.0})
        assert sigma.evaluate(0.0, 0.5, 0.5) == pytest.approx(1.0)
        assert sigma.evaluate(0.0, 2.0, 1.0) == pytest.approx(0.0)

    def test_labels(self):
        assert str(builtin_family('elliptic', {'m': -1.0})) == 'elliptic(m=-1.0)'
        assert str(builtin_family('identity')) == 'identity'

    def test_bump_cut_keeps_class_and_vanishes(self, grid32):
        sigma = bump_cut(builtin_family('elliptic', {'m': 1.0}), grid32, 0.5)
        assert sigma.declared == ClassParams(1.0, 1.0, 0.0)
        assert sigma.evaluate(0.0, 8.0, 1.0) == pytest.approx(0.0)
        assert sigma.evaluate(0.0, 1.0, 1.0) == pytest.approx(np.sqrt(3.0))

    @pytest.mark.parametrize("xi, eta", [(1.0, 2.0), (-3.0, 1.5), (2.5, -4.0), (0.0, 5.0)])
    def test_invariant_cutoff_unchanged_by_transpose_substitutions(self, xi, eta):
        cut = SymbolExpr(transpose_invariant_cutoff(1, 4.0, 8.0), 1)
        value = cut.evaluate(0.0, xi, eta)
        assert cut.evaluate(0.0, -xi - eta, eta) == pytest.approx(value)
        assert cut.evaluate(0.0, xi, -xi - eta) == pytest.approx(value)

    def test_invariant_cutoff_support(self):
        cut = SymbolExpr(transpose_invariant_cutoff(1, 4.0, 8.0), 1)
        assert cut.evaluate(0.0, 1.0, 1.0) == pytest.approx(1.0)
        assert cut.evaluate(0.0, 6.0, 0.0) == pytest.approx(0.0)
        assert 0.0 < float(np.real(cut.evaluate(0.0, 5.0, -5.0))) < 1.0

    def test_bump_cut_invariant_label(self, grid32):
        sigma = bump_cut(builtin_family('riesz_xi'), grid32, 0.5, invariant=True)
        assert str(sigma) == 'bump_cut(riesz_xi, 0.5, invariant)'
        assert sigma.declared == ClassParams(0.0, 1.0, 0.0)

    def test_bump_cut_fraction_range(self, grid32):
        with pytest.raises(ValidationError):
            bump_cut(builtin_family('identity'), grid32, 1.5)


class TestSeparable:

    def test_flatten_matches_evaluate(self):
        one = SymbolExpr(sp.Integer(1), 1)
        terms = ((SymbolExpr(sp.cos(X), 1), SymbolExpr(XI, 1), one),
                 (one, one, SymbolExpr(ETA ** 2, 1)))
        sep = SeparableSymbol(terms)
        x, xi, eta = np.array([0.3, 1.1]), np.array([2.0, -1.0]), np.array([0.5, 3.0])
        np.testing.assert_allclose(sep.evaluate(x, xi, eta), sep.flatten().evaluate(x, xi, eta))
        assert sep.rank == 2

    def test_wrong_group_rejected(self):
        one = SymbolExpr(sp.Integer(1), 1)
        with pytest.raises(ValidationError):
            SeparableSymbol(((SymbolExpr(XI, 1), one, one),))


class TestSeminorms:
    """Measured Hörmander seminorms and stabilization"""

    def test_shell_samples_radii(self):
        samples = shell_samples(1, 4, directions=16, seed=1)
        assert len(samples) == 5
        for j, (xi, eta) in enumerate(samples):
            np.testing.assert_allclose(np.sqrt(xi ** 2 + eta ** 2)[0], 2.0 ** j)

    def test_stabilized(self):
        assert stabilized([1.0, 2.0, 2.2])
        assert not stabilized([1.0, 2.0, 4.0])
        assert not stabilized([1.0, np.inf, np.inf])

    def test_identity_report(self):
        report = class_report(builtin_family('identity'), max_order=2)
        assert report.consistent
        assert report.entries['a(0)b(0)g(0)'] == pytest.approx(1.0)
        assert max(report.entries.values()) <= 1.0

    def test_elliptic_in_its_class(self):
        report = class_report(builtin_family('elliptic', {'m': 2.0}), max_order=2)
        assert report.consistent

    def test_understated_order_detected(self):
        sigma = builtin_family('elliptic', {'m': 2.0}).with_class(ClassParams(0.0))
        report = class_report(sigma, max_order=1)
        assert not report.consistent
        assert 'a(0)b(0)g(0)' in report.failing

    def test_riesz_seminorm_bounded(self):
        assert hormander_seminorm(builtin_family('riesz_xi'), ClassParams(0.0), beta=1) <= 2.0

    def test_report_needs_a_class(self):
        with pytest.raises(ValidationError):
            class_report(SymbolExpr(XI, 1))

    def test_report_order_cap(self):
        with pytest.raises(OrderCapError):
            class_report(builtin_family('identity'), max_order=7)

    def test_report_is_reproducible(self):
        sigma = builtin_family('x_modulated', {'m': 1.0})
        first = class_report(sigma, max_order=1, seed=5).to_dict()
        second = class_report(sigma, max_order=1, seed=5).to_dict()
        assert first == second

    def test_sampled_profile_of_identity(self, grid16):
        samples = DiscreteBilinearOp.from_symbol(builtin_family('identity'), grid16).materialize()
        report = sampled_seminorm_profile(samples, grid16, ClassParams(0.0), max_order=1)
        assert report.consistent
        assert report.entries['a(0)b(0)g(0)'] == pytest.approx(1.0)
        assert report.entries['a(0)b(1)g(0)'] == pytest.approx(0.0)


class TestParser:
    """Prefix spec-file expressions"""

    def test_parse_chirp_like(self):
        expr = parse_expression("(exp (mul i (sin x) (pow (bracket_xi_eta) 0.5)))")
        expected = sp.exp(sp.I * sp.sin(X) * (1 + XI ** 2 + ETA ** 2) ** sp.Rational(1, 4))
        assert sp.simplify(expr - expected) == 0

    def test_numbers_are_exact(self):
        assert parse_expression("(mul 0.5 xi)") == XI / 2

    @pytest.mark.parametrize("text, token, position", [
        ("(mul i foo)", 'foo', 7),
        ("(frobnicate xi)", 'frobnicate', 1),
        ("(sin xi) eta", 'eta', 9),
        ("(sub xi)", 'sub', 1),
        (")", ')', 0),
    ])
    def test_errors_carry_token_and_position(self, text, token, position):
        with pytest.raises(SymbolParseError) as excinfo:
            parse_expression(text)
        assert excinfo.value.details['token'] == token
        assert excinfo.value.details['position'] == position

    def test_unexpected_end(self):
        with pytest.raises(SymbolParseError, match="unexpected end"):
            parse_expression("(mul xi")

    def test_real_power_needs_positive_base(self):
        with pytest.raises(SymbolParseError):
            parse_expression("(pow xi 0.5)")
        assert parse_expression("(pow xi 2)") == XI ** 2

    @settings(max_examples=30, deadline=None)
    @given(st.sampled_from(['x', 'xi', 'eta', '1', '2.5']), st.sampled_from(['sin', 'cos', 'exp', 'neg']))
    def test_unary_round_trip(self, atom, head):
        expr = parse_expression(f"({head} {atom})")
        assert isinstance(expr, sp.Expr)


class TestSpecFiles:

    def test_family_spec(self):
        sigma = load_symbol_spec({'family': 'elliptic', 'params': {'m': 1}})
        assert sigma.declared == ClassParams(1.0, 1.0, 0.0)

    def test_family_with_class_override(self):
        sigma = load_symbol_spec({'family': 'identity', 'class': {'m': 1}})
        assert sigma.declared == ClassParams(1.0, 1.0, 0.0)

    def test_expression_spec_from_file(self, tmp_path):
        path = tmp_path / 'dxi.json'
        path.write_text(json.dumps({'expr': '(mul i xi)', 'class': {'m': 1}, 'label': 'dxi'}))
        sigma = load_symbol_spec(str(path))
        assert str(sigma) == 'dxi'
        assert sigma.evaluate(0.0, 3.0, 0.0) == pytest.approx(3j)

    def test_missing_entries(self):
        with pytest.raises(ValidationError):
            load_symbol_spec({'label': 'nothing'})
        with pytest.raises(ValidationError):
            load_symbol_spec({'family': 'identity', 'class': {'rho': 1}})

    def test_invalid_json(self, tmp_path):
        path = tmp_path / 'broken.json'
        path.write_text('{"family": ')
        with pytest.raises(SymbolParseError):
            load_symbol_spec(str(path))


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
