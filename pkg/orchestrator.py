"""
bscalc - Verification Orchestrator
Each suite runs one module pipeline and hands its verdicts to the report;
the orchestrator chains the suites for full-suite runs.
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from asymptotic_sum import (
    borel_sum, check_expansion_criterion, planted_tail, remainder_fit, remainder_window, schedule_difference_fit,
    select_epsilons,
)
from bilinear_operator import DiscreteBilinearOp, apply, freeze_second_argument
from bounds_suite import (
    estimate_norm, holder_sweep, l2_wsinf_check, leibniz_bound_sweep, leibniz_identity_check, leibniz_split,
    partition_residual, phi_partition, split_class_reports, threshold_s,
)
from exceptions import (
    USAGE_ERRORS, BilinearCalculusError, HypothesisViolationError, InsufficientRangeError, NotLocalizedError,
    TensorTooLargeError, handle_exception,
)
from fourier_core import GridFunction, GridSpec, random_trig_polynomial, spectral_derivative
from kernel_estimates import (
    czk_report, kernel_decay, operator_kernel_consistency, refinement_stability, route_agreement,
)
from logging_config import LogContext, get_logger
from report import Curve, Report, Status, Verdict
from symbols import FAMILIES, ClassParams, SymbolExpr, bump_cut, builtin_family, class_report
from transpose_calculus import (
    TransposeIndex, duality_residual, expansion_truncation, extract_symbol, localization_ratio,
    remainder_monotone, remainder_order_fit, transpose_adjoint_oracle, transpose_class_evidence,
    transpose_symbol_oscillatory,
)
from utils import seeded_rng

logger = get_logger(__name__)

COMMANDS = ('verify-class', 'apply', 'transpose', 'expand', 'asym-sum', 'kernel-decay', 'bounds', 'leibniz',
            'full-suite')

KERNEL_CSV_COLUMNS = ['S_shell_center', 'sup_abs_kernel', 'derivative_order', 'predicted_exponent',
                      'fitted_exponent', 'r_squared']

# Errors that make a single check undecidable rather than failed
UNDECIDABLE = (HypothesisViolationError, NotLocalizedError, InsufficientRangeError, TensorTooLargeError)


@dataclass
class SuiteContext:
    """Everything a suite needs: seed, tolerances, grid overrides, input symbols and options"""
    seed: int
    tolerances: Dict[str, Any]
    dim: int = 1
    half_period: float = float(np.pi)
    grid_points: Optional[int] = None
    symbols: List[SymbolExpr] = field(default_factory=list)
    options: Dict[str, Any] = field(default_factory=dict)
    workers: Optional[int] = None

    def grid(self, default_points: int) -> GridSpec:
        return GridSpec(self.dim, self.half_period, self.grid_points or default_points)

    def option(self, key: str, default: Any = None) -> Any:
        value = self.options.get(key)
        return default if value is None else value

    def builtin(self, name: str, **params) -> SymbolExpr:
        return builtin_family(name, params or None, dim=self.dim)


def modulated_riesz(dim: int = 1) -> SymbolExpr:
    """(1 + sin²x₁)·ξ₁/⟨ξ,η⟩, an x-dependent member of BS^0_{1,0} with ξ-dependence"""
    product = builtin_family('x_modulated', {'m': 0.0}, dim) * builtin_family('riesz_xi', dim=dim)
    return product.with_class(ClassParams(0.0, 1.0, 0.0), label='x_modulated*riesz_xi')


class BaseSuite:
    """Base class for all verification suites"""
    command = ''
    module = ''

    def __init__(self, context: SuiteContext):
        self.context = context
        self.tolerances = context.tolerances

    def log(self, message: str):
        logger.info(f"[{self.command}] {message}")

    def new_report(self) -> Report:
        return Report(self.command, {}, self.context.seed)

    def guarded(self, report: Report, name: str, check: Callable[[], None]) -> None:
        """Run one check; hypothesis/localization/range problems become indeterminate verdicts"""
        try:
            check()
        except UNDECIDABLE as e:
            logger.warning(f"[{self.command}] {name} undecidable: {e.message}")
            report.add(Verdict.indeterminate(name, f"{e.error_code}: {e.message}", self.module))

    def run(self) -> Report:
        raise NotImplementedError


class ClassSuite(BaseSuite):
    """Seminorm stabilization against the declared class"""
    command = 'verify-class'
    module = 'symbol-algebra'

    def run(self) -> Report:
        report = self.new_report()
        max_order = int(self.context.option('max_order', 2))
        symbols = self.context.symbols or [self.context.builtin('identity'),
                                           self.context.builtin('chirp', delta=0.5, amplitude=1.0)]
        for symbol in symbols:
            self.log(f"class report for {symbol} up to order {max_order}")
            seminorms = class_report(symbol, max_order=max_order, ratio=self.tolerances['stabilization_ratio'])
            report.results[str(symbol)] = seminorms.to_dict()
            report.add(Verdict(f"class_consistent[{symbol}]",
                               Status.PASS if seminorms.consistent else Status.FAIL,
                               len(seminorms.failing), 0, self.tolerances['stabilization_ratio'], self.module,
                               note="failing entries: " + ",".join(seminorms.failing) if seminorms.failing else ''))
        return report


class ApplySuite(BaseSuite):
    """Identity multiplication, Leibniz sanity, and tensor/frozen/bilinearity agreement"""
    command = 'apply'
    module = 'bilinear-operator'

    def run(self) -> Report:
        report = self.new_report()
        grid = self.context.grid(64)
        limit = self.tolerances['identity_apply']
        f = GridFunction.from_callable(grid, lambda *x: np.sin(x[0]))
        g = GridFunction.from_callable(grid, lambda *x: np.cos(x[0]))

        identity = DiscreteBilinearOp.from_symbol(self.context.builtin('identity'), grid)
        error = float(np.max(np.abs(apply(identity, f, g).values - (f * g).values)))
        report.add(Verdict.at_most('identity_multiplication', error, limit, self.module))

        total = self.context.builtin('derivative_xi') + self.context.builtin('derivative_eta')
        product_rule = apply(DiscreteBilinearOp.from_symbol(total, grid), f, g)
        error = float(np.max(np.abs(product_rule.values - spectral_derivative(f * g, 1).values)))
        report.add(Verdict.at_most('product_rule', error, limit, self.module))

        rng = seeded_rng(self.context.seed, 1)
        u, v, w = (random_trig_polynomial(grid, rng) for _ in range(3))
        symbols = self.context.symbols or [self.context.builtin('chirp', delta=0.5, amplitude=1.0)]
        for symbol in symbols:
            op = DiscreteBilinearOp.from_symbol(symbol, grid)
            direct = apply(op, u, v, self.context.workers)
            scale = max(1.0, float(np.max(np.abs(direct.values))))
            results = {'output_sup': float(np.max(np.abs(direct.values)))}

            tensor = apply(op.as_tensor_op(), u, v)
            report.add(Verdict.at_most(f"tensor_agreement[{symbol}]",
                                       float(np.max(np.abs(tensor.values - direct.values))) / scale,
                                       self.tolerances['tensor_agreement'], self.module))

            frozen = freeze_second_argument(op, v).apply(u)
            report.add(Verdict.at_most(f"frozen_agreement[{symbol}]",
                                       float(np.max(np.abs(frozen.values - direct.values))) / scale,
                                       self.tolerances['frozen_agreement'], self.module))

            combined = apply(op, u + w.scaled(2.0), v)
            expected = direct.values + 2.0 * apply(op, w, v).values
            report.add(Verdict.at_most(f"bilinearity[{symbol}]",
                                       float(np.max(np.abs(combined.values - expected))) / scale,
                                       limit, self.module))
            report.results[str(symbol)] = results
        report.results['grid'] = grid.to_dict()
        return report


class TransposeSuite(BaseSuite):
    """Adjoint oracle, duality, dual-route agreement, class evidence and the expansion remainder"""
    command = 'transpose'
    module = 'transpose-calculus'

    def _indices(self) -> List[TransposeIndex]:
        which = str(self.context.option('which', 'both'))
        if which == 'both':
            return list(TransposeIndex)
        return [TransposeIndex.FIRST if which in ('1', 'first') else TransposeIndex.SECOND]

    def _localized(self, symbol: SymbolExpr, grid: GridSpec) -> SymbolExpr:
        samples = DiscreteBilinearOp.from_symbol(symbol, grid).materialize()
        if localization_ratio(samples, grid) <= self.tolerances['localization']:
            return symbol
        self.log(f"{symbol} is not frequency-localized on N={grid.points_per_axis}; bump-cutting")
        return bump_cut(symbol, grid, self.tolerances['bump_cut_fraction'], invariant=True)

    def run(self) -> Report:
        report = self.new_report()
        grid = self.context.grid(32)
        N = int(self.context.option('expand', 2))
        symbols = self.context.symbols or [self.context.builtin(name) for name in FAMILIES]
        for symbol in symbols:
            with LogContext(logger, symbol=str(symbol)):
                report.results[str(symbol)] = self._check_symbol(report, symbol, grid, N)
        return report

    def _check_symbol(self, report: Report, symbol: SymbolExpr, grid: GridSpec, N: int) -> Dict[str, Any]:
        tol = self.tolerances
        local = self._localized(symbol, grid)
        op = DiscreteBilinearOp.from_symbol(local, grid)
        original = op.materialize()
        results: Dict[str, Any] = {'localized_symbol': str(local)}

        for which in self._indices():
            key = f"{symbol}^*{which.value}"
            transpose = transpose_adjoint_oracle(op, which)
            residual = duality_residual(op, transpose, which, triples=tol['duality_triples'],
                                        seed=self.context.seed)
            report.add(Verdict.at_most(f"duality[{key}]", residual, tol['duality_residual'], self.module))

            twice = transpose_adjoint_oracle(transpose, which).materialize()
            report.add(Verdict.at_most(f"involution[{key}]", float(np.max(np.abs(twice - original))),
                                       tol['extract_round_trip'], self.module))

            extracted = extract_symbol(transpose)
            results[f"samples_{which.value}"] = _sample_points(extracted, grid)

            def oscillatory_route():
                routed = transpose_symbol_oscillatory(local, which, grid, tol['localization'])
                report.add(Verdict.at_most(f"route_agreement[{key}]", float(np.max(np.abs(routed - extracted))),
                                           tol['route_agreement'], self.module))

            self.guarded(report, f"route_agreement[{key}]", oscillatory_route)

            truncation = expansion_truncation(local, which, N)
            results[f"expansion_{which.value}"] = truncation.to_dict()
            self.guarded(report, f"remainder[{key},N={N}]",
                         lambda: self._remainder(report, symbol, which, N, key, results))

        def class_evidence():
            evidence = transpose_class_evidence(local, grid, ratio=tol['stabilization_ratio'])
            results['class_evidence'] = evidence.to_dict()
            report.add(Verdict.flag(f"class_invariance[{symbol}]", evidence.consistent, module=self.module))

        if symbol.declared is not None:
            self.guarded(report, f"class_invariance[{symbol}]", class_evidence)
        return results

    def _remainder(self, report: Report, symbol: SymbolExpr, which: TransposeIndex, N: int, key: str,
                   results: Dict[str, Any]) -> None:
        params = symbol.declared
        if params is None or not params.delta < params.rho:
            self.log(f"{symbol}: no strict order gain, remainder fit skipped")
            return
        grid = self.context.grid(64)
        fit = remainder_order_fit(symbol, which, N, grid=grid, tolerances=self.tolerances)
        results[f"remainder_{which.value}_N{N}"] = fit.to_dict()
        report.add(remainder_verdict(f"remainder[{key},N={N}]", fit, params.term_order(N), N, self.tolerances,
                                     self.module))


def remainder_verdict(name: str, fit, expected: float, N: int, tolerances: Dict[str, Any], module: str) -> Verdict:
    """Fitted exponent at most the predicted order, with the fit quality gate"""
    tolerance = tolerances['exponent_tolerance'] if N <= 1 else tolerances['exponent_tolerance_second_order']
    if fit.degenerate_zero:
        return Verdict(name, Status.PASS, None, expected, tolerance, module, note='degenerate zero remainder')
    passed = fit.within(expected, tolerance) and fit.quality_ok(tolerances['min_r_squared'])
    note = f"r_squared={fit.r_squared:.3f}"
    if not passed and fit.within(expected, tolerance + tolerances['near_miss_margin']):
        note += '; near miss'
    return Verdict(name, Status.PASS if passed else Status.FAIL, fit.exponent, expected, tolerance, module, note)


def _sample_points(samples: np.ndarray, grid: GridSpec, count: int = 8) -> List[Dict[str, Any]]:
    """A few (x, ξ, η, value) rows spread over the tensor for the report"""
    rows = []
    size = grid.size
    for i in range(count):
        j, k, l = (i * 7) % size, (i * 3 + 1) % size, (i * 5 + 2) % size
        rows.append({
            'x': grid.flat_nodes[:, j].tolist(),
            'xi': grid.flat_frequencies[:, k].tolist(),
            'eta': grid.flat_frequencies[:, l].tolist(),
            'value': complex(samples[j, k, l]),
        })
    return rows


class ExpandSuite(BaseSuite):
    """Expansion terms and remainder orders for N = 1..expand, with monotonicity"""
    command = 'expand'
    module = 'transpose-calculus'

    def run(self) -> Report:
        report = self.new_report()
        tol = self.tolerances
        top = int(self.context.option('expand', 2))
        which = TransposeIndex.SECOND if str(self.context.option('which', '1')) in ('2', 'second') \
            else TransposeIndex.FIRST
        grid = self.context.grid(64)
        symbols = self.context.symbols or [modulated_riesz(self.context.dim)]
        for symbol in symbols:
            params = symbol.declared
            results: Dict[str, Any] = {'terms': expansion_truncation(symbol, which, top).to_dict()}
            exponents = []
            for N in range(1, top + 1):
                name = f"remainder[{symbol}^*{which.value},N={N}]"

                def check(N=N, name=name):
                    if params is None:
                        raise HypothesisViolationError(f"{symbol} declares no class")
                    fit = remainder_order_fit(symbol, which, N, grid=grid, tolerances=tol)
                    results[f"remainder_N{N}"] = fit.to_dict()
                    exponents.append(fit.exponent)
                    report.add(remainder_verdict(name, fit, params.term_order(N), N, tol, self.module))

                self.guarded(report, name, check)
            if len(exponents) > 1:
                report.add(Verdict.flag(f"remainder_monotone[{symbol}]",
                                        remainder_monotone(exponents, tol['monotonicity_noise']),
                                        module=self.module))
            report.results[str(symbol)] = results
        return report


class AsymptoticSuite(BaseSuite):
    """Borel-type construction, its remainders, schedule independence and the criterion"""
    command = 'asym-sum'
    module = 'asymptotic-sum'

    def run(self) -> Report:
        report = self.new_report()
        tol = self.tolerances
        terms = int(self.context.option('terms', 4))
        a_list = self.context.symbols or [self.context.builtin('elliptic', m=float(-j)) for j in range(terms + 1)]

        schedule = select_epsilons(a_list)
        report.results['schedule'] = schedule.to_dict()
        report.add(Verdict.at_most('schedule_invariants', float(len(schedule.violations())), 0.0, self.module))

        a = borel_sum(a_list, schedule)
        seminorms = class_report(a, max_order=int(self.context.option('max_order', 2)),
                                 ratio=tol['stabilization_ratio'])
        report.results['class_report'] = seminorms.to_dict()
        report.add(Verdict.flag('borel_sum_class', seminorms.consistent, module=self.module))

        orders = schedule.orders
        for N in (1, 2):
            if N >= len(a_list):
                break
            name = f"borel_remainder[N={N}]"

            def remainder(N=N, name=name):
                fit = remainder_fit(a, a_list, N, remainder_window(schedule, N, tolerances=tol), tol)
                report.results[f"remainder_N{N}"] = fit.to_dict()
                report.add(remainder_verdict(name, fit, orders[N], 1, tol, self.module))

            self.guarded(report, name, remainder)

        if len(a_list) > 2:
            def difference():
                fit = schedule_difference_fit(a_list, schedule, 2, tolerances=tol)
                report.results['schedule_difference'] = fit.to_dict()
                report.add(remainder_verdict('schedule_difference[N=2]', fit, orders[2], 1, tol, self.module))

            self.guarded(report, 'schedule_difference[N=2]', difference)

        if len(a_list) > 1:
            mu = [-orders[N + 1] for N in range(len(a_list) - 1)]
            verdict = check_expansion_criterion(a, a_list, mu, schedule, tol)
            report.results['criterion'] = verdict.to_dict()
            report.add(Verdict.flag('criterion_construction', verdict.passed, module=self.module))

            spurious = planted_tail(a, self.context.builtin('identity'))
            planted = check_expansion_criterion(spurious, a_list, mu, schedule, tol)
            report.results['criterion_planted_tail'] = planted.to_dict()
            report.add(Verdict.flag('criterion_planted_tail', planted.passed, expected=False, module=self.module,
                                    note='a spurious order-0 tail must be rejected'))
        return report


class KernelSuite(BaseSuite):
    """Kernel routes, decay regimes and refinement stability"""
    command = 'kernel-decay'
    module = 'kernel-estimates'

    def run(self) -> Report:
        report = self.new_report()
        grid = self.context.grid(128)
        fraction = self.tolerances['bump_cut_fraction']
        if self.context.symbols:
            M = int(self.context.option('M', 0))
            for symbol in self.context.symbols:
                self._decay(report, bump_cut(symbol, grid, fraction), grid, M, symbol.declared)
                self._routes(report, bump_cut(symbol, grid, fraction), grid)
            return report

        riesz = bump_cut(self.context.builtin('riesz_xi'), grid, fraction)
        self._routes(report, riesz, grid)
        self.guarded(report, 'czk[riesz_xi]', lambda: self._czk(report, riesz, grid))
        self._refinement(report, 'bounded_kernel[elliptic(m=-5)]', self.context.builtin('elliptic', m=-5.0),
                         grid, fraction, rapid=False)
        self._refinement(report, 'rapid_decay[frequency_bump]', self.context.builtin('frequency_bump', width=2.0),
                         grid, None, rapid=True)

        identity = bump_cut(self.context.builtin('identity'), grid, fraction)
        self.guarded(report, 'super_polynomial[identity]', lambda: report.add(Verdict.flag(
            'super_polynomial[identity]', kernel_decay(identity, grid, 0, tolerances=self.tolerances)
            .super_polynomial, module=self.module)))
        return report

    def _routes(self, report: Report, p: SymbolExpr, grid: GridSpec) -> None:
        def check():
            report.add(Verdict.at_most(f"kernel_routes[{p}]", route_agreement(p, grid),
                                       self.tolerances['kernel_route_agreement'], self.module))
            rng = seeded_rng(self.context.seed, 2)
            f, g = random_trig_polynomial(grid, rng), random_trig_polynomial(grid, rng)
            report.add(Verdict.at_most(f"kernel_operator[{p}]", operator_kernel_consistency(p, grid, f, g),
                                       self.tolerances['kernel_operator_agreement'], self.module))

        self.guarded(report, f"kernel_routes[{p}]", check)

    def _decay(self, report: Report, p: SymbolExpr, grid: GridSpec, M: int, params: Optional[ClassParams]) -> None:
        def check():
            decay = kernel_decay(p, grid, M, params, tolerances=self.tolerances)
            report.results[f"{p}:M={M}"] = decay.to_dict()
            report.curves.append(Curve(f"kernel_decay_{p}_M{M}", KERNEL_CSV_COLUMNS, decay.curve_rows()))
            report.add(self._decay_verdict(f"kernel_decay[{p},M={M}]", decay, M))

        self.guarded(report, f"kernel_decay[{p},M={M}]", check)

    def _decay_verdict(self, name: str, decay, M: int) -> Verdict:
        tolerance = (self.tolerances['kernel_exponent_tolerance'] if M == 0
                     else self.tolerances['kernel_gradient_tolerance'])
        measured = decay.fit.exponent if decay.fit else (decay.log_fit or {}).get('r_squared')
        if decay.passed is None:
            status = Status.INDETERMINATE
        else:
            status = Status.PASS if decay.passed else Status.FAIL
        note = f"regime={decay.regime}" + ('; super-polynomial' if decay.super_polynomial else '')
        if decay.refinement is not None:
            measured = decay.refinement.relative_change
            tolerance = self.tolerances['refinement_stability']
            note += '; refinement N->2N'
        return Verdict(name, status, measured, decay.predicted_exponent, tolerance, self.module, note)

    def _czk(self, report: Report, p: SymbolExpr, grid: GridSpec) -> None:
        czk = czk_report(p, grid, tolerances=self.tolerances)
        report.results[f"czk[{p}]"] = czk.to_dict()
        for M, decay in ((0, czk.size), (1, czk.gradient)):
            report.curves.append(Curve(f"kernel_decay_riesz_M{M}", KERNEL_CSV_COLUMNS, decay.curve_rows()))
            report.add(self._decay_verdict(f"czk[{p},M={M}]", decay, M))

    def _refinement(self, report: Report, name: str, symbol: SymbolExpr, grid: GridSpec,
                    fraction: Optional[float], rapid: bool) -> None:
        def check():
            result = refinement_stability(symbol, grid, fraction=fraction, tolerances=self.tolerances)
            report.results[name] = result.to_dict()
            limit = self.tolerances['refinement_stability']
            if rapid:
                worst = max(entry['relative_change'] for entry in result.weighted.values())
                report.add(Verdict.at_most(name, worst, limit, self.module,
                                           note=f"smallest stable order {result.smallest_stable_order}"))
            else:
                report.add(Verdict.at_most(name, result.relative_change, limit, self.module))

        self.guarded(report, name, check)


class BoundsSuite(BaseSuite):
    """Sobolev threshold, Hölder-type sweeps, L² x W^{s,∞} sweeps and the positive control"""
    command = 'bounds'
    module = 'bounds-suite'

    ORDER_ZERO = (('identity', {}), ('frequency_bump', {'width': 2.0}), ('x_modulated', {'m': 0.0}),
                  ('riesz_xi', {}))

    def run(self) -> Report:
        report = self.new_report()
        tol = self.tolerances
        grid = self.context.grid(64)
        trials = int(self.context.option('trials', 6))
        seed = self.context.seed
        slack = tol['norm_slack']

        if self.context.symbols:
            p, q, r = (float(self.context.option(k, d)) for k, d in (('p', 4.0), ('q', 4.0), ('r', 2.0)))
            for symbol in self.context.symbols:
                estimate = estimate_norm(symbol, p, q, r, trials, seed, grid, tolerances=tol)
                report.results[f"norm[{symbol}]"] = estimate.to_dict()
                report.add(self._trend_verdict(f"no_growth[{symbol},({p:g},{q:g},{r:g})]", estimate.sweep))
                self.guarded(report, f"l2_wsinf[{symbol}]", lambda s=symbol: self._sobolev(report, s, grid, trials))
            return report

        for n, delta, expected in ((1, 0.0, 3), (1, 0.5, 4)):
            report.add(Verdict.close_to(f"threshold_s[n={n},delta={delta}]", threshold_s(n, delta), expected, 0,
                                        self.module))

        identity = self.context.builtin('identity')
        holder = estimate_norm(identity, 4.0, 4.0, 2.0, trials, seed, grid, tolerances=tol)
        report.results['holder_identity'] = holder.to_dict()
        report.add(Verdict.at_most('holder_identity', holder.ratio_max, 1.0 + slack, self.module))

        for name, params in self.ORDER_ZERO:
            symbol = builtin_family(name, params or None, dim=self.context.dim)
            for estimate in holder_sweep(symbol, trials, seed, grid, tol):
                label = f"({estimate.p:g},{estimate.q:g},{estimate.r:.4g})"
                report.results[f"holder_sweep[{symbol},{label}]"] = estimate.to_dict()
                note = 'endpoint approximated by large q' if estimate.endpoint_approximated else ''
                report.add(self._trend_verdict(f"no_growth[{symbol},{label}]", estimate.sweep, note))

        sobolev = l2_wsinf_check(identity, trials, seed, grid, tolerances=tol)
        report.results['l2_wsinf_identity'] = sobolev.to_dict()
        report.add(Verdict.at_most('l2_wsinf_identity', sobolev.ratio_max, 1.0 + slack, self.module))
        self.guarded(report, 'l2_wsinf[chirp]', lambda: self._sobolev(
            report, self.context.builtin('chirp', delta=0.5, amplitude=1.0), grid, trials))

        control = estimate_norm(self.context.builtin('elliptic', m=1.0), 4.0, 4.0, 2.0, trials, seed, grid,
                                tolerances=tol)
        report.results['positive_control'] = control.to_dict()
        report.add(Verdict(f"positive_control[{control.symbol}]",
                           Status.PASS if control.unbounded_trend else Status.FAIL,
                           control.sweep.trend_slope, f"> {tol['trend_slope']}", tol['trend_slope'], self.module,
                           note='order-1 symbol must show a growth trend'))
        return report

    def _sobolev(self, report: Report, symbol: SymbolExpr, grid: GridSpec, trials: int) -> None:
        result = l2_wsinf_check(symbol, trials, self.context.seed, grid, tolerances=self.tolerances)
        report.results[f"l2_wsinf[{symbol}]"] = result.to_dict()
        report.add(self._trend_verdict(f"l2_wsinf_no_growth[{symbol}]", result.sweep))

    def _trend_verdict(self, name: str, sweep, note: str = '') -> Verdict:
        limit = self.tolerances['trend_slope']
        if sweep.trend_slope is None:
            return Verdict.indeterminate(name, 'fewer than two nonzero maxima', self.module)
        return Verdict.at_most(name, sweep.trend_slope, limit, self.module, note)


class LeibnizSuite(BaseSuite):
    """φ partition, splitting identities, split classes and the Leibniz bound sweep"""
    command = 'leibniz'
    module = 'bounds-suite'

    def _default_symbols(self, grid: GridSpec) -> List[SymbolExpr]:
        b = self.context.builtin
        chirp = bump_cut(b('chirp', delta=0.5, amplitude=1.0), grid, self.tolerances['bump_cut_fraction'])
        return [b('identity'), b('elliptic', m=2.0), b('frequency_bump', width=2.0), b('derivative_xi'),
                b('derivative_eta'), chirp, b('x_modulated', m=0.0), b('riesz_xi')]

    def run(self) -> Report:
        report = self.new_report()
        tol = self.tolerances
        grid = self.context.grid(64)
        orders: Sequence[float] = self.context.option('m', [0.0, 1.0, 2.0])
        if not isinstance(orders, (list, tuple)):
            orders = [float(orders)]

        report.add(Verdict.at_most('phi_partition', phi_partition(seed=self.context.seed), tol['phi_partition'],
                                   self.module))

        rng = seeded_rng(self.context.seed, 3)
        f, g = random_trig_polynomial(grid, rng), random_trig_polynomial(grid, rng)
        symbols = self.context.symbols or self._default_symbols(grid)
        for symbol in symbols:
            for m in orders:
                split = leibniz_split(symbol, m)
                report.add(Verdict.at_most(f"partition[{symbol},m={m:g}]", partition_residual(split),
                                           tol['partition_residual'], self.module))
                residual = leibniz_identity_check(symbol, m, f, g)
                report.results[f"identity[{symbol},m={m:g}]"] = residual.to_dict()
                report.add(Verdict.at_most(f"leibniz_identity[{symbol},m={m:g}]", residual.relative_residual,
                                           tol['leibniz_residual'], self.module))

        if not self.context.symbols:
            split = leibniz_split(self.context.builtin('elliptic', m=2.0), 2.0)
            for part, seminorms in split_class_reports(split, ratio=tol['stabilization_ratio']).items():
                report.results[f"split_class[{part}]"] = seminorms.to_dict()
                report.add(Verdict.flag(f"split_class[{part}]", seminorms.consistent, module=self.module))
            symbols = [self.context.builtin('identity'), self.context.builtin('elliptic', m=1.0)]

        trials = int(self.context.option('trials', 6))
        for symbol in symbols:
            m = max(0.0, symbol.declared.m) if symbol.declared is not None else 0.0
            sweep = leibniz_bound_sweep(symbol, m, trials, self.context.seed, grid, tolerances=tol)
            report.results[f"leibniz_bound[{symbol}]"] = sweep.to_dict()
            if sweep.sweep.trend_slope is None:
                report.add(Verdict.indeterminate(f"leibniz_bound[{symbol}]", 'no nonzero ratios', self.module))
            else:
                report.add(Verdict.at_most(f"leibniz_bound[{symbol}]", sweep.sweep.trend_slope,
                                           tol['trend_slope'], self.module))
        return report


SUITES = {
    'verify-class': ClassSuite,
    'apply': ApplySuite,
    'transpose': TransposeSuite,
    'expand': ExpandSuite,
    'asym-sum': AsymptoticSuite,
    'kernel-decay': KernelSuite,
    'bounds': BoundsSuite,
    'leibniz': LeibnizSuite,
}


class Orchestrator:
    """Runs one command, or every suite in order for full-suite"""

    def __init__(self, context: SuiteContext):
        self.context = context

    def run(self, command: str, config_echo: Optional[Dict[str, Any]] = None) -> Report:
        if command not in COMMANDS:
            raise ValueError(f"unknown command {command}")
        with LogContext(logger, command=command, seed=self.context.seed):
            logger.info(f"Running {command}")
            if command == 'full-suite':
                report = self._full_suite()
            else:
                report = self._run_suite(command, self.context)
        report.config = config_echo or {}
        counts = report.summary()
        logger.info(f"{command} finished: {report.status.value} ({counts})")
        return report

    def _run_suite(self, command: str, context: SuiteContext, contain_usage: bool = False) -> Report:
        """Library errors become the report's error entry; usage errors propagate unless contained"""
        suite = SUITES[command](context)
        try:
            return suite.run()
        except BilinearCalculusError as e:
            if isinstance(e, USAGE_ERRORS) and not contain_usage:
                raise
            report = suite.new_report()
            report.error = handle_exception(e, command)
            return report

    def _full_suite(self) -> Report:
        """Every suite on its built-in defaults; input symbols are ignored"""
        report = Report('full-suite', {}, self.context.seed)
        defaults = SuiteContext(self.context.seed, self.context.tolerances, self.context.dim,
                                self.context.half_period, self.context.grid_points, workers=self.context.workers)
        for command in SUITES:
            sub = self._run_suite(command, defaults, contain_usage=True)
            report.extend(sub)
            if sub.error is not None:
                report.results[command] = {'error': sub.error}
                report.add(Verdict(f"{command}:error", Status.FAIL, sub.error['error'], None, None, command,
                                   sub.error['message']))
        return report
