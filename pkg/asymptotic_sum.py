"""
Asymptotic Sum
Borel-type sums a = Σ_j ψ(ε_j ξ, ε_j η) a_j with a measured ε_j schedule, and the
sufficient criterion comparing a symbol against a candidate expansion.
"""

from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp

from config import default_tolerances, get_config
from exceptions import ClassInconsistencyError, ValidationError
from fourier_core import GridSpec
from logging_config import get_logger
from symbols import (
    ClassParams, SymbolExpr, class_report, hormander_seminorm, seminorm_grid, shell_samples, split_components,
    frequency_radius_squared, smooth_step,
)
from utils import DecayFit, derivative_triples, dyadic_radii, fit_loglog, index_binomial, sub_indices, triple_key

logger = get_logger(__name__)

PSI_SCALES = (1.0, 0.5, 0.25, 0.125)


@dataclass(frozen=True)
class CutoffPsi:
    """ψ = 0 for ρ₂ <= inner, ψ = 1 for ρ₂ >= outer, ρ₂ = (|ξ|²+|η|²)^{1/2}"""
    inner_radius: float = 1.0
    outer_radius: float = 2.0
    dim: int = 1

    def symbol(self, epsilon: float = 1.0) -> SymbolExpr:
        """ψ(εξ, εη)"""
        inner = self.inner_radius / epsilon
        outer = self.outer_radius / epsilon
        t = (frequency_radius_squared(self.dim) - sp.Float(inner) ** 2) / (sp.Float(outer) ** 2 - sp.Float(inner) ** 2)
        return SymbolExpr(smooth_step(t), self.dim, declared=ClassParams(0.0, 1.0, 0.0),
                          label=f"psi(eps={epsilon:g})")

    def evaluate(self, xi: Any, eta: Any, epsilon: float = 1.0) -> np.ndarray:
        return self.symbol(epsilon).evaluate(np.zeros(self.dim) if self.dim > 1 else 0.0, xi, eta).real

    def derivative_bound(self, beta: Tuple[int, ...], gamma: Tuple[int, ...], scales: Sequence[float] = PSI_SCALES,
                         shells: int = 8, **kwargs) -> float:
        """sup over ε of |∂_ξ^β ∂_η^γ ψ(ε·)|·(1+|ξ|+|η|)^{|β|+|γ|}"""
        zero = (0,) * self.dim
        return max(hormander_seminorm(self.symbol(eps), ClassParams(0.0, 1.0, 0.0), zero, beta, gamma,
                                      shells, grid=_frequency_only_grid(self.dim), **kwargs)
                   for eps in scales)


def _frequency_only_grid(dim: int) -> GridSpec:
    return GridSpec(dim, float(np.pi), 8)


def make_cutoff(inner: float = 1.0, outer: float = 2.0, dim: int = 1) -> CutoffPsi:
    if not 0 < inner < outer:
        raise ValidationError(f"cutoff needs 0 < inner < outer, got inner={inner}, outer={outer}")
    return CutoffPsi(float(inner), float(outer), dim)


@dataclass
class SumSchedule:
    epsilons: List[float]
    orders: List[float]
    measured_constants: List[float]
    cutoff: CutoffPsi = field(default_factory=CutoffPsi)

    def violations(self) -> List[str]:
        problems = []
        for j, (eps, constant) in enumerate(zip(self.epsilons, self.measured_constants)):
            if not 0 < eps < 1:
                problems.append(f"epsilon[{j}]={eps} outside (0, 1)")
            if eps * constant > 2.0 ** (-j) * (1 + 1e-12):
                problems.append(f"epsilon[{j}]*C[{j}]={eps * constant} exceeds 2^-{j}")
        for j in range(1, len(self.epsilons)):
            if self.epsilons[j] > self.epsilons[j - 1] / 2 * (1 + 1e-12):
                problems.append(f"epsilon[{j}] is not at most epsilon[{j - 1}]/2")
            if self.orders[j] > self.orders[j - 1]:
                problems.append(f"order[{j}] increases")
        return problems

    def switch_on_radius(self, j: int) -> float:
        """ρ₂ beyond which term j is active"""
        return self.cutoff.inner_radius / self.epsilons[j]

    def full_radius(self, j: int) -> float:
        """ρ₂ beyond which ψ(ε_j·) ≡ 1"""
        return self.cutoff.outer_radius / self.epsilons[j]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'epsilons': self.epsilons,
            'orders': self.orders,
            'measured_constants': self.measured_constants,
            'cutoff': {'inner_radius': self.cutoff.inner_radius, 'outer_radius': self.cutoff.outer_radius},
        }


def _orders(a_list: Sequence[SymbolExpr]) -> List[float]:
    if not a_list:
        raise ValidationError("term list is empty", field='a_list')
    orders = []
    for j, term in enumerate(a_list):
        if term.declared is None:
            raise ValidationError(f"term {j} has no declared class", field='a_list')
        orders.append(term.declared.m)
    if any(b > a for a, b in zip(orders, orders[1:])):
        raise ValidationError(f"term orders must be nonincreasing, got {orders}", field='a_list')
    return orders


def select_epsilons(a_list: Sequence[SymbolExpr], J_max: Optional[int] = None, cutoff: Optional[CutoffPsi] = None,
                    shells: int = 8, cap: Optional[int] = None, check_classes: bool = True) -> SumSchedule:
    """ε_j = min(ε_{j-1}/2, 2^{-j}/(1+C_j)), C_j the Leibniz bound for ψ(ε·)a_j up to order j"""
    terms = list(a_list if J_max is None else a_list[:J_max + 1])
    orders = _orders(terms)
    dim = terms[0].dim
    cutoff = cutoff or CutoffPsi(dim=dim)
    cap = get_config().derivative_cap if cap is None else cap

    psi_bounds: Dict[Tuple, float] = {}

    def psi_bound(beta, gamma):
        key = (beta, gamma)
        if key not in psi_bounds:
            psi_bounds[key] = cutoff.derivative_bound(beta, gamma, shells=shells)
        return psi_bounds[key]

    epsilons, constants = [], []
    previous = 1.0
    for j, term in enumerate(terms):
        max_order = min(j, cap)
        report = class_report(term, term.declared, max_order=max_order, shells=shells, cap=cap)
        if check_classes and not report.consistent:
            raise ClassInconsistencyError(
                f"term {j} ({term}) is not consistent with its declared class",
                details={'failing': report.failing})
        lookup = _by_triple(report, dim, max_order)

        constant = 0.0
        for alpha, beta, gamma in derivative_triples(dim, max_order):
            total = 0.0
            for b1 in sub_indices(beta):
                for g1 in sub_indices(gamma):
                    rest_b = tuple(b - c for b, c in zip(beta, b1))
                    rest_g = tuple(g - c for g, c in zip(gamma, g1))
                    total += (index_binomial(beta, b1) * index_binomial(gamma, g1)
                              * psi_bound(tuple(b1), tuple(g1)) * lookup[(alpha, rest_b, rest_g)])
            constant = max(constant, total)

        epsilon = min(previous / 2, 2.0 ** (-j) / (1 + constant))
        epsilons.append(epsilon)
        constants.append(constant)
        previous = epsilon
        logger.debug(f"term {j}: C={constant:.4g}, epsilon={epsilon:.4g}")

    schedule = SumSchedule(epsilons, orders, constants, cutoff)
    problems = schedule.violations()
    if problems:
        raise ValidationError(f"schedule violates its invariants: {problems}")
    return schedule


def _by_triple(report, dim: int, max_order: int) -> Dict[Tuple, float]:
    return {(a, b, g): report.entries[triple_key(a, b, g)] for a, b, g in derivative_triples(dim, max_order)}


def schedule_with_factor(schedule: SumSchedule, factor: float = 0.5) -> SumSchedule:
    """Another valid schedule: every ε_j multiplied by factor in (0, 1]"""
    if not 0 < factor <= 1:
        raise ValidationError(f"factor must lie in (0, 1], got {factor}", field='factor')
    return SumSchedule([e * factor for e in schedule.epsilons], list(schedule.orders),
                       list(schedule.measured_constants), schedule.cutoff)


@dataclass(frozen=True)
class BorelSymbol(SymbolExpr):
    """Σ_j ψ(ε_j·) a_j; evaluation skips terms whose cutoff vanishes at every sample"""
    pieces: Tuple[SymbolExpr, ...] = ()
    thresholds: Tuple[float, ...] = ()

    def evaluate(self, x: Any, xi: Any, eta: Any) -> np.ndarray:
        xs = split_components(x, self.dim)
        xis = split_components(xi, self.dim)
        etas = split_components(eta, self.dim)
        shape = np.broadcast_shapes(*(a.shape for a in xs + xis + etas))
        xs, xis, etas = ([np.broadcast_to(a, shape) for a in group] for group in (xs, xis, etas))
        radius2 = sum(a ** 2 for a in xis + etas)

        total = np.zeros(shape, dtype=complex)
        for piece, threshold in zip(self.pieces, self.thresholds):
            active = radius2 > threshold ** 2
            if not active.any():
                break
            values = piece.evaluate(np.stack([a[active] for a in xs]), np.stack([a[active] for a in xis]),
                                    np.stack([a[active] for a in etas]))
            total[active] += values
        return total


def borel_sum(a_list: Sequence[SymbolExpr], schedule: SumSchedule) -> BorelSymbol:
    terms = list(a_list[:len(schedule.epsilons)])
    if len(terms) != len(schedule.epsilons):
        raise ValidationError("schedule is longer than the term list", field='schedule')
    dim = terms[0].dim
    pieces = tuple(SymbolExpr(schedule.cutoff.symbol(eps).expr * term.expr, dim)
                   for term, eps in zip(terms, schedule.epsilons))
    thresholds = tuple(schedule.switch_on_radius(j) for j in range(len(terms)))
    first = terms[0].declared
    return BorelSymbol(sp.Add(*(p.expr for p in pieces)), dim,
                       declared=ClassParams(first.m, first.rho, first.delta),
                       label=f"borel_sum({len(terms)} terms)", pieces=pieces, thresholds=thresholds)


def planted_tail(a: BorelSymbol, tail: SymbolExpr) -> BorelSymbol:
    """a + tail, with the tail active everywhere off the origin"""
    return replace(a, expr=a.expr + tail.expr, label=f"{a.label} + {tail}",
                   pieces=(tail,) + a.pieces, thresholds=(0.0,) + a.thresholds)


# Remainders

def radial_sups(values_at, dim: int, radii: Sequence[float], directions: Optional[int] = None,
                seed: Optional[int] = None) -> List[float]:
    """sup over x-nodes and directions of |values_at(x, ξ, η)| on each sphere ρ₂ = r"""
    xi_unit, eta_unit = shell_samples(dim, 0, directions, seed)[0]
    x = seminorm_grid(dim).flat_nodes[:, :, None]
    sups = []
    for r in radii:
        values = values_at(x, r * xi_unit[:, None, :], r * eta_unit[:, None, :])
        sups.append(float(np.abs(values).max()))
    return sups


def partial_sum(a_list: Sequence[SymbolExpr], count: int):
    def values_at(x, xi, eta):
        total = 0.0
        for term in a_list[:count]:
            total = total + term.evaluate(x, xi, eta)
        return total
    return values_at


def remainder_window(schedule: Optional[SumSchedule], index: int, points: int = 4,
                     tolerances: Optional[Dict[str, Any]] = None) -> List[float]:
    """Dyadic radii starting where ψ(ε_index·) ≡ 1; the shared [min, max] window without a schedule"""
    tolerances = tolerances or default_tolerances()
    if schedule is None:
        return dyadic_radii(tolerances['fit_radius_min'], tolerances['fit_radius_max'])
    index = min(index, len(schedule.epsilons) - 1)
    start = 2.0 ** np.ceil(np.log2(2 * schedule.full_radius(index)))
    return [float(start * 2 ** i) for i in range(points)]


def remainder_fit(a: SymbolExpr, a_list: Sequence[SymbolExpr], count: int, radii: Sequence[float],
                  tolerances: Optional[Dict[str, Any]] = None) -> DecayFit:
    """Shell-sup fit of a - Σ_{j<count} a_j"""
    tolerances = tolerances or default_tolerances()
    head = partial_sum(a_list, count)
    sups = radial_sups(lambda x, xi, eta: a.evaluate(x, xi, eta) - head(x, xi, eta), a.dim, radii)
    return fit_loglog(radii, sups, zero_floor=tolerances['degenerate_zero'])


def schedule_difference_fit(a_list: Sequence[SymbolExpr], schedule: SumSchedule, N: int, factor: float = 0.5,
                            tolerances: Optional[Dict[str, Any]] = None) -> DecayFit:
    """Fit of a - b for two valid schedules, on the window where the first N cutoffs of both are 1"""
    tolerances = tolerances or default_tolerances()
    other = schedule_with_factor(schedule, factor)
    a = borel_sum(a_list, schedule)
    b = borel_sum(a_list, other)
    radii = remainder_window(other, N, tolerances=tolerances)
    sups = radial_sups(lambda x, xi, eta: a.evaluate(x, xi, eta) - b.evaluate(x, xi, eta), a.dim, radii)
    return fit_loglog(radii, sups, zero_floor=tolerances['degenerate_zero'])


@dataclass
class CriterionEntry:
    N: int
    mu: float
    fit: DecayFit
    passed: bool
    near_miss: bool

    def to_dict(self) -> Dict[str, Any]:
        return {'N': self.N, 'mu': self.mu, 'fit': self.fit.to_dict(), 'passed': self.passed,
                'near_miss': self.near_miss, 'degenerate_zero': self.fit.degenerate_zero}


@dataclass
class CriterionVerdict:
    entries: List[CriterionEntry]
    growth_ok: bool

    @property
    def passed(self) -> bool:
        return self.growth_ok and all(e.passed for e in self.entries)

    def to_dict(self) -> Dict[str, Any]:
        return {'passed': self.passed, 'growth_ok': self.growth_ok, 'entries': [e.to_dict() for e in self.entries]}


def check_expansion_criterion(a: SymbolExpr, a_list: Sequence[SymbolExpr], mu_list: Sequence[float],
                              schedule: Optional[SumSchedule] = None,
                              tolerances: Optional[Dict[str, Any]] = None) -> CriterionVerdict:
    """For each N, fit |a - Σ_{j<=N} a_j| and require exponent <= -μ_N + tolerance"""
    tolerances = tolerances or default_tolerances()
    if not a_list or not mu_list:
        raise ValidationError("term and exponent lists must be nonempty")
    if any(b <= c for c, b in zip(mu_list, mu_list[1:])):
        raise ValidationError(f"exponents must increase, got {list(mu_list)}", field='mu_list')
    _orders(a_list)

    growth = class_report(a, ClassParams(a_list[0].declared.m, a_list[0].declared.rho, a_list[0].declared.delta),
                          max_order=1, ratio=tolerances['stabilization_ratio'])
    growth_ok = growth.consistent

    tolerance = tolerances['exponent_tolerance']
    margin = tolerances['near_miss_margin']
    entries = []
    for N, mu in enumerate(mu_list[:len(a_list)]):
        radii = remainder_window(schedule, N + 1, tolerances=tolerances)
        fit = remainder_fit(a, a_list, N + 1, radii, tolerances)
        passed = fit.within(-mu, tolerance) and fit.quality_ok(tolerances['min_r_squared'])
        near_miss = not passed and fit.within(-mu, tolerance + margin)
        if near_miss:
            logger.warning(f"Criterion near miss at N={N}: exponent {fit.exponent} vs {-mu}")
        entries.append(CriterionEntry(N, float(mu), fit, passed, near_miss))
    return CriterionVerdict(entries, growth_ok)
