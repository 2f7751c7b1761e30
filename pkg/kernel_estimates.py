"""
Kernel Estimates
Trilinear kernels k(x, y, z) of frequency-localized symbols, computed directly
and through the lifted linear symbol P((x1, x2), (ξ, η)) = p((x1+x2)/2, ξ, η),
and the decay regimes of their derivatives in S = |x-y| + |x-z| + |y-z|.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.fft
import sympy as sp

from config import default_tolerances, get_config
from exceptions import HypothesisViolationError, InsufficientRangeError, NotLocalizedError, ValidationError
from fourier_core import GridFunction, GridSpec
from bilinear_operator import DiscreteBilinearOp, apply, plane_waves
from logging_config import get_logger
from symbols import (
    ClassParams, SymbolExpr, bump_cut, hormander_seminorm, seminorm_grid, shell_samples, symbol_variables,
)
from transpose_calculus import localization_ratio
from utils import (
    DecayFit, MultiIndex, as_multi_index, derivative_triples, fit_loglog, get_cache, multi_indices, order, triple_key,
)

logger = get_logger(__name__)

REGIME_POWER = 'power'
REGIME_LOG = 'log'
REGIME_BOUNDED = 'bounded'


# Metric

def s_metric(x: Any, y: Any, z: Any, period: Optional[float] = None) -> np.ndarray:
    """|x-y| + |x-z| + |y-z| for points stacked on axis 0; with a period, nearest periodic images"""
    def distance(a, b):
        diff = np.atleast_1d(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
        if period is not None:
            diff = diff - period * np.round(diff / period)
        return np.sqrt(np.sum(diff ** 2, axis=0))

    return distance(x, y) + distance(x, z) + distance(y, z)


def grid_s_metric(grid: GridSpec, rows: np.ndarray) -> np.ndarray:
    """S(x_j, y_m, z_p) on the periodic grid for j in rows; shape (len(rows), P, P)"""
    nodes = grid.flat_nodes
    return s_metric(nodes[:, rows][:, :, None, None], nodes[:, None, :, None], nodes[:, None, None, :],
                    period=2 * grid.half_period)


# Lifted linear symbols

@dataclass(frozen=True)
class LinearSymbol:
    """P(X, ζ) on ℝ^{2n}: X = (x1, x2), ζ = (ξ, η)"""
    expr: sp.Expr
    base_dim: int = 1

    @property
    def variables(self):
        n = self.base_dim
        xs1 = sp.symbols(f"X1_1:{n + 1}", real=True)
        xs2 = sp.symbols(f"X2_1:{n + 1}", real=True)
        _, xis, etas = symbol_variables(n)
        return tuple(xs1) + tuple(xs2), tuple(xis) + tuple(etas)

    def evaluate(self, X: np.ndarray, zeta: np.ndarray) -> np.ndarray:
        """X and zeta stacked on axis 0 with 2n components each"""
        cache = get_cache('lambdified')
        xs, zs = self.variables
        key = ('linear', self.expr, self.base_dim)
        fn = cache.get(key)
        if fn is None:
            fn = sp.lambdify(xs + zs, self.expr, modules='numpy')
            cache.set(key, fn)
        args = list(np.asarray(X, dtype=float)) + list(np.asarray(zeta, dtype=float))
        with np.errstate(all='ignore'):
            values = fn(*args)
        shape = np.broadcast_shapes(*(a.shape for a in args))
        return np.broadcast_to(np.asarray(values, dtype=complex), shape).copy()

    def differentiate(self, alpha: MultiIndex, beta: MultiIndex) -> 'LinearSymbol':
        xs, zs = self.variables
        spec = [(v, k) for v, k in zip(xs, alpha) if k] + [(v, k) for v, k in zip(zs, beta) if k]
        return LinearSymbol(sp.diff(self.expr, *spec) if spec else self.expr, self.base_dim)

    def seminorm(self, alpha: MultiIndex, beta: MultiIndex, params: ClassParams, shells: int = 8,
                 gauge: str = 'euclidean', offsets: Sequence[float] = (0.0, 0.3, 1.1)) -> float:
        """sup |∂_X^α ∂_ζ^β P|·w^{-(m+δ|α|-ρ|β|)}, w = 1+|ζ| (or 1+|ξ|+|η| for gauge='l1')

        X runs over pairs (x+t, x-t) whose midpoints are the seminorm x-nodes.
        """
        n = self.base_dim
        derivative = self.differentiate(alpha, beta)
        exponent = params.m + params.delta * order(alpha) - params.rho * order(beta)
        midpoints = seminorm_grid(n).flat_nodes
        pairs = np.concatenate([np.concatenate([midpoints + t, midpoints - t]) for t in offsets], axis=1)
        best = 0.0
        for xi, eta in shell_samples(n, shells):
            zeta = np.concatenate([xi, eta])
            if gauge == 'l1':
                weight = 1.0 + np.linalg.norm(xi, axis=0) + np.linalg.norm(eta, axis=0)
            else:
                weight = 1.0 + np.linalg.norm(zeta, axis=0)
            values = np.abs(derivative.evaluate(pairs[:, :, None], zeta[:, None, :]))
            best = max(best, float(np.max(values * weight[None, :] ** (-exponent))))
        return best


def lift_symbol(p: SymbolExpr) -> LinearSymbol:
    """P((x1, x2), (ξ, η)) = p((x1+x2)/2, ξ, η)"""
    lifted = LinearSymbol(sp.Integer(0), p.dim)
    xs, _ = lifted.variables
    n = p.dim
    base_x, _, _ = symbol_variables(n)
    mapping = {base_x[d]: (xs[d] + xs[n + d]) / 2 for d in range(n)}
    return LinearSymbol(p.expr.subs(mapping, simultaneous=True), n)


def lifted_seminorm_comparison(p: SymbolExpr, params: Optional[ClassParams] = None, max_order: int = 1,
                               shells: int = 8) -> Dict[str, Dict[str, float]]:
    """Per (α1, α2, β, γ): lifted seminorm against (1/2)^{|α1+α2|} times the bilinear seminorm"""
    params = params or p.declared
    if params is None:
        raise ValidationError("seminorm comparison needs a class", field='class')
    n = p.dim
    lifted = lift_symbol(p)
    rows = {}
    for a in multi_indices(2 * n, max_order):
        for b in multi_indices(2 * n, max_order - order(a)):
            alpha = tuple(x + y for x, y in zip(a[:n], a[n:]))
            bilinear = hormander_seminorm(p, params, alpha, b[:n], b[n:], shells)
            linear = lifted.seminorm(a, b, params, shells, gauge='l1')
            rows[f"A({','.join(map(str, a))})Z({','.join(map(str, b))})"] = {
                'lifted': linear,
                'bilinear': bilinear,
                'bound': 0.5 ** order(a) * bilinear,
            }
    return rows


# Kernels

@dataclass
class KernelSlice:
    """Continuous kernel values k(x_j, y_m, z_p) for j in rows"""
    grid: GridSpec
    rows: np.ndarray
    values: np.ndarray
    label: str = ''
    localization: float = 0.0

    def s_values(self) -> np.ndarray:
        return grid_s_metric(self.grid, self.rows)


def kernel_derivative_symbol(p: SymbolExpr, alpha: Any = None, beta: Any = None, gamma: Any = None) -> SymbolExpr:
    """Symbol whose kernel is D_x^α D_y^β D_z^γ k: ∂_y ↦ -iξ, ∂_z ↦ -iη, ∂_x ↦ ∂_x + i(ξ+η)"""
    n = p.dim
    alpha, beta, gamma = (as_multi_index(v, n) for v in (alpha, beta, gamma))
    xs, xis, etas = symbol_variables(n)
    q = p.expr
    for d in range(n):
        q = q * (-sp.I * xis[d]) ** beta[d] * (-sp.I * etas[d]) ** gamma[d]
    for d in range(n):
        for _ in range(alpha[d]):
            q = sp.diff(q, xs[d]) + sp.I * (xis[d] + etas[d]) * q
    return SymbolExpr(q, n, label=f"kernel_{triple_key(alpha, beta, gamma)}({p})")


def default_rows(grid: GridSpec) -> np.ndarray:
    if grid.dim == 1 and grid.points_per_axis <= 128:
        return np.arange(grid.size)
    return np.unique(np.linspace(0, grid.size - 1, 8).astype(int))


def compute_kernel(p: SymbolExpr, grid: GridSpec, route: str = 'lifted', rows: Optional[np.ndarray] = None,
                   threshold: Optional[float] = None, check_localized: bool = True) -> KernelSlice:
    """k(x_j, ·, ·) for j in rows, by the lifted FFT route or the direct double sum"""
    if route not in ('lifted', 'direct'):
        raise ValidationError(f"route must be 'lifted' or 'direct', got {route!r}", field='route')
    threshold = default_tolerances()['localization'] if threshold is None else threshold
    rows = default_rows(grid) if rows is None else np.asarray(rows, dtype=int)
    op = DiscreteBilinearOp.from_symbol(p, grid)
    blocks = [op.symbol_block(slice(j, j + 1))[0] for j in rows]

    ratio = localization_ratio(np.stack(blocks), grid)
    if check_localized and ratio > threshold:
        raise NotLocalizedError(ratio, threshold)

    scale = 1.0 / grid.cell_volume ** 2
    values = np.empty((len(rows), grid.size, grid.size), dtype=complex)
    if route == 'direct':
        waves = plane_waves(grid)
        conjugate = waves.conj()
        for i, (j, block) in enumerate(zip(rows, blocks)):
            twisted = block * waves[j][:, None] * waves[j][None, :]
            values[i] = conjugate @ twisted @ conjugate.T * (scale / grid.size ** 2)
    else:
        n = grid.points_per_axis
        node_index = np.unravel_index(np.arange(grid.size), grid.shape)
        workers = max(1, get_config().workers)
        for i, (j, block) in enumerate(zip(rows, blocks)):
            lifted = scipy.fft.ifftn(block.reshape(grid.shape + grid.shape), workers=workers)
            first = tuple((node_index[d][j] - node_index[d])[:, None] % n for d in range(grid.dim))
            second = tuple((node_index[d][j] - node_index[d])[None, :] % n for d in range(grid.dim))
            values[i] = lifted[first + second] * scale
    return KernelSlice(grid, rows, values, label=str(p), localization=ratio)


def route_agreement(p: SymbolExpr, grid: GridSpec, rows: Optional[np.ndarray] = None) -> float:
    """max |k_direct - k_lifted| / max |k_direct|"""
    direct = compute_kernel(p, grid, 'direct', rows, check_localized=False).values
    lifted = compute_kernel(p, grid, 'lifted', rows, check_localized=False).values
    return float(np.abs(direct - lifted).max() / max(np.abs(direct).max(), 1e-300))


def kernel_apply(kernel: KernelSlice, f: GridFunction, g: GridFunction) -> np.ndarray:
    """∬ k(x_j, y, z) f(y) g(z) dy dz by the grid quadrature, for the kernel's rows"""
    weight = kernel.grid.cell_volume ** 2
    return np.einsum('jmp,m,p->j', kernel.values, f.flat(), g.flat()) * weight


def operator_kernel_consistency(p: SymbolExpr, grid: GridSpec, f: GridFunction, g: GridFunction) -> float:
    """Relative gap between the kernel route and apply() on all rows"""
    kernel = compute_kernel(p, grid, rows=np.arange(grid.size), check_localized=False)
    direct = apply(DiscreteBilinearOp.from_symbol(p, grid), f, g).flat()
    return float(np.abs(kernel_apply(kernel, f, g) - direct).max() / max(np.abs(direct).max(), 1e-300))


# Decay

@dataclass
class KernelDecay:
    M: int
    regime: str
    predicted_exponent: Optional[float]
    shell_centers: List[float]
    shell_sups: List[float]
    fit: Optional[DecayFit] = None
    log_fit: Optional[Dict[str, float]] = None
    super_polynomial: bool = False
    passed: Optional[bool] = None
    refinement: Optional['RefinementResult'] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'M': self.M,
            'regime': self.regime,
            'predicted_exponent': self.predicted_exponent,
            'shell_centers': self.shell_centers,
            'shell_sups': self.shell_sups,
            'fit': self.fit.to_dict() if self.fit else None,
            'log_fit': self.log_fit,
            'super_polynomial': self.super_polynomial,
            'passed': self.passed,
            'refinement': self.refinement.to_dict() if self.refinement else None,
        }

    def curve_rows(self) -> List[Dict[str, Any]]:
        """CSV rows, one per S shell"""
        fitted = self.fit.exponent if self.fit else None
        r2 = self.fit.r_squared if self.fit else (self.log_fit or {}).get('r_squared')
        return [{
            'S_shell_center': center,
            'sup_abs_kernel': sup,
            'derivative_order': self.M,
            'predicted_exponent': self.predicted_exponent,
            'fitted_exponent': fitted,
            'r_squared': r2,
        } for center, sup in zip(self.shell_centers, self.shell_sups)]


def regime_for(m: float, M: int, dim: int) -> str:
    critical = m + M + 2 * dim
    if critical > 0:
        return REGIME_POWER
    if critical == 0:
        return REGIME_LOG
    return REGIME_BOUNDED


def shell_profile(kernels: Sequence[KernelSlice], shells: int) -> Tuple[np.ndarray, np.ndarray]:
    """Geometric S shells between 2·spacing and L/2 with the sup of |k| over all given kernels"""
    grid = kernels[0].grid
    edges = np.geomspace(2 * grid.spacing, grid.half_period / 2, shells + 1)
    s = kernels[0].s_values()
    magnitude = np.max([np.abs(k.values) for k in kernels], axis=0)
    centers, sups = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mask = (s >= lo) & (s < hi)
        if mask.any():
            centers.append(float(np.sqrt(lo * hi)))
            sups.append(float(magnitude[mask].max()))
    return np.asarray(centers), np.asarray(sups)


def decay_fit(kernels: Sequence[KernelSlice], M: int, params: ClassParams,
              tolerances: Optional[Dict[str, Any]] = None,
              refinement: Optional['RefinementResult'] = None) -> KernelDecay:
    """Classify and fit the shell sups of the order-M derivative kernels

    The bounded regime passes when the sups are finite and `refinement` (the
    same kernels at N and 2N) is stable; without it the verdict stays undecided.
    """
    tolerances = tolerances or default_tolerances()
    grid = kernels[0].grid
    regime = regime_for(params.m, M, grid.dim)
    centers, sups = shell_profile(kernels, tolerances['kernel_shells'])
    usable = int(np.sum(sups > 0))
    if usable < 4:
        raise InsufficientRangeError(usable, 4)

    result = KernelDecay(M, regime, None, centers.tolist(), sups.tolist())
    if regime == REGIME_POWER:
        predicted = -(params.m + M + 2 * grid.dim) / params.rho
        fit = fit_loglog(centers, sups, zero_floor=0.0)
        tolerance = tolerances['kernel_exponent_tolerance'] if M == 0 else tolerances['kernel_gradient_tolerance']
        result.predicted_exponent = predicted
        result.fit = fit
        result.super_polynomial = bool(sups[-1] < 1e-8 * sups[0] or fit.exponent < predicted - 2)
        result.passed = result.super_polynomial or abs(fit.exponent - predicted) <= tolerance
    elif regime == REGIME_LOG:
        x = np.log(1.0 / centers)
        slope, intercept = np.polyfit(x, sups, 1)
        residual = sups - (slope * x + intercept)
        total = sups - sups.mean()
        ss_tot = float(total @ total)
        r2 = 1.0 - float(residual @ residual) / ss_tot if ss_tot > 0 else 1.0
        result.log_fit = {'slope': float(slope), 'intercept': float(intercept), 'r_squared': max(0.0, min(1.0, r2))}
        result.passed = bool(result.log_fit['r_squared'] >= tolerances['min_r_squared'])
    else:
        result.refinement = refinement
        if not np.all(np.isfinite(sups)):
            result.passed = False
        elif refinement is not None:
            result.passed = bool(refinement.stable)
    if result.passed is False:
        logger.warning(f"Kernel decay check failed for M={M} in regime {regime}")
    return result


def kernel_decay(p: SymbolExpr, grid: GridSpec, M: int = 0, params: Optional[ClassParams] = None,
                 rows: Optional[np.ndarray] = None, tolerances: Optional[Dict[str, Any]] = None) -> KernelDecay:
    """Derivative kernels of total order M, then decay_fit"""
    params = params or p.declared
    if params is None:
        raise ValidationError("kernel decay needs a declared class", field='class')
    kernels = [compute_kernel(kernel_derivative_symbol(p, a, b, g), grid, rows=rows)
               for a, b, g in derivative_triples(p.dim, M) if order(a) + order(b) + order(g) == M]
    refinement = None
    if regime_for(params.m, M, p.dim) == REGIME_BOUNDED:
        refinement = refinement_stability(p, grid, M=M, weight_orders=range(1), tolerances=tolerances)
    return decay_fit(kernels, M, params, tolerances, refinement)


@dataclass
class CZKReport:
    size: KernelDecay
    gradient: KernelDecay

    @property
    def super_polynomial(self) -> bool:
        return self.size.super_polynomial

    @property
    def passed(self) -> bool:
        return bool(self.size.passed and self.gradient.passed)

    def to_dict(self) -> Dict[str, Any]:
        return {'passed': self.passed, 'super_polynomial': self.super_polynomial,
                'size': self.size.to_dict(), 'gradient': self.gradient.to_dict()}


def czk_report(p: SymbolExpr, grid: GridSpec, params: Optional[ClassParams] = None,
               rows: Optional[np.ndarray] = None, tolerances: Optional[Dict[str, Any]] = None) -> CZKReport:
    """Size |k| ≲ S^{-2n} and gradient |∇k| ≲ S^{-2n-1}"""
    params = params or p.declared
    if params is None or params.m != 0 or params.rho != 1:
        raise HypothesisViolationError("Calderón-Zygmund evidence needs a symbol of class BS^0_{1,delta}",
                                       details=params.to_dict() if params else {})
    size = kernel_decay(p, grid, 0, params, rows, tolerances)
    gradient = kernel_decay(p, grid, 1, params, rows, tolerances)
    return CZKReport(size, gradient)


# Refinement

@dataclass
class RefinementResult:
    coarse_sup: float
    fine_sup: float
    relative_change: float
    stable: bool
    weighted: Dict[int, Dict[str, float]] = field(default_factory=dict)
    smallest_stable_order: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'coarse_sup': self.coarse_sup,
            'fine_sup': self.fine_sup,
            'relative_change': self.relative_change,
            'stable': self.stable,
            'weighted': {str(k): v for k, v in sorted(self.weighted.items())},
            'smallest_stable_order': self.smallest_stable_order,
        }


def refinement_stability(p: SymbolExpr, grid: GridSpec, fraction: Optional[float] = None, M: int = 0,
                         weight_orders: Sequence[int] = range(7),
                         tolerances: Optional[Dict[str, Any]] = None) -> RefinementResult:
    """Kernel sups at N and 2N; with `fraction` the symbol is re-cut at that fraction of each grid's Nyquist"""
    tolerances = tolerances or default_tolerances()
    tolerance = tolerances['refinement_stability']
    results = []
    for current in (grid, grid.refined()):
        symbol = bump_cut(p, current, fraction) if fraction else p
        kernels = [compute_kernel(kernel_derivative_symbol(symbol, a, b, g), current)
                   for a, b, g in derivative_triples(p.dim, M) if order(a) + order(b) + order(g) == M]
        magnitude = np.max([np.abs(k.values) for k in kernels], axis=0)
        s = kernels[0].s_values()
        results.append((magnitude, s))

    def relative(a: float, b: float) -> float:
        return abs(b - a) / max(abs(a), abs(b), 1e-300)

    coarse, fine = (float(m.max()) for m, _ in results)
    outcome = RefinementResult(coarse, fine, relative(coarse, fine), relative(coarse, fine) <= tolerance)
    for N in weight_orders:
        sups = [float(np.max((1.0 + s) ** N * m)) for m, s in results]
        change = relative(*sups)
        outcome.weighted[N] = {'coarse': sups[0], 'fine': sups[1], 'relative_change': change}
        if outcome.smallest_stable_order is None and change <= tolerance:
            outcome.smallest_stable_order = N
    return outcome
