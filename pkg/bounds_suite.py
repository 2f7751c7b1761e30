"""
Bounds Suite
Empirical operator-norm sweeps (L^p x L^q -> L^r and L^2 x W_0^{s,inf} -> L^2)
and the exact Leibniz-rule splitting σ = σ₁⟨ξ⟩^m + σ₂⟨η⟩^m.

Every ratio reported here is a lower bound for the true norm. Boundedness can
only be falsified: a growth trend over a dilation sweep of the witnesses flags
the operator as unbounded.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp

from bilinear_operator import DiscreteBilinearOp, apply, freeze_second_argument, frozen_seminorm
from config import default_tolerances, get_config
from exceptions import ExponentMismatchError, HypothesisViolationError, ValidationError
from fourier_core import (
    GridFunction, GridSpec, bessel_potential, bump, lp_norm, norms, random_trig_polynomial, require_same_grid,
    sup_derivatives,
)
from logging_config import get_logger
from symbols import (
    ClassParams, SymbolExpr, class_report, seminorm_grid, shell_samples, smooth_step, symbol_variables,
)
from utils import seeded_rng, trend_slope

logger = get_logger(__name__)

# Four octaves of witness widths
DILATION_WIDTHS = (0.8, 0.4, 0.2, 0.1)
HOLDER_TRIPLES = ((2.0, 2.0, 1.0), (4.0, 4.0, 2.0))
LEIBNIZ_ORIENTATIONS = ('dominant', 'stated')
# Operators up to this many entries are materialized once per sweep
SWEEP_TENSOR_LIMIT = 1 << 24

LOG2 = math.log(2.0)


def default_grid(dim: int) -> GridSpec:
    return GridSpec(dim, float(np.pi), 64 if dim == 1 else 16)


def check_exponents(p: float, q: float, r: float) -> None:
    for name, value in (('p', p), ('q', q)):
        if not 1.0 < value < math.inf:
            raise ValidationError(f"{name} must satisfy 1 < {name} < inf, got {value}", field=name)
    if r < 1.0:
        raise ValidationError(f"targets with r < 1 are not supported, got r={r}", field='r')
    if abs(1.0 / p + 1.0 / q - 1.0 / r) > 1e-12:
        raise ExponentMismatchError(p, q, r)


def holder_target(p: float, q: float) -> float:
    return 1.0 / (1.0 / p + 1.0 / q)


# Witnesses

@dataclass
class Witness:
    """Enough to rebuild one (f, g) test pair"""
    seed: int
    scale_index: int
    trial: int
    family: str
    width: float
    centers: List[List[float]] = field(default_factory=list)
    modulations: List[List[float]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def witness_pair(grid: GridSpec, seed: int, scale_index: int, trial: int, width: float,
                 exponents: Optional[Tuple[float, float]] = None) -> Tuple[GridFunction, GridFunction, Witness]:
    """Seeded test pair at dilation `width`.

    With exponents (p, q), trial 0 is the power-matched pair b^{1/p}, b^{1/q} of one
    Gaussian b (the Hölder extremal). Odd trials are random trigonometric polynomials
    band-limited at ~1/width; the rest are translated bumps modulated at ~1/width.
    Draws depend on (seed, trial) only, so a sweep dilates one family of shapes.
    """
    zero = [0.0] * grid.dim
    if trial == 0 and exponents is not None:
        p, q = exponents
        f = bump(grid, width=width * math.sqrt(p))
        g = bump(grid, width=width * math.sqrt(q))
        return f, g, Witness(seed, scale_index, trial, 'matched_bump', width, [zero, zero], [zero, zero])

    rng = seeded_rng(seed, trial)
    if trial % 2 == 1:
        band = min(0.45, 1.0 / (width * grid.points_per_axis))
        f = random_trig_polynomial(grid, rng, band_fraction=band)
        g = random_trig_polynomial(grid, rng, band_fraction=band)
        return f, g, Witness(seed, scale_index, trial, 'trig_polynomial', width)

    step = grid.frequency_step
    centers = rng.uniform(-grid.half_period / 2, grid.half_period / 2, size=(2, grid.dim))
    # modulations stay on the frequency lattice so the pair remains periodic
    modulations = step * np.round(rng.uniform(-1.0, 1.0, size=(2, grid.dim)) / (width * step))
    f = bump(grid, centers[0], width, modulations[0])
    g = bump(grid, centers[1], width, modulations[1])
    return f, g, Witness(seed, scale_index, trial, 'modulated_bump', width,
                         centers.tolist(), modulations.tolist())


def _prepared(symbol: SymbolExpr, grid: GridSpec) -> DiscreteBilinearOp:
    op = DiscreteBilinearOp.from_symbol(symbol, grid)
    if op.entries <= SWEEP_TENSOR_LIMIT:
        op.materialize()
    return op


def _ratio(numerator: float, denominator: float) -> float:
    return numerator / denominator if denominator > 0 else 0.0


# Dilation sweeps

@dataclass
class DilationSweep:
    """Per-width maxima of a norm ratio and the growth trend against 1/width"""
    widths: List[float]
    maxima: List[float]
    witnesses: List[Witness]
    trials: int
    trend_slope: Optional[float]
    unbounded_trend: bool

    @property
    def ratio_max(self) -> float:
        return max(self.maxima)

    @property
    def witness(self) -> Witness:
        return self.witnesses[int(np.argmax(self.maxima))]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'widths': self.widths,
            'ratio_max_per_width': self.maxima,
            'trials_per_width': self.trials,
            'trend_slope': self.trend_slope,
            'unbounded_trend': self.unbounded_trend,
        }


def _map_trials(run: Callable[[int], Tuple[float, Witness]], trials: int,
                workers: Optional[int]) -> List[Tuple[float, Witness]]:
    workers = get_config().workers if workers is None else workers
    if workers <= 1:
        return [run(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(run, range(trials)))


def dilation_sweep(measure: Callable[[GridFunction, GridFunction], float], grid: GridSpec, trials: int,
                   seed: int, widths: Sequence[float] = DILATION_WIDTHS,
                   exponents: Optional[Tuple[float, float]] = None,
                   threshold: Optional[float] = None, workers: Optional[int] = None) -> DilationSweep:
    """Run `measure` over seeded witness pairs at each width; the reduction is a max"""
    if trials < 1:
        raise ValidationError(f"trials must be positive, got {trials}", field='trials')
    if len(widths) < 2:
        raise ValidationError("a dilation sweep needs at least two widths", field='widths')
    threshold = default_tolerances()['trend_slope'] if threshold is None else threshold

    maxima, witnesses = [], []
    for index, width in enumerate(widths):
        def run(trial: int) -> Tuple[float, Witness]:
            f, g, witness = witness_pair(grid, seed, index, trial, width, exponents)
            return float(measure(f, g)), witness

        results = _map_trials(run, trials, workers)
        # first maximal trial wins, so ties resolve the same way every run
        best = max(range(len(results)), key=lambda i: results[i][0])
        maxima.append(results[best][0])
        witnesses.append(results[best][1])

    scales = [1.0 / w for w in widths]
    if sum(1 for v in maxima if v > 0) < 2:
        logger.warning("dilation sweep has fewer than two nonzero maxima; no trend computed")
        slope, unbounded = None, False
    else:
        slope = trend_slope(scales, maxima)
        unbounded = slope > threshold
    return DilationSweep(list(map(float, widths)), maxima, witnesses, trials, slope, unbounded)


# L^p x L^q -> L^r

@dataclass
class NormEstimate:
    """Lower bound for ‖T‖ over L^p x L^q -> L^r from seeded witnesses"""
    p: float
    q: float
    r: float
    ratio_max: float
    trials: int
    witness: Witness
    symbol: str
    sweep: DilationSweep
    endpoint_approximated: bool = False

    @property
    def unbounded_trend(self) -> bool:
        return self.sweep.unbounded_trend

    def to_dict(self) -> Dict[str, Any]:
        return {
            'symbol': self.symbol,
            'exponents': {'p': self.p, 'q': self.q, 'r': self.r},
            'trials': self.trials,
            'ratio_max': self.ratio_max,
            'trend_slope': self.sweep.trend_slope,
            'unbounded_trend': self.unbounded_trend,
            'endpoint_approximated': self.endpoint_approximated,
            'witness_seed': self.witness.seed,
            'witness': self.witness.to_dict(),
            'dilation_sweep': self.sweep.to_dict(),
        }


def estimate_norm(symbol: SymbolExpr, p: float, q: float, r: float, trials: int = 6,
                  seed: Optional[int] = None, grid: Optional[GridSpec] = None,
                  widths: Sequence[float] = DILATION_WIDTHS, tolerances: Optional[Dict[str, Any]] = None,
                  workers: Optional[int] = None) -> NormEstimate:
    """max ‖T(f,g)‖_r / (‖f‖_p ‖g‖_q) over a dilation sweep of witness pairs"""
    check_exponents(p, q, r)
    tolerances = tolerances or default_tolerances()
    seed = get_config().seed if seed is None else seed
    grid = grid or default_grid(symbol.dim)
    op = _prepared(symbol, grid)

    def measure(f: GridFunction, g: GridFunction) -> float:
        out = apply(op, f, g, workers=1)
        return _ratio(lp_norm(out, r), lp_norm(f, p) * lp_norm(g, q))

    sweep = dilation_sweep(measure, grid, trials, seed, widths, exponents=(p, q),
                           threshold=tolerances['trend_slope'], workers=workers)
    estimate = NormEstimate(p, q, r, sweep.ratio_max, trials * len(widths), sweep.witness, str(symbol), sweep)
    logger.info(f"{symbol} on L^{p} x L^{q} -> L^{r}: ratio_max={estimate.ratio_max:.4g}, "
                f"trend={sweep.trend_slope}")
    if estimate.unbounded_trend:
        logger.warning(f"{symbol} shows a growth trend at (p, q, r) = ({p}, {q}, {r})")
    return estimate


def holder_sweep(symbol: SymbolExpr, trials: int = 6, seed: Optional[int] = None,
                 grid: Optional[GridSpec] = None, tolerances: Optional[Dict[str, Any]] = None,
                 workers: Optional[int] = None) -> List[NormEstimate]:
    """(2,2,1), (4,4,2) and (2, large q, adjusted r) standing in for the L^2 x L^inf endpoint"""
    tolerances = tolerances or default_tolerances()
    estimates = [
        estimate_norm(symbol, p, q, r, trials, seed, grid, tolerances=tolerances, workers=workers)
        for p, q, r in HOLDER_TRIPLES
    ]
    large_q = float(tolerances['large_q'])
    endpoint = estimate_norm(symbol, 2.0, large_q, holder_target(2.0, large_q), trials, seed, grid,
                             tolerances=tolerances, workers=workers)
    endpoint.endpoint_approximated = True
    estimates.append(endpoint)
    return estimates


# L^2 x W_0^{s,inf} -> L^2

def threshold_s(dim: int, delta: float) -> int:
    """Smallest integer s > ([n/2]+1)/(1-δ) + n"""
    if not 0.0 <= delta < 1.0:
        raise HypothesisViolationError(f"the Sobolev threshold needs 0 <= delta < 1, got {delta}",
                                       details={'delta': delta})
    bound = (dim // 2 + 1) / (1.0 - delta) + dim
    return math.floor(bound + 1e-9) + 1


@dataclass
class SobolevBoundReport:
    symbol: str
    s: int
    k: int
    params: ClassParams
    sweep: DilationSweep
    frozen_ratio_max: float

    @property
    def ratio_max(self) -> float:
        return self.sweep.ratio_max

    def to_dict(self) -> Dict[str, Any]:
        return {
            'symbol': self.symbol,
            'class': self.params.to_dict(),
            's': self.s,
            'frozen_seminorm_order': self.k,
            'ratio_max': self.ratio_max,
            'frozen_ratio_max': self.frozen_ratio_max,
            'trend_slope': self.sweep.trend_slope,
            'unbounded_trend': self.sweep.unbounded_trend,
            'witness_seed': self.sweep.witness.seed,
            'witness': self.sweep.witness.to_dict(),
            'dilation_sweep': self.sweep.to_dict(),
        }


def _order_zero_class(symbol: SymbolExpr) -> ClassParams:
    params = symbol.declared
    if params is None:
        raise ValidationError(f"{symbol} declares no class", field='class')
    if params.m > 0:
        raise HypothesisViolationError(f"{symbol} has positive order {params.m}", details=params.to_dict())
    if params.delta >= 1.0:
        raise HypothesisViolationError(f"{symbol} needs delta < 1, got {params.delta}", details=params.to_dict())
    return params


def l2_wsinf_check(symbol: SymbolExpr, trials: int = 6, seed: Optional[int] = None,
                   grid: Optional[GridSpec] = None, widths: Sequence[float] = DILATION_WIDTHS,
                   tolerances: Optional[Dict[str, Any]] = None, workers: Optional[int] = None) -> SobolevBoundReport:
    """‖T(f,g)‖₂ / (‖f‖₂ ‖g‖_{W^{s,∞}}) over a dilation sweep, plus |σ_g|_k / ‖g‖_{W^{s,∞}}"""
    params = _order_zero_class(symbol)
    tolerances = tolerances or default_tolerances()
    seed = get_config().seed if seed is None else seed
    grid = grid or default_grid(symbol.dim)
    s = threshold_s(symbol.dim, params.delta)
    k = symbol.dim // 2 + 1
    op = _prepared(symbol, grid)
    frozen_ratios: List[float] = []

    def measure(f: GridFunction, g: GridFunction) -> float:
        g_norm = sup_derivatives(g, s)
        frozen = freeze_second_argument(op, g, workers=1)
        frozen_ratios.append(_ratio(frozen_seminorm(frozen, params.rho, params.delta, k), g_norm))
        return _ratio(lp_norm(apply(op, f, g, workers=1), 2), lp_norm(f, 2) * g_norm)

    sweep = dilation_sweep(measure, grid, trials, seed, widths,
                           threshold=tolerances['trend_slope'], workers=workers)
    report = SobolevBoundReport(str(symbol), s, k, params, sweep, max(frozen_ratios))
    logger.info(f"{symbol} on L^2 x W^{s},inf: ratio_max={report.ratio_max:.4g}, "
                f"frozen={report.frozen_ratio_max:.4g}, trend={sweep.trend_slope}")
    return report


# Leibniz splitting

def _transition(u: np.ndarray) -> np.ndarray:
    """Numeric twin of symbols.smooth_step"""
    u = np.asarray(u, dtype=float)

    def flat(v):
        positive = v > 0
        return np.where(positive, np.exp(-1.0 / np.where(positive, v, 1.0)), 0.0)

    a, b = flat(u), flat(1.0 - u)
    return a / (a + b)


def phi(r: Any) -> np.ndarray:
    """φ(r) = h(log r): 1 on (0, 1/2], 0 on [2, ∞), φ(r) + φ(1/r) = 1"""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValidationError("phi is defined for r > 0", field='r')
    return _transition((LOG2 - np.log(r)) / (2 * LOG2))


def phi_partition(samples: int = 10_000, seed: Optional[int] = None, spread: float = 12.0) -> float:
    """max |φ(r) + φ(1/r) - 1| over r = e^t, t uniform in [-spread, spread]"""
    seed = get_config().seed if seed is None else seed
    t = seeded_rng(seed, samples).uniform(-spread, spread, samples)
    r = np.exp(np.concatenate([t, [-LOG2, 0.0, LOG2]]))
    return float(np.max(np.abs(phi(r) + phi(1.0 / r) - 1.0)))


def _phi_expr(log_ratio: sp.Expr) -> sp.Expr:
    return smooth_step((sp.log(2) - log_ratio) / (2 * sp.log(2)))


@dataclass
class LeibnizSplit:
    """σ₁⟨ξ⟩^m + σ₂⟨η⟩^m = σ with σ₁, σ₂ one class order below σ"""
    symbol: SymbolExpr
    sigma1: SymbolExpr
    sigma2: SymbolExpr
    m: float
    orientation: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            'symbol': str(self.symbol),
            'm': self.m,
            'orientation': self.orientation,
            'phi': 'h(log r), smooth step on [1/2, 2], h(t) + h(-t) = 1',
            'sigma1': str(self.sigma1),
            'sigma2': str(self.sigma2),
        }


def leibniz_split(symbol: SymbolExpr, m: float, orientation: str = 'dominant') -> LeibnizSplit:
    """σ₁ = σ φ(⟨η⟩²/⟨ξ⟩²) ⟨ξ⟩^{-m}, σ₂ = σ φ(⟨ξ⟩²/⟨η⟩²) ⟨η⟩^{-m}.

    'dominant' puts σ₁ where |ξ| dominates, so ⟨ξ⟩^{-m} ~ ⟨ξ,η⟩^{-m} on its support.
    'stated' swaps the φ arguments; the partition identity holds either way but the
    class reduction does not.
    """
    if m < 0:
        raise ValidationError(f"m must be nonnegative, got {m}", field='m')
    if orientation not in LEIBNIZ_ORIENTATIONS:
        raise ValidationError(f"orientation must be one of {LEIBNIZ_ORIENTATIONS}, got {orientation}",
                              field='orientation')
    dim = symbol.dim
    _, xis, etas = symbol_variables(dim)
    xi2 = 1 + sum(v ** 2 for v in xis)
    eta2 = 1 + sum(v ** 2 for v in etas)
    log_ratio = sp.log(xi2) - sp.log(eta2)
    if orientation == 'dominant':
        log_ratio = -log_ratio
    exponent = -sp.nsimplify(m) / 2

    sigma1 = symbol.expr * _phi_expr(log_ratio) * xi2 ** exponent
    sigma2 = symbol.expr * _phi_expr(-log_ratio) * eta2 ** exponent
    declared = None
    if symbol.declared is not None:
        base = symbol.declared
        declared = ClassParams(base.m - m, base.rho, base.delta)
    label = f"{symbol}, m={m}"
    return LeibnizSplit(
        symbol,
        SymbolExpr(sigma1, dim, declared=declared, label=f"sigma1({label})"),
        SymbolExpr(sigma2, dim, declared=declared, label=f"sigma2({label})"),
        float(m), orientation,
    )


def partition_residual(split: LeibnizSplit, shells: int = 8, seed: Optional[int] = None) -> float:
    """max |σ₁⟨ξ⟩^m + σ₂⟨η⟩^m - σ| / max(1, |σ|) over the seminorm sample cloud"""
    dim = split.symbol.dim
    x = seminorm_grid(dim).flat_nodes[:, :, None]
    worst = 0.0
    for xi, eta in shell_samples(dim, shells, seed=seed):
        xi_b, eta_b = xi[:, None, :], eta[:, None, :]
        target = split.symbol.evaluate(x, xi_b, eta_b)
        xi2 = 1.0 + np.sum(xi ** 2, axis=0)[None, :]
        eta2 = 1.0 + np.sum(eta ** 2, axis=0)[None, :]
        rebuilt = (split.sigma1.evaluate(x, xi_b, eta_b) * xi2 ** (split.m / 2)
                   + split.sigma2.evaluate(x, xi_b, eta_b) * eta2 ** (split.m / 2))
        worst = max(worst, float(np.max(np.abs(rebuilt - target) / np.maximum(1.0, np.abs(target)))))
    return worst


def split_class_reports(split: LeibnizSplit, max_order: int = 2, ratio: float = 0.25) -> Dict[str, Any]:
    """class_report of σ₁ and σ₂ against their declared class"""
    return {
        'sigma1': class_report(split.sigma1, max_order=max_order, ratio=ratio),
        'sigma2': class_report(split.sigma2, max_order=max_order, ratio=ratio),
    }


@dataclass
class LeibnizResidual:
    symbol: str
    m: float
    residual: float
    relative_residual: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def leibniz_identity_check(symbol: SymbolExpr, m: float, f: GridFunction, g: GridFunction,
                           orientation: str = 'dominant', workers: Optional[int] = None) -> LeibnizResidual:
    """T_σ(f,g) against T_σ₁(J^m f, g) + T_σ₂(f, J^m g) at every node"""
    grid = require_same_grid(f, g)
    split = leibniz_split(symbol, m, orientation)
    lhs = apply(DiscreteBilinearOp.from_symbol(symbol, grid), f, g, workers)
    first = apply(DiscreteBilinearOp.from_symbol(split.sigma1, grid), bessel_potential(f, m), g, workers)
    second = apply(DiscreteBilinearOp.from_symbol(split.sigma2, grid), f, bessel_potential(g, m), workers)
    residual = float(np.max(np.abs(lhs.values - first.values - second.values)))
    scale = max(1.0, float(np.max(np.abs(lhs.values))))
    logger.debug(f"Leibniz identity for {symbol}, m={m}: residual {residual:.3e}")
    return LeibnizResidual(str(symbol), float(m), residual, residual / scale)


@dataclass
class LeibnizBoundReport:
    symbol: str
    m: float
    s: int
    sweep: DilationSweep

    def to_dict(self) -> Dict[str, Any]:
        return {
            'symbol': self.symbol,
            'm': self.m,
            's': self.s,
            'ratio_max': self.sweep.ratio_max,
            'trend_slope': self.sweep.trend_slope,
            'unbounded_trend': self.sweep.unbounded_trend,
            'witness_seed': self.sweep.witness.seed,
            'dilation_sweep': self.sweep.to_dict(),
        }


def leibniz_bound_sweep(symbol: SymbolExpr, m: float, trials: int = 6, seed: Optional[int] = None,
                        grid: Optional[GridSpec] = None, widths: Sequence[float] = DILATION_WIDTHS,
                        tolerances: Optional[Dict[str, Any]] = None,
                        workers: Optional[int] = None) -> LeibnizBoundReport:
    """‖T_σ(f,g)‖₂ / (‖f‖_{W^{m,2}}‖g‖_{W^{s,∞}} + ‖f‖_{W^{s,∞}}‖g‖_{W^{m,2}})"""
    if m < 0:
        raise ValidationError(f"m must be nonnegative, got {m}", field='m')
    tolerances = tolerances or default_tolerances()
    seed = get_config().seed if seed is None else seed
    grid = grid or default_grid(symbol.dim)
    delta = symbol.declared.delta if symbol.declared is not None else 0.0
    s = threshold_s(symbol.dim, delta)
    op = _prepared(symbol, grid)

    def measure(f: GridFunction, g: GridFunction) -> float:
        nf, ng = norms(f, m, s), norms(g, m, s)
        bound = nf.w_m2 * ng.w_s_inf + nf.w_s_inf * ng.w_m2
        return _ratio(lp_norm(apply(op, f, g, workers=1), 2), bound)

    sweep = dilation_sweep(measure, grid, trials, seed, widths,
                           threshold=tolerances['trend_slope'], workers=workers)
    logger.info(f"Leibniz bound for {symbol}, m={m}: ratio_max={sweep.ratio_max:.4g}, "
                f"trend={sweep.trend_slope}")
    return LeibnizBoundReport(str(symbol), float(m), s, sweep)
