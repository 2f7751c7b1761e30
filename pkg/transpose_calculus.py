"""
Transpose Calculus
The transposes T^{*1}, T^{*2} computed three ways (exact discrete adjoint,
oscillatory compound-symbol sum, truncated asymptotic expansion) and the
checks comparing them.

Duality: ⟨T(f,g), h⟩ = ⟨T^{*1}(h,g), f⟩ = ⟨T^{*2}(f,h), g⟩.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp

from config import default_tolerances, get_config
from exceptions import NotLocalizedError, ValidationError
from fourier_core import (
    GridSpec, coefficients_along_space, pairing, random_trig_polynomial, synthesize_along_space,
)
from bilinear_operator import (
    DiscreteBilinearOp, apply, operator_from_kernel, spatial_kernel, symbol_from_kernel,
)
from logging_config import get_logger
from symbols import ClassParams, SeminormReport, SymbolExpr, sampled_seminorm_profile, symbol_variables
from utils import DecayFit, MultiIndex, dyadic_radii, fit_loglog, index_factorial, multi_indices, order, seeded_rng

logger = get_logger(__name__)


class TransposeIndex(str, Enum):
    FIRST = 'first'
    SECOND = 'second'


SIGN_CONVENTIONS = ('duality', 'stated')


def _which(value: Any) -> TransposeIndex:
    try:
        return TransposeIndex(value)
    except ValueError:
        raise ValidationError(f"transpose index must be 'first' or 'second', got {value!r}", field='which')


# Compound symbol

def compound_symbol(symbol: SymbolExpr, which: Any = TransposeIndex.FIRST) -> SymbolExpr:
    """σ(x, -ξ-η, η) for the first transpose, σ(x, ξ, -ξ-η) for the second"""
    which = _which(which)
    _, xis, etas = symbol_variables(symbol.dim)
    if which is TransposeIndex.FIRST:
        mapping = {xi: -xi - eta for xi, eta in zip(xis, etas)}
    else:
        mapping = {eta: -xi - eta for xi, eta in zip(xis, etas)}
    compound = symbol.substitute(mapping)
    return compound.with_class(symbol.declared, label=f"compound_{which.value}({symbol})") \
        if symbol.declared else compound


# Exact discrete transpose

def transpose_adjoint_oracle(op: DiscreteBilinearOp, which: Any = TransposeIndex.FIRST) -> DiscreteBilinearOp:
    """Exact transpose by permuting the spatial kernel K[j, m, p]"""
    which = _which(which)
    kernel = spatial_kernel(op)
    permuted = kernel.transpose(1, 0, 2) if which is TransposeIndex.FIRST else kernel.transpose(2, 1, 0)
    return operator_from_kernel(np.ascontiguousarray(permuted), op.grid, label=f"{op.label}^*{which.value}")


def extract_symbol(op: DiscreteBilinearOp) -> np.ndarray:
    """e^{-i x_j(ξ_k+η_l)} T(e^{iξ_k·}, e^{iη_l·})(x_j), from the operator's action on plane-wave pairs"""
    return symbol_from_kernel(spatial_kernel(op), op.grid)


def duality_residual(op: DiscreteBilinearOp, transpose: DiscreteBilinearOp, which: Any = TransposeIndex.FIRST,
                     triples: int = 50, seed: Optional[int] = None) -> float:
    """Largest normalized |⟨T(f,g),h⟩ - ⟨T^*(·,·),·⟩| over seeded random band-limited triples"""
    which = _which(which)
    grid = op.grid
    seed = get_config().seed if seed is None else seed
    worst = 0.0
    for t in range(triples):
        rng = seeded_rng(seed, 0xD0, t)
        f, g, h = (random_trig_polynomial(grid, rng, real=False) for _ in range(3))
        lhs = pairing(apply(op, f, g), h)
        if which is TransposeIndex.FIRST:
            rhs = pairing(apply(transpose, h, g), f)
        else:
            rhs = pairing(apply(transpose, f, h), g)
        scale = max(abs(lhs), abs(rhs),
                    float(np.linalg.norm(f.flat()) * np.linalg.norm(g.flat()) * np.linalg.norm(h.flat()))
                    * grid.cell_volume)
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst


# Oscillatory route

def _wrapped_index(grid: GridSpec, modes: np.ndarray) -> np.ndarray:
    return grid.mode_index(modes)


def localization_ratio(samples: np.ndarray, grid: GridSpec) -> float:
    """Largest |σ| on the outermost frequency ring relative to its peak"""
    n = grid.points_per_axis
    modes = grid.flat_modes
    edge_axis = np.any(np.abs(modes) >= n // 2 - 1, axis=0)
    edge = edge_axis[:, None] | edge_axis[None, :]
    magnitude = np.abs(samples).max(axis=0)
    peak = magnitude.max()
    if peak == 0:
        return 0.0
    return float(magnitude[edge].max() / peak)


def transpose_symbol_oscillatory(symbol: SymbolExpr, which: Any = TransposeIndex.FIRST,
                                 grid: Optional[GridSpec] = None, threshold: Optional[float] = None) -> np.ndarray:
    """Samples of a(x,ξ,η) = Σ_s e^{isx} ĉ(s, ξ+s, η), ĉ the x-Fourier coefficients of the compound symbol

    The sum over s and the frequency shifts run over the periodic lattices of the
    grid, so the result is an exact discrete pairing. Symbols that depend on x
    must be frequency-localized on the grid.
    """
    which = _which(which)
    if grid is None:
        raise ValidationError("oscillatory route needs a grid", field='grid')
    threshold = default_tolerances()['localization'] if threshold is None else threshold
    samples = DiscreteBilinearOp.from_symbol(symbol, grid).materialize()

    if symbol.depends_on_x:
        ratio = localization_ratio(samples, grid)
        if ratio > threshold:
            raise NotLocalizedError(ratio, threshold)

    modes = grid.flat_modes
    k_modes = modes[:, :, None]
    l_modes = modes[:, None, :]
    k_index = np.arange(grid.size)[:, None]
    l_index = np.arange(grid.size)[None, :]
    substituted = _wrapped_index(grid, -k_modes - l_modes)
    if which is TransposeIndex.FIRST:
        compound = samples[:, substituted, l_index]
    else:
        compound = samples[:, k_index, substituted]
    coefficients = coefficients_along_space(compound, grid)

    shifted = np.empty_like(coefficients)
    for s in range(grid.size):
        shift = modes[:, s][:, None, None]
        if which is TransposeIndex.FIRST:
            shifted[s] = coefficients[s][_wrapped_index(grid, k_modes + shift), l_index]
        else:
            shifted[s] = coefficients[s][k_index, _wrapped_index(grid, l_modes + shift)]
    return synthesize_along_space(shifted, grid)


# Asymptotic expansion

@dataclass
class ExpansionTruncation:
    """Terms (c_α/α!) ∂_x^α ∂_ξ^α c for |α| < N (∂_η for the second transpose)"""
    which: TransposeIndex
    N: int
    terms: List[Tuple[MultiIndex, SymbolExpr]]
    sign_convention: str = 'duality'

    def total(self) -> SymbolExpr:
        dim = self.terms[0][1].dim
        return SymbolExpr(sp.Add(*(term.expr for _, term in self.terms)), dim,
                          label=f"expansion_{self.which.value}(N={self.N})")

    def samples(self, grid: GridSpec) -> np.ndarray:
        return DiscreteBilinearOp.from_symbol(self.total(), grid).materialize()

    def to_dict(self) -> Dict[str, Any]:
        return {
            'which': self.which.value,
            'N': self.N,
            'sign_convention': self.sign_convention,
            'terms': [{'alpha': list(alpha), 'expr': str(term.expr)} for alpha, term in self.terms],
        }


def expansion_truncation(symbol: SymbolExpr, which: Any = TransposeIndex.FIRST, N: int = 2,
                         sign_convention: str = 'duality', cap: Optional[int] = None) -> ExpansionTruncation:
    """Symbolic terms of the transpose expansion for all |α| < N

    'duality' uses the coefficient (-i)^{|α|}/α!, which is the one consistent with
    ⟨T(f,g),h⟩ = ⟨T^{*1}(h,g),f⟩ under the operator formula used here; 'stated'
    uses i^{|α|}/α! and is kept for comparison.
    """
    which = _which(which)
    if N < 1:
        raise ValidationError(f"N must be at least 1, got {N}", field='N')
    if sign_convention not in SIGN_CONVENTIONS:
        raise ValidationError(f"sign_convention must be one of {SIGN_CONVENTIONS}", field='sign_convention')
    unit = -sp.I if sign_convention == 'duality' else sp.I
    compound = compound_symbol(symbol, which)
    dim = symbol.dim
    zero = (0,) * dim

    terms = []
    for alpha in multi_indices(dim, N - 1):
        if order(alpha) and not compound.depends_on_x:
            terms.append((alpha, SymbolExpr(sp.Integer(0), dim)))
            continue
        if which is TransposeIndex.FIRST:
            derivative = compound.differentiate(alpha, alpha, zero, cap=cap)
        else:
            derivative = compound.differentiate(alpha, zero, alpha, cap=cap)
        coefficient = unit ** order(alpha) / index_factorial(alpha)
        terms.append((alpha, SymbolExpr(coefficient * derivative.expr, dim)))
    return ExpansionTruncation(which, N, terms, sign_convention)


def alias_free_mask(samples: np.ndarray, grid: GridSpec, which: Any = TransposeIndex.FIRST,
                    floor: float = 1e-12) -> np.ndarray:
    """(K, K) mask of frequency pairs whose exact transpose uses no wrapped frequency"""
    which = _which(which)
    half = grid.points_per_axis // 2
    coefficients = np.abs(coefficients_along_space(samples, grid)).max(axis=(1, 2))
    active = coefficients > floor * max(coefficients.max(), 1e-300)
    bandwidth = int(np.abs(grid.flat_modes[:, active]).max()) if active.any() else 0

    modes = grid.flat_modes
    k_modes = modes[:, :, None]
    l_modes = modes[:, None, :]
    shifted = k_modes if which is TransposeIndex.FIRST else l_modes
    limit = half - 1 - bandwidth
    return (np.all(np.abs(shifted) <= limit, axis=0)
            & np.all(np.abs(k_modes + l_modes) <= limit, axis=0)
            & np.all(np.abs(k_modes) < half, axis=0) & np.all(np.abs(l_modes) < half, axis=0))


def exact_transpose_samples(symbol: SymbolExpr, grid: GridSpec, which: Any = TransposeIndex.FIRST) -> np.ndarray:
    op = DiscreteBilinearOp.from_symbol(symbol, grid)
    return extract_symbol(transpose_adjoint_oracle(op, which))


def shell_sups(values: np.ndarray, grid: GridSpec, radii: Sequence[float],
               mask: Optional[np.ndarray] = None) -> List[float]:
    """sup of |values| over shells r/√2 <= 1+|ξ|+|η| < r√2"""
    xi_norm = np.sqrt(np.sum(grid.flat_frequencies ** 2, axis=0))
    size = 1.0 + xi_norm[:, None] + xi_norm[None, :]
    magnitude = np.abs(values).max(axis=0)
    sups = []
    for r in radii:
        shell = (size >= r / np.sqrt(2)) & (size < r * np.sqrt(2))
        if mask is not None:
            shell = shell & mask
        sups.append(float(magnitude[shell].max()) if shell.any() else float('nan'))
    return sups


def remainder_order_fit(symbol: SymbolExpr, which: Any = TransposeIndex.FIRST, N: int = 1,
                        grid: Optional[GridSpec] = None, radii: Optional[Sequence[float]] = None,
                        params: Optional[ClassParams] = None, sign_convention: str = 'duality',
                        tolerances: Optional[Dict[str, Any]] = None) -> DecayFit:
    """Shell-sup regression of (exact transpose - truncation) against 1+|ξ|+|η|"""
    which = _which(which)
    tolerances = tolerances or default_tolerances()
    params = params or symbol.declared
    if params is None:
        raise ValidationError("remainder fit needs a declared class", field='class')
    params.require_strict()
    if grid is None:
        raise ValidationError("remainder fit needs a grid", field='grid')
    radii = list(radii or dyadic_radii(tolerances['fit_radius_min'], tolerances['fit_radius_max']))
    if max(radii) > 2 * grid.nyquist:
        raise ValidationError(f"radii up to {max(radii)} exceed the grid's frequency range", field='radii')

    samples = DiscreteBilinearOp.from_symbol(symbol, grid).materialize()
    exact = exact_transpose_samples(symbol, grid, which)
    truncation = expansion_truncation(symbol, which, N, sign_convention)
    remainder = exact - truncation.samples(grid)
    mask = alias_free_mask(samples, grid, which)

    sups = shell_sups(remainder, grid, radii, mask)
    keep = [i for i, v in enumerate(sups) if np.isfinite(v)]
    fit = fit_loglog([radii[i] for i in keep], [sups[i] for i in keep],
                     zero_floor=tolerances['degenerate_zero'])
    logger.debug(f"Remainder fit {symbol} {which.value} N={N}: {fit.to_dict()}")
    return fit


def remainder_monotone(exponents: Sequence[Optional[float]], noise: float = 0.2) -> bool:
    """Fitted exponents nonincreasing in N up to `noise`; degenerate fits (None) always pass"""
    values = [e for e in exponents if e is not None]
    return all(b <= a + noise for a, b in zip(values, values[1:]))


@dataclass
class ClassEvidence:
    params: ClassParams
    original: SeminormReport
    transposes: Dict[str, SeminormReport] = field(default_factory=dict)

    @property
    def consistent(self) -> bool:
        return all(report.consistent for report in self.transposes.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            'class': self.params.to_dict(),
            'consistent': self.consistent,
            'original': self.original.to_dict(),
            'transposes': {k: v.to_dict() for k, v in sorted(self.transposes.items())},
        }


def transpose_class_evidence(symbol: SymbolExpr, grid: GridSpec, params: Optional[ClassParams] = None,
                             max_order: int = 2, ratio: Optional[float] = None) -> ClassEvidence:
    """Sampled Hörmander profiles of σ and both exact transposes against one class"""
    params = params or symbol.declared
    if params is None:
        raise ValidationError("class evidence needs a declared class", field='class')
    params.require_transpose_hypothesis()
    if params.delta >= 1:
        raise ValidationError("class evidence needs delta < 1", field='delta')
    ratio = default_tolerances()['stabilization_ratio'] if ratio is None else ratio

    samples = DiscreteBilinearOp.from_symbol(symbol, grid).materialize()
    evidence = ClassEvidence(params, sampled_seminorm_profile(samples, grid, params, max_order, ratio))
    for which in TransposeIndex:
        transposed = exact_transpose_samples(symbol, grid, which)
        evidence.transposes[which.value] = sampled_seminorm_profile(transposed, grid, params, max_order, ratio)
    return evidence
