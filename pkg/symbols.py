"""
Symbol Algebra
Bilinear symbols σ(x, ξ, η) as sympy expression trees, the built-in families,
separable forms, the symbol spec-file format and measured Hörmander seminorms.
"""

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import sympy as sp

from config import get_config
from exceptions import (
    HypothesisViolationError, OrderCapError, SymbolParseError, UnknownFamilyError, ValidationError,
)
from fourier_core import GridSpec, coefficients_along_space, synthesize_along_space
from logging_config import get_logger
from utils import (
    MultiIndex, as_multi_index, derivative_triples, get_cache, order, seeded_rng, triple_key,
)

logger = get_logger(__name__)

Number = Union[int, float]


# Variables and primitive expressions

def symbol_variables(dim: int) -> Tuple[Tuple[sp.Symbol, ...], Tuple[sp.Symbol, ...], Tuple[sp.Symbol, ...]]:
    """Real sympy symbols (x, ξ, η), one tuple per group"""
    xs = sp.symbols(f"x1:{dim + 1}", real=True)
    xis = sp.symbols(f"xi1:{dim + 1}", real=True)
    etas = sp.symbols(f"eta1:{dim + 1}", real=True)
    return tuple(xs), tuple(xis), tuple(etas)


def bracket_xi(dim: int) -> sp.Expr:
    """⟨ξ⟩ = (1+|ξ|²)^{1/2}"""
    _, xis, _ = symbol_variables(dim)
    return sp.sqrt(1 + sum(v ** 2 for v in xis))


def bracket_eta(dim: int) -> sp.Expr:
    _, _, etas = symbol_variables(dim)
    return sp.sqrt(1 + sum(v ** 2 for v in etas))


def bracket_xi_eta(dim: int) -> sp.Expr:
    """⟨ξ,η⟩ = (1+|ξ|²+|η|²)^{1/2}"""
    return sp.sqrt(1 + frequency_radius_squared(dim))


def frequency_radius_squared(dim: int) -> sp.Expr:
    _, xis, etas = symbol_variables(dim)
    return sum(v ** 2 for v in xis + etas)


def _flat_bump(t: sp.Expr) -> sp.Expr:
    return sp.Piecewise((sp.exp(-1 / t), t > 0), (0, True))


def smooth_step(t: sp.Expr) -> sp.Expr:
    """C^∞ transition: 0 for t <= 0, 1 for t >= 1"""
    return _flat_bump(t) / (_flat_bump(t) + _flat_bump(1 - t))


def radial_cutoff(dim: int, inner: float, outer: float) -> sp.Expr:
    """1 on |(ξ,η)| <= inner, 0 on |(ξ,η)| >= outer; a function of the squared radius"""
    if not 0 < inner < outer:
        raise ValidationError(f"cutoff radii must satisfy 0 < inner < outer, got {inner}, {outer}")
    t = (frequency_radius_squared(dim) - sp.Float(inner) ** 2) / (sp.Float(outer) ** 2 - sp.Float(inner) ** 2)
    return 1 - smooth_step(t)


def transpose_invariant_cutoff(dim: int, inner: float, outer: float) -> sp.Expr:
    """1 where |ξ|²+|η|²+|ξ+η|² <= inner², 0 once it reaches outer²

    The form is unchanged by (ξ, η) -> (-ξ-η, η) and by (ξ, η) -> (ξ, -ξ-η).
    Its support lies inside |(ξ,η)| <= outer and |ξ+η| <= outer.
    """
    if not 0 < inner < outer:
        raise ValidationError(f"cutoff radii must satisfy 0 < inner < outer, got {inner}, {outer}")
    _, xis, etas = symbol_variables(dim)
    form = sum(a ** 2 + b ** 2 + (a + b) ** 2 for a, b in zip(xis, etas))
    t = (form - sp.Float(inner) ** 2) / (sp.Float(outer) ** 2 - sp.Float(inner) ** 2)
    return 1 - smooth_step(t)


# Class parameters

@dataclass(frozen=True)
class ClassParams:
    """The triple (m, ρ, δ) of BS^m_{ρ,δ}"""
    m: float
    rho: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        for name in ('rho', 'delta'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {value}", field=name)

    def weight_exponent(self, alpha: MultiIndex, beta: MultiIndex, gamma: MultiIndex) -> float:
        return self.m + self.delta * order(alpha) - self.rho * (order(beta) + order(gamma))

    def require_transpose_hypothesis(self):
        if self.delta > self.rho:
            raise HypothesisViolationError(
                f"transpose calculus needs delta <= rho, got rho={self.rho}, delta={self.delta}",
                details=self.to_dict())

    def require_strict(self):
        if not self.delta < self.rho:
            raise HypothesisViolationError(
                f"expansion orders need delta < rho, got rho={self.rho}, delta={self.delta}",
                details=self.to_dict())

    def term_order(self, j: int) -> float:
        """Order m - j(ρ-δ) of the j-th expansion term"""
        return self.m - j * (self.rho - self.delta)

    def to_dict(self) -> Dict[str, float]:
        return {'m': self.m, 'rho': self.rho, 'delta': self.delta}


# Expressions

def split_components(values: Any, dim: int) -> List[np.ndarray]:
    arr = np.asarray(values, dtype=float)
    if dim == 1 and (arr.ndim == 0 or arr.shape[0] != 1):
        return [arr]
    if arr.shape[0] != dim:
        raise ValidationError(f"expected {dim} stacked components, got shape {arr.shape}")
    return list(arr)


def _lambdified(expr: sp.Expr, dim: int) -> Callable:
    cache = get_cache('lambdified')
    key = (expr, dim)
    fn = cache.get(key)
    if fn is None:
        xs, xis, etas = symbol_variables(dim)
        fn = sp.lambdify(xs + xis + etas, expr, modules='numpy')
        cache.set(key, fn)
    return fn


@dataclass(frozen=True)
class SymbolExpr:
    """Immutable symbol σ(x, ξ, η) with exact derivatives; `declared` is the claimed class"""
    expr: sp.Expr
    dim: int = 1
    declared: Optional[ClassParams] = None
    label: str = ''

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValidationError(f"dim must be 1 or 2, got {self.dim}", field='dim')
        object.__setattr__(self, 'expr', sp.sympify(self.expr))
        allowed = set(sum(symbol_variables(self.dim), ()))
        stray = self.expr.free_symbols - allowed
        if stray:
            raise ValidationError(f"symbol uses unknown variables {sorted(map(str, stray))}")

    @property
    def variables(self):
        return symbol_variables(self.dim)

    @property
    def depends_on_x(self) -> bool:
        return bool(self.expr.free_symbols & set(self.variables[0]))

    def evaluate(self, x: Any, xi: Any, eta: Any) -> np.ndarray:
        """Complex values on broadcast samples; components stacked on axis 0 when dim = 2"""
        args = split_components(x, self.dim) + split_components(xi, self.dim) + split_components(eta, self.dim)
        with np.errstate(all='ignore'):
            values = _lambdified(self.expr, self.dim)(*args)
        shape = np.broadcast_shapes(*(a.shape for a in args))
        return np.broadcast_to(np.asarray(values, dtype=complex), shape).copy()

    def differentiate(self, alpha: Any = None, beta: Any = None, gamma: Any = None,
                      cap: Optional[int] = None) -> 'SymbolExpr':
        """∂_x^α ∂_ξ^β ∂_η^γ σ"""
        alpha, beta, gamma = (as_multi_index(v, self.dim) for v in (alpha, beta, gamma))
        cap = get_config().derivative_cap if cap is None else cap
        total = order(alpha) + order(beta) + order(gamma)
        if total > cap:
            raise OrderCapError(total, cap)
        if total == 0:
            return self
        spec = []
        for group, index in zip(self.variables, (alpha, beta, gamma)):
            spec.extend((v, k) for v, k in zip(group, index) if k)
        return SymbolExpr(sp.diff(self.expr, *spec), self.dim, label=f"d{triple_key(alpha, beta, gamma)}")

    def substitute(self, mapping: Dict[sp.Symbol, sp.Expr]) -> 'SymbolExpr':
        return SymbolExpr(self.expr.subs(mapping, simultaneous=True), self.dim)

    def with_class(self, params: ClassParams, label: Optional[str] = None) -> 'SymbolExpr':
        return replace(self, declared=params, label=self.label if label is None else label)

    def _coerce(self, other: Any) -> sp.Expr:
        if isinstance(other, SymbolExpr):
            if other.dim != self.dim:
                raise ValidationError(f"dimension mismatch {self.dim} vs {other.dim}")
            return other.expr
        return sp.sympify(other)

    def __add__(self, other):
        return SymbolExpr(self.expr + self._coerce(other), self.dim)

    __radd__ = __add__

    def __sub__(self, other):
        return SymbolExpr(self.expr - self._coerce(other), self.dim)

    def __mul__(self, other):
        return SymbolExpr(self.expr * self._coerce(other), self.dim)

    __rmul__ = __mul__

    def __neg__(self):
        return SymbolExpr(-self.expr, self.dim)

    def __str__(self):
        return self.label or str(self.expr)


# Separable (low-rank) symbols

@dataclass(frozen=True)
class SeparableSymbol:
    """Σ_r a_r(x) b_r(ξ) c_r(η)"""
    terms: Tuple[Tuple[SymbolExpr, SymbolExpr, SymbolExpr], ...]
    dim: int = 1

    def __post_init__(self):
        if not self.terms:
            raise ValidationError("separable symbol needs at least one term")
        xs, xis, etas = symbol_variables(self.dim)
        for a, b, c in self.terms:
            for part, group in ((a, xs), (b, xis), (c, etas)):
                if not part.expr.free_symbols <= set(group):
                    raise ValidationError(f"factor {part.expr} depends on the wrong variable group")

    @property
    def rank(self) -> int:
        return len(self.terms)

    def evaluate(self, x: Any, xi: Any, eta: Any) -> np.ndarray:
        return sum(a.evaluate(x, xi, eta) * b.evaluate(x, xi, eta) * c.evaluate(x, xi, eta)
                   for a, b, c in self.terms)

    def flatten(self) -> SymbolExpr:
        return SymbolExpr(sum(a.expr * b.expr * c.expr for a, b, c in self.terms), self.dim)

    def factor_arrays(self, grid: GridSpec) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(R, P) x-factors on the nodes and (R, K) ξ- and η-factors on the frequencies"""
        zeros = np.zeros((grid.dim, grid.size))
        a = np.stack([t[0].evaluate(grid.flat_nodes, zeros, zeros) for t in self.terms])
        b = np.stack([t[1].evaluate(zeros, grid.flat_frequencies, zeros) for t in self.terms])
        c = np.stack([t[2].evaluate(zeros, zeros, grid.flat_frequencies) for t in self.terms])
        return a, b, c


# Built-in families

def _identity(dim, params):
    return sp.Integer(1), ClassParams(0.0, 1.0, 0.0)


def _elliptic(dim, params):
    m = float(params.get('m', 1.0))
    expr = (1 + frequency_radius_squared(dim)) ** sp.nsimplify(m / 2) if m else sp.Integer(1)
    return expr, ClassParams(m, 1.0, 0.0)


def _frequency_bump(dim, params):
    width = float(params.get('width', 1.0))
    if width <= 0:
        raise ValidationError(f"width must be positive, got {width}", field='width')
    return radial_cutoff(dim, width, 2 * width), ClassParams(0.0, 1.0, 0.0)


def _derivative_xi(dim, params):
    _, xis, _ = symbol_variables(dim)
    return sp.I * xis[0], ClassParams(1.0, 1.0, 0.0)


def _derivative_eta(dim, params):
    _, _, etas = symbol_variables(dim)
    return sp.I * etas[0], ClassParams(1.0, 1.0, 0.0)


def _chirp(dim, params):
    delta = float(params.get('delta', 0.5))
    amplitude = float(params.get('amplitude', 1.0))
    if not 0.0 <= delta < 1.0:
        raise ValidationError(f"chirp delta must lie in [0, 1), got {delta}", field='delta')
    xs, _, _ = symbol_variables(dim)
    power = (1 + frequency_radius_squared(dim)) ** sp.nsimplify(delta / 2)
    expr = sp.exp(sp.I * sp.nsimplify(amplitude) * sp.sin(xs[0]) * power)
    return expr, ClassParams(0.0, 1.0 - delta, delta)


def _x_modulated(dim, params):
    m = float(params.get('m', 0.0))
    xs, _, _ = symbol_variables(dim)
    elliptic, _ = _elliptic(dim, {'m': m})
    return (1 + sp.sin(xs[0]) ** 2) * elliptic, ClassParams(m, 1.0, 0.0)


def _riesz_xi(dim, params):
    _, xis, _ = symbol_variables(dim)
    return xis[0] / bracket_xi_eta(dim), ClassParams(0.0, 1.0, 0.0)


FAMILIES: Dict[str, Callable[[int, Dict[str, float]], Tuple[sp.Expr, ClassParams]]] = {
    'identity': _identity,
    'elliptic': _elliptic,
    'frequency_bump': _frequency_bump,
    'derivative_xi': _derivative_xi,
    'derivative_eta': _derivative_eta,
    'chirp': _chirp,
    'x_modulated': _x_modulated,
    'riesz_xi': _riesz_xi,
}


def builtin_family(name: str, params: Optional[Dict[str, float]] = None, dim: int = 1) -> SymbolExpr:
    """Family member with its declared class attached"""
    builder = FAMILIES.get(name)
    if builder is None:
        raise UnknownFamilyError(name, sorted(FAMILIES))
    params = dict(params or {})
    expr, declared = builder(dim, params)
    suffix = ",".join(f"{k}={params[k]}" for k in sorted(params))
    label = f"{name}({suffix})" if suffix else name
    return SymbolExpr(expr, dim, declared=declared, label=label)


def bump_cut(symbol: SymbolExpr, grid: GridSpec, fraction: float = 0.5, invariant: bool = False) -> SymbolExpr:
    """σ times a cutoff vanishing beyond fraction·Nyquist; the class is unchanged

    With `invariant` the cutoff is `transpose_invariant_cutoff`, so the exact
    transposes of an x-independent cut symbol keep its frequency support.
    """
    if not 0 < fraction <= 1:
        raise ValidationError(f"fraction must lie in (0, 1], got {fraction}", field='fraction')
    outer = fraction * grid.nyquist
    cutoff = transpose_invariant_cutoff if invariant else radial_cutoff
    cut = cutoff(symbol.dim, outer / 2, outer)
    suffix = ", invariant" if invariant else ""
    return SymbolExpr(symbol.expr * cut, symbol.dim, declared=symbol.declared,
                      label=f"bump_cut({symbol}, {fraction}{suffix})")


# Seminorms

@dataclass
class SeminormReport:
    params: ClassParams
    max_order: int
    entries: Dict[str, float]
    profiles: Dict[str, List[float]]
    sample_spec: Dict[str, Any]
    consistent: bool
    failing: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'class': self.params.to_dict(),
            'max_order': self.max_order,
            'entries': dict(sorted(self.entries.items())),
            'profiles': dict(sorted(self.profiles.items())),
            'sample_spec': self.sample_spec,
            'consistent': self.consistent,
            'failing': self.failing,
        }


def seminorm_grid(dim: int) -> GridSpec:
    """Default x-nodes for seminorm sampling"""
    return GridSpec(dim, float(np.pi), 32 if dim == 1 else 16)


def shell_samples(dim: int, shells: int, directions: Optional[int] = None,
                  seed: Optional[int] = None) -> List[Tuple[np.ndarray, np.ndarray]]:
    """(ξ, η) points on |(ξ,η)| = 2^j, j = 0..shells; shell j draws from its own seeded stream"""
    config = get_config()
    directions = config.shell_directions if directions is None else directions
    seed = config.seed if seed is None else seed
    samples = []
    for j in range(shells + 1):
        u = seeded_rng(seed, j).standard_normal((2 * dim, directions))
        u /= np.linalg.norm(u, axis=0)
        points = (2.0 ** j) * u
        samples.append((points[:dim], points[dim:]))
    return samples


def seminorm_profile(symbol: SymbolExpr, params: ClassParams, alpha: Any = None, beta: Any = None,
                     gamma: Any = None, shells: int = 8, directions: Optional[int] = None,
                     seed: Optional[int] = None, grid: Optional[GridSpec] = None,
                     cap: Optional[int] = None) -> np.ndarray:
    """Running maximum of the weighted derivative over shells 0..J"""
    if shells < 3:
        raise ValidationError(f"shell cap must be at least 3, got {shells}", field='shells')
    dim = symbol.dim
    alpha, beta, gamma = (as_multi_index(v, dim) for v in (alpha, beta, gamma))
    derivative = symbol.differentiate(alpha, beta, gamma, cap=cap)
    grid = grid or seminorm_grid(dim)
    exponent = params.weight_exponent(alpha, beta, gamma)

    x = grid.flat_nodes[:, :, None]
    maxima = []
    for xi, eta in shell_samples(dim, shells, directions, seed):
        values = np.abs(derivative.evaluate(x, xi[:, None, :], eta[:, None, :]))
        weight = (1.0 + np.linalg.norm(xi, axis=0) + np.linalg.norm(eta, axis=0)) ** (-exponent)
        maxima.append(float(np.max(values * weight[None, :])))
    return np.maximum.accumulate(np.asarray(maxima))


def hormander_seminorm(symbol: SymbolExpr, params: ClassParams, alpha: Any = None, beta: Any = None,
                       gamma: Any = None, shells: int = 8, **kwargs) -> float:
    """sup over the sample cloud of |∂^{α,β,γ}σ|·(1+|ξ|+|η|)^{-(m+δ|α|-ρ(|β|+|γ|))}"""
    return float(seminorm_profile(symbol, params, alpha, beta, gamma, shells, **kwargs)[-1])


def stabilized(profile: Sequence[float], ratio: float = 0.25) -> bool:
    """Finite, and the last value is within `ratio` of the one before"""
    profile = np.asarray(profile, dtype=float)
    if not np.all(np.isfinite(profile)):
        return False
    return bool(profile[-1] <= (1.0 + ratio) * profile[-2] + 1e-12)


def class_report(symbol: SymbolExpr, params: Optional[ClassParams] = None, max_order: int = 2,
                 shells: int = 8, directions: Optional[int] = None, seed: Optional[int] = None,
                 grid: Optional[GridSpec] = None, cap: Optional[int] = None,
                 ratio: float = 0.25) -> SeminormReport:
    """One seminorm per (α, β, γ) with |α|+|β|+|γ| <= max_order, plus the stabilization flag"""
    params = params or symbol.declared
    if params is None:
        raise ValidationError("no class given and the symbol declares none", field='class')
    cap = get_config().derivative_cap if cap is None else cap
    if max_order > cap:
        raise OrderCapError(max_order, cap)
    config = get_config()
    directions = config.shell_directions if directions is None else directions
    seed = config.seed if seed is None else seed

    entries, profiles, failing = {}, {}, []
    for alpha, beta, gamma in derivative_triples(symbol.dim, max_order):
        key = triple_key(alpha, beta, gamma)
        profile = seminorm_profile(symbol, params, alpha, beta, gamma, shells,
                                   directions=directions, seed=seed, grid=grid, cap=cap)
        entries[key] = float(profile[-1])
        profiles[key] = [float(v) for v in profile]
        if not stabilized(profile, ratio):
            failing.append(key)

    grid = grid or seminorm_grid(symbol.dim)
    report = SeminormReport(
        params=params, max_order=max_order, entries=entries, profiles=profiles,
        sample_spec={'shells': shells, 'directions': directions, 'seed': seed,
                     'x_nodes': grid.to_dict(), 'weight': '1+|xi|+|eta|'},
        consistent=not failing, failing=failing,
    )
    if failing:
        logger.info(f"{symbol} not stabilized against {params.to_dict()} at {len(failing)} entries")
    return report


def _central_difference(values: np.ndarray, axis: int, step: float) -> np.ndarray:
    return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2 * step)


def sampled_seminorm_profile(samples: np.ndarray, grid: GridSpec, params: ClassParams,
                             max_order: int = 1, ratio: float = 0.25) -> SeminormReport:
    """Hörmander ratios of a sampled symbol W[j, k, l] (flat nodes × FFT-order frequencies)

    x-derivatives are spectral, ξ- and η-derivatives centred differences on the
    frequency lattice. Points whose difference stencil crosses the band edge are
    dropped; ratios are collected on shells 2^j <= 1+|ξ|+|η| < 2^{j+1}.
    """
    dim, n = grid.dim, grid.points_per_axis
    step = grid.frequency_step
    k_shape = grid.shape
    tensor = np.asarray(samples, dtype=complex).reshape((grid.size,) + k_shape + k_shape)

    modes = np.abs(grid.axis_modes())
    interior_axis = modes <= n // 2 - 1 - max_order
    interior = np.ones(k_shape * 2, dtype=bool)
    for axis in range(2 * dim):
        shape = [1] * (2 * dim)
        shape[axis] = n
        interior = interior & interior_axis.reshape(shape)

    xi = grid.flat_frequencies.reshape((dim,) + k_shape)
    xi_norm = np.sqrt(np.sum(xi ** 2, axis=0))
    size = 1.0 + xi_norm.reshape(k_shape + (1,) * dim) + xi_norm.reshape((1,) * dim + k_shape)
    shell_index = np.floor(np.log2(size)).astype(int)
    shells = int(shell_index[interior].max())

    x_modes = grid.flat_frequencies
    x_coefficients = coefficients_along_space(tensor, grid)
    entries, profiles, failing = {}, {}, []
    for alpha, beta, gamma in derivative_triples(dim, max_order):
        key = triple_key(alpha, beta, gamma)
        multiplier = np.prod([(1j * x_modes[d]) ** alpha[d] for d in range(dim)], axis=0)
        values = synthesize_along_space(
            x_coefficients * multiplier.reshape((grid.size,) + (1,) * (2 * dim)), grid)
        for d in range(dim):
            for _ in range(beta[d]):
                values = _central_difference(values, 1 + d, step)
            for _ in range(gamma[d]):
                values = _central_difference(values, 1 + dim + d, step)
        ratio_values = np.abs(values).max(axis=0) * size ** (-params.weight_exponent(alpha, beta, gamma))
        profile = []
        for j in range(shells + 1):
            mask = interior & (shell_index == j)
            profile.append(float(ratio_values[mask].max()) if mask.any() else 0.0)
        profile = np.maximum.accumulate(np.asarray(profile))
        entries[key] = float(profile[-1])
        profiles[key] = [float(v) for v in profile]
        if not stabilized(profile, ratio):
            failing.append(key)

    return SeminormReport(
        params=params, max_order=max_order, entries=entries, profiles=profiles,
        sample_spec={'grid': grid.to_dict(), 'shells': shells + 1, 'mode': 'sampled'},
        consistent=not failing, failing=failing,
    )


# Spec files

_TOKEN = re.compile(r"\s*(?:(\()|(\))|([^\s()]+))")
_NUMBER = re.compile(r"[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?")

_UNARY = {
    'exp': sp.exp,
    'sin': sp.sin,
    'cos': sp.cos,
    'neg': lambda a: -a,
    'step': smooth_step,
}


def _tokenize(text: str) -> List[Tuple[str, int]]:
    tokens, position = [], 0
    text = text.rstrip()
    while position < len(text):
        match = _TOKEN.match(text, position)
        if match is None or match.end() == position:
            raise SymbolParseError("unreadable input", text[position:position + 1], position)
        token = match.group(1) or match.group(2) or match.group(3)
        tokens.append((token, match.start(match.lastindex)))
        position = match.end()
    return tokens


class _PrefixParser:
    """Parser for prefix expressions such as (mul (exp (mul i (sin x1))) (bracket_xi_eta))"""

    def __init__(self, text: str, dim: int):
        self.tokens = _tokenize(text)
        self.index = 0
        self.dim = dim
        xs, xis, etas = symbol_variables(dim)
        self.atoms: Dict[str, sp.Expr] = {str(v): v for v in xs + xis + etas}
        if dim == 1:
            self.atoms.update({'x': xs[0], 'xi': xis[0], 'eta': etas[0]})
        self.atoms.update({'i': sp.I, 'pi': sp.pi})

    def parse(self) -> sp.Expr:
        if not self.tokens:
            raise SymbolParseError("empty expression", '', 0)
        expr = self._expression()
        if self.index < len(self.tokens):
            token, position = self.tokens[self.index]
            raise SymbolParseError("trailing input", token, position)
        return expr

    def _next(self) -> Tuple[str, int]:
        if self.index >= len(self.tokens):
            position = self.tokens[-1][1] + len(self.tokens[-1][0]) if self.tokens else 0
            raise SymbolParseError("unexpected end of expression", '', position)
        token = self.tokens[self.index]
        self.index += 1
        return token

    def _expression(self) -> sp.Expr:
        token, position = self._next()
        if token == ')':
            raise SymbolParseError("unexpected ')'", token, position)
        if token != '(':
            return self._atom(token, position)

        head, head_position = self._next()
        args = []
        while self.index < len(self.tokens) and self.tokens[self.index][0] != ')':
            args.append(self._expression())
        self._next()
        return self._apply(head, head_position, args)

    def _atom(self, token: str, position: int) -> sp.Expr:
        if token in self.atoms:
            return self.atoms[token]
        if _NUMBER.fullmatch(token):
            return sp.nsimplify(token, rational=True)
        raise SymbolParseError("unknown atom", token, position)

    def _apply(self, head: str, position: int, args: List[sp.Expr]) -> sp.Expr:
        def arity(expected: int):
            if len(args) != expected:
                raise SymbolParseError(f"'{head}' takes {expected} argument(s), got {len(args)}", head, position)

        if head == 'add':
            return sp.Add(*args)
        if head == 'mul':
            return sp.Mul(*args)
        if head == 'sub':
            arity(2)
            return args[0] - args[1]
        if head in _UNARY:
            arity(1)
            return _UNARY[head](args[0])
        if head == 'pow':
            arity(2)
            base, exponent = args
            if not exponent.is_number:
                raise SymbolParseError("exponent must be a number", head, position)
            if not (exponent.is_integer or base.is_positive):
                raise SymbolParseError("real power of a subexpression not known to be positive", head, position)
            return base ** exponent
        if head in ('bracket_xi', 'bracket_eta', 'bracket_xi_eta'):
            arity(0)
            return {'bracket_xi': bracket_xi, 'bracket_eta': bracket_eta,
                    'bracket_xi_eta': bracket_xi_eta}[head](self.dim)
        raise SymbolParseError("unknown operator", head, position)


def parse_expression(text: str, dim: int = 1) -> sp.Expr:
    return _PrefixParser(text, dim).parse()


def load_symbol_spec(source: Union[str, Path, Dict[str, Any]], dim: int = 1) -> SymbolExpr:
    """Symbol from a spec mapping or JSON file: {"family", "params"} or {"expr"}, plus optional "class" """
    if isinstance(source, dict):
        spec = source
    else:
        try:
            with open(source, 'r', encoding='utf-8') as f:
                spec = json.load(f)
        except json.JSONDecodeError as e:
            raise SymbolParseError(f"invalid JSON in {source}: {e.msg}", '', e.pos)

    declared = None
    if 'class' in spec:
        raw = spec['class']
        try:
            declared = ClassParams(float(raw['m']), float(raw.get('rho', 1.0)), float(raw.get('delta', 0.0)))
        except (KeyError, TypeError) as e:
            raise ValidationError(f"class entry needs at least 'm': {e}", field='class')

    if 'family' in spec:
        symbol = builtin_family(spec['family'], spec.get('params'), dim=dim)
        return symbol.with_class(declared) if declared else symbol
    if 'expr' in spec:
        expr = parse_expression(spec['expr'], dim)
        return SymbolExpr(expr, dim, declared=declared, label=spec.get('label', spec['expr']))
    raise ValidationError("symbol spec needs a 'family' or an 'expr' entry", field='symbol')
