"""
Bilinear Operator
T_σ(f, g)(x_j) = Σ_{k,l} σ(x_j, ξ_k, η_l) c_k d_l e^{i x_j (ξ_k + η_l)} on a periodic grid,
where c, d are the mode coefficients of f and g. With σ ≡ 1 this is exactly f·g.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Union

import numpy as np

from config import default_tolerances, get_config
from exceptions import OrderCapError, TensorTooLargeError, ValidationError
from fourier_core import (
    GridFunction, GridSpec, coefficients_along_space, mode_coefficients, pairing, require_same_grid,
    synthesize, synthesize_along_space,
)
from logging_config import get_logger
from symbols import SeparableSymbol, SymbolExpr
from utils import multi_indices, order

logger = get_logger(__name__)

# Entries of one (rows, K, K) symbol block
BLOCK_ENTRIES = 1 << 22


def plane_waves(grid: GridSpec) -> np.ndarray:
    """E[j, k] = e^{i x_j·ξ_k}"""
    return np.exp(1j * grid.flat_nodes.T @ grid.flat_frequencies)


@dataclass
class DiscreteBilinearOp:
    """Trilinear form on a grid, driven by a symbol or by an explicit (P, K, K) tensor"""
    grid: GridSpec
    symbol: Optional[SymbolExpr] = None
    tensor: Optional[np.ndarray] = None
    label: str = ''
    _materialized: Optional[np.ndarray] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if (self.symbol is None) == (self.tensor is None):
            raise ValidationError("operator needs exactly one of symbol or tensor", field='source')
        if self.symbol is not None and self.symbol.dim != self.grid.dim:
            raise ValidationError(f"symbol dim {self.symbol.dim} does not match grid dim {self.grid.dim}")
        if self.tensor is not None:
            expected = (self.grid.size,) * 3
            self.tensor = np.asarray(self.tensor, dtype=complex)
            if self.tensor.shape != expected:
                raise ValidationError(f"tensor shape {self.tensor.shape} != {expected}", field='tensor')
        if not self.label:
            self.label = str(self.symbol) if self.symbol is not None else 'tensor'

    @classmethod
    def from_symbol(cls, symbol: SymbolExpr, grid: GridSpec) -> 'DiscreteBilinearOp':
        return cls(grid, symbol=symbol)

    @classmethod
    def from_tensor(cls, tensor: np.ndarray, grid: GridSpec, label: str = '') -> 'DiscreteBilinearOp':
        return cls(grid, tensor=tensor, label=label)

    @property
    def entries(self) -> int:
        return self.grid.size ** 3

    @property
    def rows_per_block(self) -> int:
        return max(1, BLOCK_ENTRIES // self.grid.size ** 2)

    def blocks(self) -> Iterator[slice]:
        step = self.rows_per_block
        for start in range(0, self.grid.size, step):
            yield slice(start, min(start + step, self.grid.size))

    def symbol_block(self, rows: slice) -> np.ndarray:
        """W[rows, k, l]"""
        if self.tensor is not None:
            return self.tensor[rows]
        if self._materialized is not None:
            return self._materialized[rows]
        grid = self.grid
        x = grid.flat_nodes[:, rows, None, None]
        xi = grid.flat_frequencies[:, None, :, None]
        eta = grid.flat_frequencies[:, None, None, :]
        return self.symbol.evaluate(x, xi, eta)

    def materialize(self, limit: Optional[int] = None) -> np.ndarray:
        """Full W tensor, memoized; refused above the entry limit"""
        if self.tensor is not None:
            return self.tensor
        if self._materialized is None:
            limit = default_tolerances()['tensor_entry_limit'] if limit is None else limit
            if self.entries > limit:
                raise TensorTooLargeError(self.entries, limit)
            logger.debug(f"Materializing {self.label} with {self.entries} entries")
            self._materialized = np.concatenate([self.symbol_block(rows) for rows in self.blocks()])
        return self._materialized

    def as_tensor_op(self, limit: Optional[int] = None) -> 'DiscreteBilinearOp':
        return DiscreteBilinearOp.from_tensor(self.materialize(limit), self.grid, f"{self.label}[tensor]")


def _run_blocks(op: DiscreteBilinearOp, work, workers: Optional[int]) -> List[np.ndarray]:
    workers = get_config().workers if workers is None else workers
    blocks = list(op.blocks())
    if workers <= 1 or len(blocks) == 1:
        return [work(rows) for rows in blocks]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(work, blocks))


def apply(op: DiscreteBilinearOp, f: GridFunction, g: GridFunction,
          workers: Optional[int] = None) -> GridFunction:
    """Direct trilinear sum, parallel over blocks of output nodes"""
    grid = require_same_grid(op, f, g)
    waves = plane_waves(grid)
    cf = mode_coefficients(f).ravel()[None, :] * waves
    dg = mode_coefficients(g).ravel()[None, :] * waves

    def work(rows: slice) -> np.ndarray:
        return np.einsum('jkl,jk,jl->j', op.symbol_block(rows), cf[rows], dg[rows], optimize=True)

    return GridFunction(grid, np.concatenate(_run_blocks(op, work, workers)))


def apply_separable(symbol: SeparableSymbol, f: GridFunction, g: GridFunction) -> GridFunction:
    """Σ_r a_r(x)·(b_r(D) f)(x)·(c_r(D) g)(x), three FFTs per term"""
    grid = require_same_grid(f, g)
    if symbol.dim != grid.dim:
        raise ValidationError(f"symbol dim {symbol.dim} does not match grid dim {grid.dim}")
    a, b, c = symbol.factor_arrays(grid)
    cf, dg = mode_coefficients(f).ravel(), mode_coefficients(g).ravel()
    total = np.zeros(grid.size, dtype=complex)
    for r in range(symbol.rank):
        left = synthesize(cf * b[r], grid).flat()
        right = synthesize(dg * c[r], grid).flat()
        total += a[r] * left * right
    return GridFunction(grid, total)


def trilinear_pairing(op: DiscreteBilinearOp, f: GridFunction, g: GridFunction,
                      h: GridFunction) -> complex:
    """⟨T(f, g), h⟩ under the real bilinear pairing"""
    require_same_grid(op, f, g, h)
    return pairing(apply(op, f, g), h)


def tensor_pairing(op: DiscreteBilinearOp, f: GridFunction, g: GridFunction, h: GridFunction,
                   limit: Optional[int] = None) -> complex:
    """Same pairing as one contraction of the materialized tensor"""
    grid = require_same_grid(op, f, g, h)
    waves = plane_waves(grid)
    cf = mode_coefficients(f).ravel()[None, :] * waves
    dg = mode_coefficients(g).ravel()[None, :] * waves
    total = np.einsum('jkl,j,jk,jl->', op.materialize(limit), h.flat(), cf, dg, optimize=True)
    return complex(total * grid.cell_volume)


# Spatial kernels

def spatial_kernel(op: DiscreteBilinearOp, workers: Optional[int] = None) -> np.ndarray:
    """K[j, m, p] with T(f, g)(x_j) = Σ_{m,p} K[j, m, p] f(y_m) g(z_p)"""
    grid = op.grid
    if op.tensor is None:
        op.materialize()
    waves = plane_waves(grid)
    conjugate = waves.conj()
    scale = 1.0 / grid.size ** 2

    def work(rows: slice) -> np.ndarray:
        twisted = op.symbol_block(rows) * waves[rows, :, None] * waves[rows, None, :]
        return scale * np.einsum('mk,jkl,pl->jmp', conjugate, twisted, conjugate, optimize=True)

    return np.concatenate(_run_blocks(op, work, workers))


def symbol_from_kernel(kernel: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Inverse of spatial_kernel: the W tensor of a kernel K[j, m, p]"""
    kernel = np.asarray(kernel, dtype=complex)
    expected = (grid.size,) * 3
    if kernel.shape != expected:
        raise ValidationError(f"kernel shape {kernel.shape} != {expected}", field='kernel')
    waves = plane_waves(grid)
    summed = np.einsum('jmp,mk,pl->jkl', kernel, waves, waves, optimize=True)
    return summed * waves.conj()[:, :, None] * waves.conj()[:, None, :]


def operator_from_kernel(kernel: np.ndarray, grid: GridSpec, label: str = '') -> DiscreteBilinearOp:
    return DiscreteBilinearOp.from_tensor(symbol_from_kernel(kernel, grid), grid, label)


# Frozen linear symbols

@dataclass
class FrozenSymbol:
    """σ_g(x_j, ξ_k) = Σ_l σ(x_j, ξ_k, η_l) d_l e^{i η_l x_j}, a linear symbol sampled on (nodes, frequencies)"""
    grid: GridSpec
    values: np.ndarray

    def apply(self, f: GridFunction) -> GridFunction:
        """Linear operator Σ_k σ_g(x_j, ξ_k) c_k e^{i x_j ξ_k}"""
        require_same_grid(self.grid, f)
        cf = mode_coefficients(f).ravel()
        return GridFunction(self.grid, np.sum(self.values * cf[None, :] * plane_waves(self.grid), axis=1))


def freeze_second_argument(source: Union[SymbolExpr, DiscreteBilinearOp], g: GridFunction,
                           workers: Optional[int] = None) -> FrozenSymbol:
    op = source if isinstance(source, DiscreteBilinearOp) else DiscreteBilinearOp.from_symbol(source, g.grid)
    grid = require_same_grid(op, g)
    dg = mode_coefficients(g).ravel()[None, :] * plane_waves(grid)

    def work(rows: slice) -> np.ndarray:
        return np.einsum('jkl,jl->jk', op.symbol_block(rows), dg[rows], optimize=True)

    return FrozenSymbol(grid, np.concatenate(_run_blocks(op, work, workers)))


def frozen_seminorm(frozen: FrozenSymbol, rho: float = 1.0, delta: float = 0.0, k: int = 1,
                    cap: Optional[int] = None) -> float:
    """max_{|α|,|β|<=k} sup |∂_x^α ∂_ξ^β σ_g| (1+|ξ|)^{-δ|α|+ρ|β|}

    ∂_x is spectral (σ_g is a trigonometric polynomial in x); ∂_ξ is a centred
    difference on the frequency lattice, evaluated away from the band edge.
    """
    cap = get_config().derivative_cap if cap is None else cap
    if 2 * k > cap:
        raise OrderCapError(2 * k, cap)
    grid = frozen.grid
    dim, n = grid.dim, grid.points_per_axis
    step = grid.frequency_step
    k_shape = grid.shape
    values = frozen.values.reshape((grid.size,) + k_shape)

    interior = np.ones(k_shape, dtype=bool)
    edge_ok = np.abs(grid.axis_modes()) <= n // 2 - 1 - k
    for axis in range(dim):
        shape = [1] * dim
        shape[axis] = n
        interior = interior & edge_ok.reshape(shape)

    xi_size = 1.0 + np.sqrt(np.sum(grid.flat_frequencies ** 2, axis=0)).reshape(k_shape)
    x_modes = grid.flat_frequencies
    coefficients = coefficients_along_space(values, grid)
    best = 0.0
    for alpha in multi_indices(dim, k):
        multiplier = np.prod([(1j * x_modes[d]) ** alpha[d] for d in range(dim)], axis=0)
        x_derivative = synthesize_along_space(coefficients * multiplier.reshape((grid.size,) + (1,) * dim), grid)
        for beta in multi_indices(dim, k):
            current = x_derivative
            for d in range(dim):
                for _ in range(beta[d]):
                    current = (np.roll(current, -1, axis=1 + d) - np.roll(current, 1, axis=1 + d)) / (2 * step)
            weight = xi_size ** (-delta * order(alpha) + rho * order(beta))
            sup = np.abs(current).max(axis=0) * weight
            best = max(best, float(sup[interior].max()))
    return best
