"""
Fourier Core
Periodic grids, the fixed Fourier convention, Bessel potentials and the norms
used by every verification.

Convention: f̂(ξ) = (2π)^{-n} ∫ f(x) e^{-ix·ξ} dx, sampled at ξ_k = πk/L.
Mode coefficients c_k = f̂(ξ_k)·(π/L)^n satisfy f(x_j) = Σ_k c_k e^{i x_j·ξ_k}
exactly on the grid. Frequency arrays are kept in FFT order.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.fft

from config import get_config
from exceptions import GridMismatchError, ValidationError
from logging_config import get_logger
from utils import MultiIndex, as_multi_index, multi_indices

logger = get_logger(__name__)


def _workers() -> int:
    return max(1, get_config().workers)


@dataclass(frozen=True)
class GridSpec:
    """Periodic box [-L, L)^n with N nodes per axis and its dual frequency lattice"""
    dim: int
    half_period: float
    points_per_axis: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValidationError(f"dim must be 1 or 2, got {self.dim}", field='dim')
        n = self.points_per_axis
        if n < 8 or n & (n - 1):
            raise ValidationError(f"points_per_axis must be a power of two >= 8, got {n}",
                                  field='points_per_axis')
        if not self.half_period > 0:
            raise ValidationError(f"half_period must be positive, got {self.half_period}",
                                  field='half_period')

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def size(self) -> int:
        return self.points_per_axis ** self.dim

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_period / self.points_per_axis

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @property
    def frequency_step(self) -> float:
        return np.pi / self.half_period

    @property
    def nyquist(self) -> float:
        return self.frequency_step * self.points_per_axis / 2

    def axis_nodes(self) -> np.ndarray:
        return -self.half_period + self.spacing * np.arange(self.points_per_axis)

    def axis_modes(self) -> np.ndarray:
        return np.fft.fftfreq(self.points_per_axis, 1.0 / self.points_per_axis).round().astype(int)

    def axis_frequencies(self) -> np.ndarray:
        return self.axis_modes() * self.frequency_step

    def nodes(self) -> List[np.ndarray]:
        """One array of shape `shape` per coordinate"""
        return np.meshgrid(*([self.axis_nodes()] * self.dim), indexing='ij')

    def frequencies(self) -> List[np.ndarray]:
        return np.meshgrid(*([self.axis_frequencies()] * self.dim), indexing='ij')

    @cached_property
    def flat_nodes(self) -> np.ndarray:
        """(dim, size) node coordinates in row-major order"""
        return np.stack([a.ravel() for a in self.nodes()])

    @cached_property
    def flat_frequencies(self) -> np.ndarray:
        """(dim, size) frequencies in row-major FFT order"""
        return np.stack([a.ravel() for a in self.frequencies()])

    @cached_property
    def flat_modes(self) -> np.ndarray:
        """(dim, size) integer mode vectors in row-major FFT order"""
        modes = np.meshgrid(*([self.axis_modes()] * self.dim), indexing='ij')
        return np.stack([a.ravel() for a in modes])

    @cached_property
    def sign(self) -> np.ndarray:
        """(-1)^{k_1+...+k_n}, the phase of the box offset -L"""
        parity = sum(self.nodes_parity())
        return np.where(parity % 2 == 0, 1.0, -1.0)

    def nodes_parity(self) -> List[np.ndarray]:
        return np.meshgrid(*([np.abs(self.axis_modes())] * self.dim), indexing='ij')

    def wrap_modes(self, modes: np.ndarray) -> np.ndarray:
        """Integer modes reduced into [-N/2, N/2)"""
        half = self.points_per_axis // 2
        return (np.asarray(modes) + half) % self.points_per_axis - half

    def mode_index(self, modes: np.ndarray) -> np.ndarray:
        """Flat FFT-order index of (dim, ...) integer modes, with wrap-around"""
        wrapped = np.asarray(modes) % self.points_per_axis
        return np.ravel_multi_index(tuple(wrapped), self.shape)

    def refined(self) -> 'GridSpec':
        return GridSpec(self.dim, self.half_period, 2 * self.points_per_axis)

    def to_dict(self) -> dict:
        return {'dim': self.dim, 'half_period': self.half_period,
                'points_per_axis': self.points_per_axis}


@dataclass
class GridFunction:
    """Complex node values on a GridSpec, stored with shape grid.shape"""
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.size != self.grid.size:
            raise ValidationError(
                f"Expected {self.grid.size} values, got {values.size}", field='values')
        self.values = values.reshape(self.grid.shape)

    @classmethod
    def from_callable(cls, grid: GridSpec, fn: Callable[..., np.ndarray]) -> 'GridFunction':
        return cls(grid, np.broadcast_to(fn(*grid.nodes()), grid.shape))

    @classmethod
    def constant(cls, grid: GridSpec, value: complex = 1.0) -> 'GridFunction':
        return cls(grid, np.full(grid.shape, value, dtype=complex))

    @classmethod
    def plane_wave(cls, grid: GridSpec, mode: Sequence[int]) -> 'GridFunction':
        xi = np.asarray(mode, dtype=float) * grid.frequency_step
        phase = sum(x * k for x, k in zip(grid.nodes(), xi))
        return cls(grid, np.exp(1j * phase))

    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def __mul__(self, other: 'GridFunction') -> 'GridFunction':
        require_same_grid(self, other)
        return GridFunction(self.grid, self.values * other.values)

    def __add__(self, other: 'GridFunction') -> 'GridFunction':
        require_same_grid(self, other)
        return GridFunction(self.grid, self.values + other.values)

    def scaled(self, factor: complex) -> 'GridFunction':
        return GridFunction(self.grid, factor * self.values)


@dataclass(frozen=True)
class SobolevNorms:
    l2: float
    w_m2: float
    w_s_inf: float

    def to_dict(self) -> dict:
        return {'l2': self.l2, 'w_m2': self.w_m2, 'w_s_inf': self.w_s_inf}


def require_same_grid(*items) -> GridSpec:
    """Shared grid of GridFunctions / operators, else GridMismatchError"""
    grids = [item.grid if not isinstance(item, GridSpec) else item for item in items]
    first = grids[0]
    for grid in grids[1:]:
        if grid != first:
            raise GridMismatchError(details={'expected': first.to_dict(), 'got': grid.to_dict()})
    return first


# Transforms

def mode_coefficients(f: GridFunction) -> np.ndarray:
    """c_k with f(x_j) = Σ c_k e^{i x_j ξ_k}; shape grid.shape, FFT order"""
    grid = f.grid
    return grid.sign * scipy.fft.fftn(f.values, workers=_workers()) / grid.size


def synthesize(coefficients: np.ndarray, grid: GridSpec) -> GridFunction:
    """Inverse of mode_coefficients"""
    c = np.asarray(coefficients, dtype=complex).reshape(grid.shape)
    return GridFunction(grid, scipy.fft.ifftn(c * grid.sign, workers=_workers()) * grid.size)


def forward_transform(f: GridFunction) -> np.ndarray:
    """Samples of f̂(ξ_k) = (2π)^{-n} ∫ f e^{-ixξ_k} dx by the periodic Riemann sum"""
    return mode_coefficients(f) / f.grid.frequency_step ** f.grid.dim


def inverse_transform(coefficients: np.ndarray, grid: GridSpec) -> GridFunction:
    """f(x_j) = Σ_k F_k e^{i x_j ξ_k} (π/L)^n"""
    return synthesize(np.asarray(coefficients) * grid.frequency_step ** grid.dim, grid)


def coefficients_along_space(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Mode coefficients over the leading (flat, size P) spatial axis of a stacked array"""
    rest = values.shape[1:]
    shaped = values.reshape(grid.shape + rest)
    axes = tuple(range(grid.dim))
    sign = grid.sign.reshape(grid.shape + (1,) * len(rest))
    out = sign * scipy.fft.fftn(shaped, axes=axes, workers=_workers()) / grid.size
    return out.reshape(values.shape)


def synthesize_along_space(coefficients: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Inverse of coefficients_along_space"""
    rest = coefficients.shape[1:]
    sign = grid.sign.reshape(grid.shape + (1,) * len(rest))
    shaped = coefficients.reshape(grid.shape + rest) * sign
    axes = tuple(range(grid.dim))
    out = scipy.fft.ifftn(shaped, axes=axes, workers=_workers()) * grid.size
    return out.reshape(coefficients.shape)


def fourier_multiplier(f: GridFunction, multiplier: np.ndarray) -> GridFunction:
    """Transform, scale by multiplier(ξ_k), inverse"""
    return synthesize(mode_coefficients(f) * np.asarray(multiplier).reshape(f.grid.shape), f.grid)


def bessel_symbol(grid: GridSpec, m: float) -> np.ndarray:
    """(1+|ξ_k|²)^{m/2} on the frequency lattice"""
    sq = sum(k ** 2 for k in grid.frequencies())
    return (1.0 + sq) ** (m / 2.0)


def bessel_potential(f: GridFunction, m: float) -> GridFunction:
    """J^m f, the multiplier (1+|ξ|²)^{m/2}"""
    if m == 0:
        return GridFunction(f.grid, f.values.copy())
    return fourier_multiplier(f, bessel_symbol(f.grid, m))


def spectral_derivative(f: GridFunction, gamma: Union[int, MultiIndex]) -> GridFunction:
    """∂^γ f by the multiplier (iξ)^γ"""
    grid = f.grid
    gamma = as_multi_index(gamma, grid.dim)
    if not any(gamma):
        return GridFunction(grid, f.values.copy())
    multiplier = np.ones(grid.shape, dtype=complex)
    for xi, g in zip(grid.frequencies(), gamma):
        multiplier = multiplier * (1j * xi) ** g
    return fourier_multiplier(f, multiplier)


# Norms and pairings

def pairing(u: GridFunction, v: GridFunction) -> complex:
    """Real bilinear pairing ⟨u, v⟩ = Σ u v (2L/N)^n, no conjugation"""
    grid = require_same_grid(u, v)
    return complex(np.sum(u.values * v.values) * grid.cell_volume)


def lp_norm(f: GridFunction, p: float) -> float:
    """Quadrature-weighted l^p norm of node values; p = inf gives the sup"""
    if not p >= 1:
        raise ValidationError(f"p must satisfy 1 <= p <= inf, got {p}", field='p')
    magnitude = np.abs(f.values)
    if np.isinf(p):
        return float(magnitude.max())
    return float((np.sum(magnitude ** p) * f.grid.cell_volume) ** (1.0 / p))


def sobolev_norm_from_modes(f: GridFunction, m: float) -> float:
    """‖f‖_{W^{m,2}} by Parseval: ((2L)^n Σ (1+|ξ|²)^m |c_k|²)^{1/2}"""
    grid = f.grid
    c = mode_coefficients(f)
    weight = bessel_symbol(grid, 2 * m)
    volume = (2 * grid.half_period) ** grid.dim
    return float(np.sqrt(volume * np.sum(weight * np.abs(c) ** 2)))


def sup_derivatives(f: GridFunction, s: int) -> float:
    """sup_{|γ|<=s} ‖∂^γ f‖_∞ over the nodes"""
    grid = f.grid
    c = mode_coefficients(f)
    best = 0.0
    for gamma in multi_indices(grid.dim, s):
        multiplier = np.ones(grid.shape, dtype=complex)
        for xi, g in zip(grid.frequencies(), gamma):
            multiplier = multiplier * (1j * xi) ** g
        values = synthesize(c * multiplier, grid).values
        best = max(best, float(np.abs(values).max()))
    return best


def norms(f: GridFunction, m: int, s: int) -> SobolevNorms:
    if m < 0 or s < 0:
        raise ValidationError(f"m and s must be nonnegative, got m={m}, s={s}")
    return SobolevNorms(
        l2=lp_norm(f, 2),
        w_m2=lp_norm(bessel_potential(f, m), 2),
        w_s_inf=sup_derivatives(f, s),
    )


# Test-function families

def random_trig_polynomial(grid: GridSpec, rng: np.random.Generator,
                           band_fraction: float = 0.25, real: bool = True,
                           decay: float = 0.0) -> GridFunction:
    """Random coefficients on modes |k|_∞ <= band_fraction·N, optionally decaying like ⟨k⟩^{-decay}"""
    limit = int(band_fraction * grid.points_per_axis)
    modes = grid.flat_modes
    mask = np.all(np.abs(modes) <= limit, axis=0).reshape(grid.shape)
    c = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    if decay:
        c = c * (1.0 + np.sum(modes.astype(float) ** 2, axis=0).reshape(grid.shape)) ** (-decay / 2)
    f = synthesize(np.where(mask, c, 0.0), grid)
    if real:
        f = GridFunction(grid, f.values.real)
    return f


def bump(grid: GridSpec, center: Optional[Sequence[float]] = None, width: float = 0.5,
         modulation: Optional[Sequence[float]] = None) -> GridFunction:
    """Gaussian-type bump e^{-|x-c|²/w²} e^{iκ·x}; negligible at the box edge for small w"""
    center = np.zeros(grid.dim) if center is None else np.asarray(center, dtype=float)
    kappa = np.zeros(grid.dim) if modulation is None else np.asarray(modulation, dtype=float)
    nodes = grid.nodes()
    r2 = sum((x - c) ** 2 for x, c in zip(nodes, center))
    phase = sum(x * k for x, k in zip(nodes, kappa))
    return GridFunction(grid, np.exp(-r2 / width ** 2) * np.exp(1j * phase))


def boundary_mass(f: GridFunction) -> float:
    """Largest |f| on the box faces relative to its peak"""
    values = np.abs(f.values)
    peak = values.max()
    if peak == 0:
        return 0.0
    edge = 0.0
    for axis in range(f.grid.dim):
        edge = max(edge, np.take(values, 0, axis=axis).max(), np.take(values, -1, axis=axis).max())
    return float(edge / peak)
