"""
Utilities Module
Multi-index bookkeeping, seeded randomness, log-log decay fits and memoization
"""

import itertools
import math
import re
import time
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from exceptions import InsufficientRangeError
from logging_config import get_logger

logger = get_logger(__name__)

MultiIndex = Tuple[int, ...]


class SimpleCache:
    """Simple in-memory cache with optional TTL"""

    def __init__(self, ttl_seconds: Optional[float] = None):
        self.ttl_seconds = ttl_seconds
        self.cache: Dict[Any, tuple] = {}

    def get(self, key: Any) -> Optional[Any]:
        """Get value from cache"""
        if key not in self.cache:
            return None

        value, expiry = self.cache[key]
        if expiry is not None and time.time() > expiry:
            del self.cache[key]
            return None

        return value

    def set(self, key: Any, value: Any, ttl_seconds: Optional[float] = None):
        """Set value in cache"""
        ttl = ttl_seconds or self.ttl_seconds
        expiry = time.time() + ttl if ttl else None
        self.cache[key] = (value, expiry)

    def clear(self):
        """Clear cache"""
        self.cache.clear()

    def __len__(self):
        return len(self.cache)


# Global instances
_cache_instances: Dict[str, SimpleCache] = {}


def get_cache(name: str = 'default', ttl_seconds: Optional[float] = None) -> SimpleCache:
    """Get or create cache instance"""
    if name not in _cache_instances:
        _cache_instances[name] = SimpleCache(ttl_seconds)
    return _cache_instances[name]


# Multi-indices

def zero_index(dim: int) -> MultiIndex:
    return (0,) * dim


def as_multi_index(value: Any, dim: int) -> MultiIndex:
    """Accept an int (dim 1), a sequence, or None (zero)"""
    if value is None:
        return zero_index(dim)
    if isinstance(value, (int, np.integer)):
        if dim != 1:
            raise ValueError(f"Scalar multi-index {value} given for dimension {dim}")
        return (int(value),)
    index = tuple(int(v) for v in value)
    if len(index) != dim or any(v < 0 for v in index):
        raise ValueError(f"Invalid multi-index {value} for dimension {dim}")
    return index


def order(index: Sequence[int]) -> int:
    return int(sum(index))


def index_factorial(index: Sequence[int]) -> int:
    return math.prod(math.factorial(v) for v in index)


def multi_indices(dim: int, max_order: int) -> List[MultiIndex]:
    """All multi-indices of length dim with |index| <= max_order, graded"""
    result = [
        index for index in itertools.product(range(max_order + 1), repeat=dim)
        if sum(index) <= max_order
    ]
    return sorted(result, key=lambda index: (sum(index), tuple(-v for v in index)))


def derivative_triples(dim: int, max_order: int) -> List[Tuple[MultiIndex, MultiIndex, MultiIndex]]:
    """All (alpha, beta, gamma) with |alpha|+|beta|+|gamma| <= max_order"""
    flat = multi_indices(3 * dim, max_order)
    return [(i[:dim], i[dim:2 * dim], i[2 * dim:]) for i in flat]


def sub_indices(index: Sequence[int]) -> Iterable[MultiIndex]:
    """All multi-indices below index componentwise"""
    return itertools.product(*(range(v + 1) for v in index))


def index_binomial(index: Sequence[int], sub: Sequence[int]) -> int:
    return math.prod(math.comb(a, b) for a, b in zip(index, sub))


def triple_key(alpha: MultiIndex, beta: MultiIndex, gamma: MultiIndex) -> str:
    """Stable string key used in reports"""
    fmt = lambda index: ",".join(str(v) for v in index)
    return f"a({fmt(alpha)})b({fmt(beta)})g({fmt(gamma)})"


# Randomness

def seeded_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent reproducible stream per (seed, stream...)"""
    return np.random.default_rng([int(seed), *[int(s) for s in stream]])


# Decay fits

@dataclass
class DecayFit:
    """Least-squares fit of log(sup) against log(radius)"""
    exponent: Optional[float]
    intercept: Optional[float]
    r_squared: Optional[float]
    sample_range: Tuple[float, float]
    degenerate_zero: bool = False
    points: List[Tuple[float, float]] = field(default_factory=list)

    def within(self, expected: float, tolerance: float) -> bool:
        """Exponent is at most expected + tolerance (degenerate zero always passes)"""
        if self.degenerate_zero:
            return True
        return self.exponent <= expected + tolerance

    def quality_ok(self, min_r_squared: float) -> bool:
        return self.degenerate_zero or (self.r_squared is not None and self.r_squared >= min_r_squared)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'exponent': self.exponent,
            'intercept': self.intercept,
            'r_squared': self.r_squared,
            'sample_range': list(self.sample_range),
            'degenerate_zero': self.degenerate_zero,
            'points': [list(p) for p in self.points],
        }


def dyadic_radii(r_min: float, r_max: float) -> List[float]:
    """r_min, 2 r_min, ... up to r_max inclusive"""
    radii = []
    r = float(r_min)
    while r <= r_max * (1 + 1e-12):
        radii.append(r)
        r *= 2.0
    return radii


def fit_loglog(radii: Sequence[float], values: Sequence[float], zero_floor: float = 1e-9,
               min_points: int = 4) -> DecayFit:
    """Fit values ~ C r^exponent; all-below-floor data is reported as degenerate zero"""
    r = np.asarray(radii, dtype=float)
    v = np.asarray(values, dtype=float)
    sample_range = (float(r.min()), float(r.max())) if r.size else (0.0, 0.0)
    points = [(float(a), float(b)) for a, b in zip(r, v)]

    if v.size and np.all(v < zero_floor):
        return DecayFit(None, None, None, sample_range, degenerate_zero=True, points=points)

    usable = (v > 0) & np.isfinite(v)
    if usable.sum() < min_points:
        raise InsufficientRangeError(int(usable.sum()), min_points)

    log_r = np.log(r[usable])
    log_v = np.log(v[usable])
    slope, intercept = np.polyfit(log_r, log_v, 1)
    residual = log_v - (slope * log_r + intercept)
    total = log_v - log_v.mean()
    ss_tot = float(total @ total)
    r_squared = 1.0 - float(residual @ residual) / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(float(slope), float(intercept), max(0.0, min(1.0, r_squared)),
                    sample_range, points=points)


def trend_slope(scales: Sequence[float], values: Sequence[float]) -> float:
    """Slope of log(values) against log(scales); the no-growth-trend statistic"""
    fit = fit_loglog(scales, values, zero_floor=0.0, min_points=2)
    return fit.exponent


def sanitize_filename(filename: str) -> str:
    """Sanitize filename"""
    # Remove path separators and special characters
    filename = filename.replace('/', '_').replace('\\', '_')
    filename = re.sub(r'[<>:"|?*]', '', filename)

    # Keep only alphanumeric, dash, underscore, dot
    filename = re.sub(r'[^a-zA-Z0-9._-]', '', filename)

    return filename or 'file'
