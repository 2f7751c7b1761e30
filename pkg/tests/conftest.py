"""
Test Configuration
Provides test fixtures and configuration
"""

import pytest
import sys
from pathlib import Path

import numpy as np

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from config import Config, load_tolerances
from fourier_core import GridSpec
from utils import SimpleCache, seeded_rng

TEST_SEED = 20240607


@pytest.fixture
def config():
    """Provide test configuration"""
    return Config()


@pytest.fixture
def cache():
    """Provide test cache"""
    return SimpleCache(ttl_seconds=1)


@pytest.fixture
def tolerances():
    """Shipped tolerances, fresh copy per test"""
    return load_tolerances()


@pytest.fixture
def seed():
    return TEST_SEED


@pytest.fixture
def rng():
    """Seeded generator so every test sees the same draws"""
    return seeded_rng(TEST_SEED)


@pytest.fixture
def grid16():
    return GridSpec(1, float(np.pi), 16)


@pytest.fixture
def grid32():
    return GridSpec(1, float(np.pi), 32)


@pytest.fixture
def grid64():
    return GridSpec(1, float(np.pi), 64)


@pytest.fixture
def grid2d():
    """Small two-dimensional grid"""
    return GridSpec(2, float(np.pi), 8)


@pytest.fixture
def output_dir(tmp_path):
    """Report directory inside pytest's tmp dir"""
    path = tmp_path / 'reports'
    path.mkdir()
    return path


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
