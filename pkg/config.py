"""
Configuration Management
Handles environment variables, the tolerance file and per-run overrides
"""

import os
from pathlib import Path
from typing import Any, Dict, Optional
import logging

import yaml

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE_FILE = Path(__file__).parent / 'tolerances.yaml'


class ConfigError(Exception):
    """Configuration error"""
    pass


class Config:
    """Application configuration"""

    def __init__(self):
        self._load_env()

    def _load_env(self):
        """Load environment variables"""
        from dotenv import load_dotenv
        env_file = Path(__file__).parent / '.env'
        if env_file.exists():
            load_dotenv(env_file)
        else:
            logger.debug(f".env file not found at {env_file}")

    def get(self, key: str, default: Any = None, required: bool = False) -> Any:
        """Get configuration value"""
        value = os.getenv(key, default)

        if required and value is None:
            raise ConfigError(f"Required configuration '{key}' not found")

        return value

    def get_int(self, key: str, default: int = 0, required: bool = False) -> int:
        """Get integer configuration (accepts 0x-prefixed values)"""
        value = self.get(key, required=required)
        if value is None:
            return default
        try:
            return int(str(value), 0)
        except ValueError:
            raise ConfigError(f"Configuration '{key}' must be an integer, got '{value}'")

    def get_float(self, key: str, default: float = 0.0, required: bool = False) -> float:
        """Get float configuration"""
        value = self.get(key, required=required)
        if value is None:
            return default
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"Configuration '{key}' must be a number, got '{value}'")

    def get_bool(self, key: str, default: bool = False, required: bool = False) -> bool:
        """Get boolean configuration"""
        value = self.get(key, required=required)
        if value is None:
            return default
        return str(value).lower() in ('true', '1', 'yes', 'on')

    def get_string(self, key: str, default: str = "", required: bool = False) -> str:
        """Get string configuration"""
        value = self.get(key, required=required)
        return value if value is not None else default

    # Output and logging
    @property
    def output_dir(self) -> str:
        return self.get_string("BSCALC_OUTPUT_DIR", "reports")

    @property
    def log_dir(self) -> str:
        return self.get_string("BSCALC_LOG_DIR", str(Path(__file__).parent / 'logs'))

    @property
    def log_level(self) -> str:
        return self.get_string("BSCALC_LOG_LEVEL", "INFO")

    @property
    def debug(self) -> bool:
        return self.get_bool("BSCALC_DEBUG", False)

    # Numerics
    @property
    def tolerance_file(self) -> str:
        return self.get_string("BSCALC_TOLERANCES", str(DEFAULT_TOLERANCE_FILE))

    @property
    def workers(self) -> int:
        return self.get_int("BSCALC_WORKERS", 1)

    @property
    def derivative_cap(self) -> int:
        return self.get_int("BSCALC_DERIVATIVE_CAP", 6)

    @property
    def shell_directions(self) -> int:
        return self.get_int("BSCALC_SHELL_DIRECTIONS", 64)

    @property
    def seed(self) -> int:
        return self.get_int("BSCALC_SEED", 0xB5D0)


def _coerce(raw: Any, reference: Any, key: str) -> Any:
    """Convert an override to the type of the shipped default"""
    if isinstance(raw, str):
        try:
            raw = yaml.safe_load(raw)
        except yaml.YAMLError:
            raise ConfigError(f"Tolerance '{key}' has an unreadable value '{raw}'")
    if isinstance(reference, bool):
        return bool(raw)
    if isinstance(reference, int) and not isinstance(reference, bool):
        if isinstance(raw, (int, float)) and float(raw).is_integer():
            return int(raw)
        raise ConfigError(f"Tolerance '{key}' must be an integer, got '{raw}'")
    if isinstance(reference, float):
        if isinstance(raw, (int, float)) and not isinstance(raw, bool):
            return float(raw)
        raise ConfigError(f"Tolerance '{key}' must be a number, got '{raw}'")
    return raw


def load_tolerances(overrides: Optional[Dict[str, Any]] = None, path: Optional[str] = None) -> Dict[str, Any]:
    """Load the tolerance file and apply validated overrides"""
    tolerance_path = Path(path or get_config().tolerance_file)
    if not tolerance_path.exists():
        raise ConfigError(f"Tolerance file not found: {tolerance_path}")
    with open(tolerance_path, 'r', encoding='utf-8') as f:
        tolerances = yaml.safe_load(f) or {}

    for key, raw in (overrides or {}).items():
        if key not in tolerances:
            raise ConfigError(f"Unknown tolerance key '{key}'")
        tolerances[key] = _coerce(raw, tolerances[key], key)
    return tolerances


# Global config instance
_config: Optional[Config] = None
_tolerances: Optional[Dict[str, Any]] = None


def get_config() -> Config:
    """Get or create global config"""
    global _config
    if _config is None:
        _config = Config()
    return _config


def default_tolerances() -> Dict[str, Any]:
    """Shipped tolerances without overrides, loaded once"""
    global _tolerances
    if _tolerances is None:
        _tolerances = load_tolerances()
    return dict(_tolerances)
