"""
Exception Handling
Error hierarchy for the symbol calculus and error reporting utilities
"""

from typing import Optional

from logging_config import get_logger

logger = get_logger(__name__)


class BilinearCalculusError(Exception):
    """Base exception for bscalc"""

    def __init__(self, message: str, error_code: str = "UNKNOWN", details: Optional[dict] = None):
        self.message = message
        self.error_code = error_code
        self.details = details or {}
        super().__init__(self.message)

    def to_dict(self):
        """Convert exception to dictionary"""
        return {
            'error': self.error_code,
            'message': self.message,
            'details': self.details
        }


class ConfigurationError(BilinearCalculusError):
    """Bad run configuration or tolerance override"""
    def __init__(self, message: str, details: Optional[dict] = None):
        super().__init__(message, "CONFIG_ERROR", details)


class ValidationError(BilinearCalculusError):
    """Input validation error"""
    def __init__(self, message: str, field: str = None, details: Optional[dict] = None):
        if details is None:
            details = {}
        if field:
            details['field'] = field
        super().__init__(message, "VALIDATION_ERROR", details)


class OrderCapError(BilinearCalculusError):
    """Requested derivative order exceeds the configured cap"""
    def __init__(self, order: int, cap: int):
        super().__init__(
            f"Derivative order {order} exceeds cap {cap}",
            "ORDER_CAP",
            {'order': order, 'cap': cap}
        )


class UnknownFamilyError(BilinearCalculusError):
    """Unknown built-in symbol family"""
    def __init__(self, name: str, known: list):
        super().__init__(
            f"Unknown symbol family '{name}'",
            "UNKNOWN_FAMILY",
            {'name': name, 'known': sorted(known)}
        )


class SymbolParseError(BilinearCalculusError):
    """Symbol spec could not be parsed"""
    def __init__(self, message: str, token: str = None, position: int = None):
        details = {}
        if token is not None:
            details['token'] = token
        if position is not None:
            details['position'] = position
        super().__init__(message, "SYMBOL_PARSE", details)


class GridMismatchError(BilinearCalculusError):
    """Inputs live on different grids"""
    def __init__(self, message: str = "Inputs do not share one grid", details: Optional[dict] = None):
        super().__init__(message, "GRID_MISMATCH", details)


class TensorTooLargeError(BilinearCalculusError):
    """Materialized trilinear tensor would exceed the entry limit"""
    def __init__(self, entries: int, limit: int):
        super().__init__(
            f"Tensor with {entries} entries exceeds limit {limit}",
            "TENSOR_TOO_LARGE",
            {'entries': entries, 'limit': limit}
        )


class NotLocalizedError(BilinearCalculusError):
    """Symbol carries mass at the edge of the frequency box"""
    def __init__(self, edge_ratio: float, threshold: float):
        super().__init__(
            f"Symbol is not frequency-localized: edge/peak ratio {edge_ratio:.3e} > {threshold:.1e}",
            "NOT_LOCALIZED",
            {'edge_ratio': edge_ratio, 'threshold': threshold}
        )


class HypothesisViolationError(BilinearCalculusError):
    """Class parameters do not satisfy the hypothesis of the claim being checked"""
    def __init__(self, message: str, details: Optional[dict] = None):
        super().__init__(message, "HYPOTHESIS", details)


class ClassInconsistencyError(BilinearCalculusError):
    """A symbol failed its declared class report"""
    def __init__(self, message: str, details: Optional[dict] = None):
        super().__init__(message, "CLASS_INCONSISTENT", details)


class InsufficientRangeError(BilinearCalculusError):
    """Too few usable shells for a decay fit"""
    def __init__(self, usable: int, required: int = 4):
        super().__init__(
            f"Only {usable} usable shells, need {required}",
            "INSUFFICIENT_RANGE",
            {'usable': usable, 'required': required}
        )


class ExponentMismatchError(BilinearCalculusError):
    """Lebesgue exponents violate 1/p + 1/q = 1/r"""
    def __init__(self, p: float, q: float, r: float):
        super().__init__(
            f"Exponents (p={p}, q={q}, r={r}) do not satisfy 1/p + 1/q = 1/r",
            "EXPONENT_MISMATCH",
            {'p': p, 'q': q, 'r': r}
        )


USAGE_ERRORS = (ConfigurationError, ValidationError, SymbolParseError, UnknownFamilyError, ExponentMismatchError)


def handle_exception(exc: Exception, context: str = ""):
    """Handle exception with logging"""
    if isinstance(exc, BilinearCalculusError):
        logger.error(f"[{exc.error_code}] {context}: {exc.message}")
        return exc.to_dict()
    else:
        logger.error(f"Unexpected error in {context}: {str(exc)}", exc_info=True)
        return {
            'error': 'INTERNAL_ERROR',
            'message': str(exc) or 'An unexpected error occurred',
            'details': {'context': context} if context else {}
        }
