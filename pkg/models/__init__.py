from .errors import (
    ConvergenceError,
    DerivativeOrderError,
    GridError,
    InsufficientDataError,
    ParameterMismatchError,
    RepresentationError,
    SymbolError,
)

__all__ = [
    "ConvergenceError",
    "DerivativeOrderError",
    "GridError",
    "InsufficientDataError",
    "ParameterMismatchError",
    "RepresentationError",
    "SymbolError",
]
