from __future__ import annotations

from typing import Any, Optional


class GridError(ValueError):
    """Invalid grid lengths or point counts."""


class RepresentationError(ValueError):
    """A field lacks the representation an operation needs."""


class SymbolError(ValueError):
    """A Fourier symbol is non-finite (or degenerate) on a retained mode."""


class DerivativeOrderError(ValueError):
    """Lump derivative order above four or unknown family index."""


class ParameterMismatchError(ValueError):
    """Norm kind and symbol parameters are inconsistent."""


class InsufficientDataError(ValueError):
    """Too few sweep points to fit an estimate."""


class ConvergenceError(RuntimeError):
    """An iteration failed to contract, diverged or ran out of steps.

    ``diagnostics`` carries the iteration history and ``best`` the best
    iterate reached, when there is one.
    """

    def __init__(
        self,
        message: str,
        diagnostics: Optional[dict[str, Any]] = None,
        best: Any = None,
    ) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics or {}
        self.best = best
