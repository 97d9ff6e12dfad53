from backend.data_schema.models import (
    Config,
    SolverConfig,
    SweepReport,
    SymbolParams,
)

__all__ = [
    "Config",
    "SolverConfig",
    "SweepReport",
    "SymbolParams",
]
