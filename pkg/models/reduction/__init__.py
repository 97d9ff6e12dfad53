from .solver import (
    AssembledWave,
    IterationLog,
    ReductionSolver,
    ReductionState,
    ResidualNorms,
    fdkp_residual,
    fdkp_residual_field,
)

__all__ = [
    "AssembledWave",
    "IterationLog",
    "ReductionSolver",
    "ReductionState",
    "ResidualNorms",
    "fdkp_residual",
    "fdkp_residual_field",
]
