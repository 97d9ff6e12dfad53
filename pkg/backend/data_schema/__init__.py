from .models import (
    SCHEMA_VERSION,
    Config,
    DispersionCheckResult,
    EstimateResult,
    EstimateSample,
    NewtonDiagnostics,
    SolverConfig,
    SpectralProbeResult,
    SweepRecord,
    SweepReport,
    SymbolParams,
    U2Diagnostics,
)

__all__ = [
    "SCHEMA_VERSION",
    "Config",
    "DispersionCheckResult",
    "EstimateResult",
    "EstimateSample",
    "NewtonDiagnostics",
    "SolverConfig",
    "SpectralProbeResult",
    "SweepRecord",
    "SweepReport",
    "SymbolParams",
    "U2Diagnostics",
]
