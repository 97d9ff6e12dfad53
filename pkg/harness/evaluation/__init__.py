from .estimates import (
    ESTIMATES,
    REQUIRED_ESTIMATES,
    EstimateSpec,
    measure_estimates,
    verify_estimate,
)

__all__ = [
    "ESTIMATES",
    "REQUIRED_ESTIMATES",
    "EstimateSpec",
    "measure_estimates",
    "verify_estimate",
]
