from .sweep import approximation_error, run_sweep

__all__ = ["approximation_error", "run_sweep"]
