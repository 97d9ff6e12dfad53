from .probes import NondegeneracyProbe, dispersion_check, nondegeneracy_probe

__all__ = ["NondegeneracyProbe", "dispersion_check", "nondegeneracy_probe"]
