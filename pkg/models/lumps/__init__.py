from .lumps import (
    LumpFamily,
    LumpSample,
    MtildeLump,
    TauPolynomial,
    eval_tau,
    eval_zeta_star,
    kp_residual_exact,
    lump_family,
    lump_for_mtilde,
    sample_lump,
)

__all__ = [
    "LumpFamily",
    "LumpSample",
    "MtildeLump",
    "TauPolynomial",
    "eval_tau",
    "eval_zeta_star",
    "kp_residual_exact",
    "lump_family",
    "lump_for_mtilde",
    "sample_lump",
]
