from .symbols import (
    cone_indicator,
    dispersion_speed,
    fit_n_lower_bound,
    m_symbol,
    mtilde_inverse,
    mtilde_symbol,
    n_eps_symbol,
    n_symbol,
    resolvent_gap_sup,
    resolvent_symbol,
    symbol_table,
    tanh_ratio,
)

__all__ = [
    "cone_indicator",
    "dispersion_speed",
    "fit_n_lower_bound",
    "m_symbol",
    "mtilde_inverse",
    "mtilde_symbol",
    "n_eps_symbol",
    "n_symbol",
    "resolvent_gap_sup",
    "resolvent_symbol",
    "symbol_table",
    "tanh_ratio",
]
