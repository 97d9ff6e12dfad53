from __future__ import annotations

import logging
from functools import lru_cache
from typing import Union

import numpy as np

from backend.data_schema.models import SymbolParams
from models.errors import SymbolError
from models.spectral.core import Frame, Grid, multiplier_table

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]
Wavevector = tuple[ArrayLike, ArrayLike]

_TAYLOR_CUTOFF = 1e-4
_LOG_SERIES_CUTOFF = 1e-2


# ----------------------------------------------------------------------
# Private helpers
# ----------------------------------------------------------------------


def _unpack(k: Wavevector) -> tuple[np.ndarray, np.ndarray, bool]:
    k1, k2 = k
    scalar = np.isscalar(k1) and np.isscalar(k2)
    a1, a2 = np.broadcast_arrays(np.asarray(k1, dtype=float), np.asarray(k2, dtype=float))
    return a1, a2, scalar


def _out(value: np.ndarray, scalar: bool) -> ArrayLike:
    return float(value) if scalar else value


def _slope_squared(k1: np.ndarray, k2: np.ndarray) -> np.ndarray:
    """(k2/k1)^2, with the removable k = 0 value 0; k1 = 0 with k2 != 0 is an error."""
    singular = (k1 == 0) & (k2 != 0)
    if np.any(singular):
        raise SymbolError("symbol undefined at k1 = 0 with k2 != 0")
    t2 = np.zeros_like(k1)
    np.divide(k2 * k2, k1 * k1, out=t2, where=k1 != 0)
    return t2


def tanh_ratio(r: ArrayLike) -> ArrayLike:
    """tanh(r)/r with its Taylor series near r = 0."""
    a = np.abs(np.asarray(r, dtype=float))
    small = a < _TAYLOR_CUTOFF
    safe = np.where(small, 1.0, a)
    a2 = a * a
    value = np.where(small, 1.0 - a2 / 3.0 + 2.0 * a2 * a2 / 15.0, np.tanh(safe) / safe)
    return _out(value, np.isscalar(r))


def _log_tanh_ratio(r: np.ndarray) -> np.ndarray:
    small = r < _LOG_SERIES_CUTOFF
    safe = np.where(small, 1.0, r)
    r2 = r * r
    series = r2 * (-1.0 / 3.0 + r2 * (7.0 / 90.0 - r2 * 62.0 / 2835.0))
    return np.where(small, series, np.log(np.tanh(safe) / safe))


def _log_m(k1: np.ndarray, k2: np.ndarray, beta: float) -> np.ndarray:
    t2 = _slope_squared(k1, k2)
    mod2 = k1 * k1 * (1.0 + t2)
    return 0.5 * (np.log1p(beta * mod2) + _log_tanh_ratio(np.sqrt(mod2)) + np.log1p(2.0 * t2))


# ----------------------------------------------------------------------
# Public API
# ----------------------------------------------------------------------


def m_symbol(k: Wavevector, p: SymbolParams) -> ArrayLike:
    """Full-dispersion symbol m(k), written in (k1, k2/k1); m(0, 0) = 1."""
    k1, k2, scalar = _unpack(k)
    t2 = _slope_squared(k1, k2)
    mod2 = k1 * k1 * (1.0 + t2)
    value = np.sqrt((1.0 + p.beta * mod2) * tanh_ratio(np.sqrt(mod2)) * (1.0 + 2.0 * t2))
    return _out(value, scalar)


def n_symbol(k: Wavevector, p: SymbolParams) -> ArrayLike:
    """n = m - 1, evaluated through expm1 so small wavenumbers keep full relative accuracy."""
    k1, k2, scalar = _unpack(k)
    return _out(np.expm1(_log_m(k1, k2, p.beta)), scalar)


def mtilde_symbol(k: Wavevector, p: SymbolParams) -> ArrayLike:
    k1, k2, scalar = _unpack(k)
    return _out(1.0 + _slope_squared(k1, k2) + p.kp_coefficient * k1 * k1, scalar)


def mtilde_inverse(k: Wavevector, p: SymbolParams) -> ArrayLike:
    k1, k2, scalar = _unpack(k)
    return _out(1.0 / (1.0 + _slope_squared(k1, k2) + p.kp_coefficient * k1 * k1), scalar)


def n_eps_symbol(k: Wavevector, p: SymbolParams) -> ArrayLike:
    """n_eps(k) = n(eps k1, eps^2 k2)."""
    k1, k2, scalar = _unpack(k)
    eps = p.epsilon
    return _out(np.expm1(_log_m(eps * k1, eps * eps * k2, p.beta)), scalar)


def resolvent_symbol(k: Wavevector, p: SymbolParams) -> ArrayLike:
    """eps^2 / (eps^2 + n_eps(k)), which tends to 1/mtilde as eps -> 0."""
    if p.epsilon <= 0:
        raise SymbolError("resolvent needs epsilon > 0")
    k1, k2, scalar = _unpack(k)
    eps2 = p.epsilon**2
    n_eps = np.expm1(_log_m(p.epsilon * k1, eps2 * k2, p.beta))
    return _out(eps2 / (eps2 + n_eps), scalar)


def cone_indicator(k: Wavevector, p: SymbolParams, frame: Frame = Frame.PHYSICAL) -> ArrayLike:
    """chi(k) in the physical frame, chi_eps(k) = chi(eps k1, eps^2 k2) in the KP frame."""
    k1, k2, scalar = _unpack(k)
    if frame is Frame.KP_SCALED:
        if p.epsilon == 0:
            inside = ~((k1 == 0) & (k2 != 0))
            return bool(inside) if scalar else inside
        k1, k2 = p.epsilon * k1, p.epsilon**2 * k2
    inside = (np.abs(k1) <= p.delta) & (np.abs(k2) <= p.delta * np.abs(k1)) & (k1 != 0)
    inside |= (k1 == 0) & (k2 == 0)
    return bool(inside) if scalar else inside


def dispersion_speed(k1: ArrayLike, p: SymbolParams) -> ArrayLike:
    """Speed c(k1) of the one-dimensional dispersion curve; c(0) = 1."""
    a = np.abs(np.asarray(k1, dtype=float))
    value = np.sqrt((1.0 + p.beta * a * a) * tanh_ratio(a))
    return _out(value, np.isscalar(k1))


def fit_n_lower_bound(p: SymbolParams, samples: int = 200) -> float:
    """Largest c0 with n(s) >= c0 |(s1, s2/s1)|^2 over a sample of the cone."""
    s1 = np.linspace(-p.delta, p.delta, 2 * samples + 1)
    s1 = s1[s1 != 0.0]
    t = np.linspace(-p.delta, p.delta, 2 * samples + 1)
    ss1, tt = np.meshgrid(s1, t, indexing="ij")
    ratio = n_symbol((ss1, tt * ss1), p) / (ss1 * ss1 + tt * tt)
    c0 = float(np.min(ratio))
    logger.debug("fitted n lower bound c0=%.6g over %d cone samples", c0, ratio.size)
    return c0


def resolvent_gap_sup(p: SymbolParams, weight_power: float, samples: int = 400) -> float:
    """sup over the scaled cone of |rho_eps - 1/mtilde| (1 + k1^2 + (k2/k1)^2)^weight_power."""
    bound = p.delta / p.epsilon
    k1 = np.geomspace(1e-3, bound, samples)
    t = np.concatenate(([0.0], np.geomspace(1e-3, bound, samples)))
    kk1, tt = np.meshgrid(k1, t, indexing="ij")
    kk2 = tt * kk1
    gap = np.abs(resolvent_symbol((kk1, kk2), p) - mtilde_inverse((kk1, kk2), p))
    return float(np.max(gap * (1.0 + kk1 * kk1 + tt * tt) ** weight_power))


# ----------------------------------------------------------------------
# Lattice tables
# ----------------------------------------------------------------------


_TABLES = {
    "m": lambda p: lambda k1, k2: m_symbol((k1, k2), p),
    "n": lambda p: lambda k1, k2: n_symbol((k1, k2), p),
    "m_eps": lambda p: lambda k1, k2: m_symbol((p.epsilon * k1, p.epsilon**2 * k2), p),
    "n_eps": lambda p: lambda k1, k2: n_eps_symbol((k1, k2), p),
    "mtilde": lambda p: lambda k1, k2: mtilde_symbol((k1, k2), p),
    "mtilde_inv": lambda p: lambda k1, k2: mtilde_inverse((k1, k2), p),
    "resolvent": lambda p: lambda k1, k2: resolvent_symbol((k1, k2), p),
}


@lru_cache(maxsize=128)
def symbol_table(grid: Grid, p: SymbolParams, name: str) -> np.ndarray:
    """Read-only lattice table of a named symbol, zero off the retained modes."""
    try:
        factory = _TABLES[name]
    except KeyError:
        raise ValueError(f"unknown symbol table {name!r}; choose from {sorted(_TABLES)}") from None
    table = multiplier_table(grid, factory(p))
    table.flags.writeable = False
    return table
