from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Mapping, Union

import numpy as np
import sympy
from numpy.polynomial import polynomial as P

from backend.data_schema.models import SymbolParams
from models.errors import DerivativeOrderError, ParameterMismatchError
from models.spectral.core import Direction, Field, Frame, Grid, project_admissible, transform

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

MAX_ORDER = 4

# tau_k for the symmetric lump families, as {(power of x, power of y): coefficient}.
_TAU_TABLES: dict[int, dict[tuple[int, int], int]] = {
    1: {(2, 0): 1, (0, 2): 1, (0, 0): 3},
    2: {
        (6, 0): 1,
        (4, 2): 3,
        (2, 4): 3,
        (0, 6): 1,
        (4, 0): 25,
        (2, 2): 90,
        (0, 4): 17,
        (2, 0): -125,
        (0, 2): 475,
        (0, 0): 1875,
    },
}

_X, _Y = sympy.symbols("x y")


def _as_table(terms: Mapping[tuple[int, int], int]) -> np.ndarray:
    deg_x = max(i for i, _ in terms) + 1
    deg_y = max(j for _, j in terms) + 1
    table = np.zeros((deg_x, deg_y))
    for (i, j), c in terms.items():
        table[i, j] = float(c)
    return table


@dataclass(frozen=True)
class TauPolynomial:
    """Integer bivariate polynomial held as ((i, j), coefficient) pairs."""

    terms: tuple[tuple[tuple[int, int], int], ...]

    @classmethod
    def from_dict(cls, terms: Mapping[tuple[int, int], int]) -> TauPolynomial:
        return cls(tuple(sorted((tuple(k), int(v)) for k, v in terms.items() if v != 0)))

    @classmethod
    def for_family(cls, k_index: int) -> TauPolynomial:
        if k_index not in _TAU_TABLES:
            raise DerivativeOrderError(f"unknown lump family k={k_index}; only 1 and 2 are tabulated")
        return cls.from_dict(_TAU_TABLES[k_index])

    @property
    def degree(self) -> int:
        return max(i + j for (i, j), _ in self.terms)

    @property
    def is_even(self) -> bool:
        return all(i % 2 == 0 and j % 2 == 0 for (i, j), _ in self.terms)

    def as_poly(self) -> sympy.Poly:
        expr = sum(c * _X**i * _Y**j for (i, j), c in self.terms)
        return sympy.Poly(expr, _X, _Y, domain=sympy.ZZ)

    @cached_property
    def table(self) -> np.ndarray:
        return _as_table(dict(self.terms))

    def evaluate(self, x: ArrayLike, y: ArrayLike) -> ArrayLike:
        return P.polyval2d(x, y, self.table)


class LumpFamily:
    """zeta = -6 d_x^2 log(tau) and its derivatives up to order four.

    Each derivative is kept as N / tau^p with N an exact integer polynomial,
    built by the quotient rule, so evaluation never differentiates numerically.
    """

    def __init__(self, tau: TauPolynomial, k_index: int = 0) -> None:
        self.tau = tau
        self.k_index = k_index
        self._numerators: dict[tuple[int, int], tuple[np.ndarray, int]] = {}
        self._build()

    # ------------------------------------------------------------------
    # Public API
    # ------------------------------------------------------------------

    def zeta(self, x: ArrayLike, y: ArrayLike, a: int = 0, b: int = 0) -> ArrayLike:
        """d_x^a d_y^b zeta at (x, y)."""
        if a < 0 or b < 0 or a + b > MAX_ORDER:
            raise DerivativeOrderError(f"derivative order (a={a}, b={b}) exceeds {MAX_ORDER}")
        table, power = self._numerators[(a, b)]
        return P.polyval2d(x, y, table) / self.tau.evaluate(x, y) ** power

    def kp_residual(self, x: ArrayLike, y: ArrayLike) -> ArrayLike:
        """Left side of d_x^2(-zeta_xx + zeta + zeta^2) + zeta_yy, expanded by Leibniz."""
        z = self.zeta(x, y)
        zx = self.zeta(x, y, 1, 0)
        zxx = self.zeta(x, y, 2, 0)
        return -self.zeta(x, y, 4, 0) + zxx + 2.0 * z * zxx + 2.0 * zx * zx + self.zeta(x, y, 0, 2)

    def to_json(self) -> str:
        return json.dumps(
            {
                "k_index": self.k_index,
                "degree": self.tau.degree,
                "coefficients": [[i, j, c] for (i, j), c in self.tau.terms],
            }
        )

    # ------------------------------------------------------------------
    # Private helpers
    # ------------------------------------------------------------------

    def _build(self) -> None:
        tau = self.tau.as_poly()
        tau_x = tau.diff(_X)
        tau_y = tau.diff(_Y)
        polys: dict[tuple[int, int], tuple[sympy.Poly, int]] = {
            (0, 0): (-6 * (tau * tau_x.diff(_X) - tau_x * tau_x), 2)
        }
        for order in range(1, MAX_ORDER + 1):
            for a in range(order, -1, -1):
                b = order - a
                if a > 0:
                    num, p = polys[(a - 1, b)]
                    polys[(a, b)] = (num.diff(_X) * tau - p * num * tau_x, p + 1)
                else:
                    num, p = polys[(a, b - 1)]
                    polys[(a, b)] = (num.diff(_Y) * tau - p * num * tau_y, p + 1)
        for key, (num, p) in polys.items():
            terms = num.as_dict() or {(0, 0): 0}
            self._numerators[key] = (_as_table(terms), p)
        logger.debug("built %d derivative evaluators for tau of degree %d", len(polys), self.tau.degree)


@lru_cache(maxsize=None)
def lump_family(k_index: int) -> LumpFamily:
    return LumpFamily(TauPolynomial.for_family(k_index), k_index)


def eval_tau(k_index: int, x: ArrayLike, y: ArrayLike) -> ArrayLike:
    return TauPolynomial.for_family(k_index).evaluate(x, y)


def eval_zeta_star(k_index: int, x: ArrayLike, y: ArrayLike, a: int = 0, b: int = 0) -> ArrayLike:
    return lump_family(k_index).zeta(x, y, a, b)


def kp_residual_exact(k_index: int, x: ArrayLike, y: ArrayLike) -> ArrayLike:
    return lump_family(k_index).kp_residual(x, y)


# ----------------------------------------------------------------------
# m-tilde frame
# ----------------------------------------------------------------------

_PROBE_POINTS = (np.array([0.0, 0.7, -1.3, 2.1, 0.3]), np.array([0.0, -1.3, 0.4, 1.7, 2.9]))


@dataclass(frozen=True)
class MtildeLump:
    """The lump rescaled to solve mtilde(D) zeta + zeta^2 = 0: (x, y) -> zeta*(b x, b y)."""

    family: LumpFamily
    kp_coefficient: float
    scale: float
    exponent: float
    check_residual: float

    def __call__(self, x: ArrayLike, y: ArrayLike, a: int = 0, b: int = 0) -> ArrayLike:
        s = self.scale
        return s ** (a + b) * self.family.zeta(s * np.asarray(x), s * np.asarray(y), a, b)

    def residual(self, x: ArrayLike, y: ArrayLike) -> ArrayLike:
        """d_x^2(zeta - a zeta_xx + zeta^2) + zeta_yy for the rescaled lump."""
        return _mtilde_residual(self.family, self.kp_coefficient, self.scale, x, y)


def _mtilde_residual(family: LumpFamily, a: float, s: float, x: ArrayLike, y: ArrayLike) -> ArrayLike:
    X, Y = s * np.asarray(x), s * np.asarray(y)
    z = family.zeta(X, Y)
    zx = s * family.zeta(X, Y, 1, 0)
    zxx = s**2 * family.zeta(X, Y, 2, 0)
    zyy = s**2 * family.zeta(X, Y, 0, 2)
    zxxxx = s**4 * family.zeta(X, Y, 4, 0)
    return zxx - a * zxxxx + 2.0 * z * zxx + 2.0 * zx * zx + zyy


def lump_for_mtilde(k_index: int, p: SymbolParams) -> MtildeLump:
    """Rescale zeta_k* into the mtilde frame, picking the scaling exponent by residual.

    Both readings b = a^(-1/2) and b = a^(1/2) of the rescaling are checked at a
    few points and the one that solves the equation is kept.
    """
    family = lump_family(k_index)
    a = p.kp_coefficient
    scale_of_z = float(np.max(np.abs(family.zeta(*_PROBE_POINTS, 2, 0))))
    best: tuple[float, float, float] | None = None
    for exponent in (-0.5, 0.5):
        s = a**exponent
        res = float(np.max(np.abs(_mtilde_residual(family, a, s, *_PROBE_POINTS))))
        if best is None or res < best[2]:
            best = (exponent, s, res)
    exponent, scale, res = best
    if res > 1e-9 * max(1.0, scale_of_z):
        logger.warning("no scaling exponent solves the mtilde equation (residual %.3g)", res)
    logger.debug("mtilde lump k=%d: exponent %+.1f, b=%.6f, residual %.2e", k_index, exponent, scale, res)
    return MtildeLump(family, a, scale, exponent, res)


# ----------------------------------------------------------------------
# Grid samplers
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class LumpSample:
    field: Field
    removed_energy_fraction: float


def sample_lump(grid: Grid, k_index: int, frame: Frame, p: SymbolParams) -> LumpSample:
    """Sample the mtilde-frame lump and project onto admissible modes.

    In the physical frame the sample is u(x, y) = eps^2 zeta(eps x, eps^2 y).
    """
    lump = lump_for_mtilde(k_index, p)
    xx, yy = grid.mesh
    if frame is Frame.KP_SCALED:
        values = lump(xx, yy)
    else:
        eps = p.epsilon
        if eps <= 0:
            raise ParameterMismatchError("a physical-frame lump sample needs epsilon > 0")
        values = eps**2 * lump(eps * xx, eps**2 * yy)
    raw = transform(Field.from_samples(grid, values, frame), Direction.FORWARD)
    projected = project_admissible(raw)
    total = float(np.sum(np.abs(raw.coefficients) ** 2))
    kept = float(np.sum(np.abs(projected.coefficients) ** 2))
    removed = (total - kept) / total if total > 0 else 0.0
    logger.debug("sampled lump k=%d on %s: removed energy fraction %.3e", k_index, grid.shape, removed)
    return LumpSample(projected, removed)
