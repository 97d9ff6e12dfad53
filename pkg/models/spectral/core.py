from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Union

import numpy as np

from backend.data_schema.models import SymbolParams
from models.errors import GridError, ParameterMismatchError, RepresentationError, SymbolError

logger = logging.getLogger(__name__)

SymbolFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]
Multiplier = Union[np.ndarray, SymbolFunction]


class Frame(str, enum.Enum):
    """Coordinates a field's samples are read in."""

    PHYSICAL = "physical"
    KP_SCALED = "kp_scaled"


class Direction(str, enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


class Side(str, enum.Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"


class NormTag(str, enum.Enum):
    L2 = "L2"
    YR = "Yr"
    EPS_SCALED = "EpsScaled"
    X = "X"
    Z = "Z"


@dataclass(frozen=True)
class NormKind:
    """Norm selector; ``order`` is r for Yr and s for X/Z (None means params.sobolev_s)."""

    tag: NormTag
    order: Optional[float] = None

    @classmethod
    def l2(cls) -> NormKind:
        return cls(NormTag.L2)

    @classmethod
    def yr(cls, r: float) -> NormKind:
        return cls(NormTag.YR, float(r))

    @classmethod
    def eps_scaled(cls) -> NormKind:
        return cls(NormTag.EPS_SCALED)

    @classmethod
    def x(cls, s: Optional[float] = None) -> NormKind:
        return cls(NormTag.X, s)

    @classmethod
    def z(cls, s: Optional[float] = None) -> NormKind:
        return cls(NormTag.Z, s)

    @property
    def home_frame(self) -> Frame:
        return Frame.KP_SCALED if self.tag is NormTag.YR else Frame.PHYSICAL


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


# ----------------------------------------------------------------------
# Grid
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    """Periodic box [-L_x, L_x) x [-L_y, L_y) with its wavenumber lattice.

    Arrays are indexed ``[i, j]`` with i along x; spectral arrays use numpy's
    FFT ordering.
    """

    half_width_x: float
    half_width_y: float
    points_x: int
    points_y: int

    @property
    def shape(self) -> tuple[int, int]:
        return (self.points_x, self.points_y)

    @property
    def size(self) -> int:
        return self.points_x * self.points_y

    @cached_property
    def dx(self) -> float:
        return 2.0 * self.half_width_x / self.points_x

    @cached_property
    def dy(self) -> float:
        return 2.0 * self.half_width_y / self.points_y

    @cached_property
    def dk1(self) -> float:
        return np.pi / self.half_width_x

    @cached_property
    def dk2(self) -> float:
        return np.pi / self.half_width_y

    @cached_property
    def x(self) -> np.ndarray:
        n = self.points_x
        return _readonly(self.dx * np.arange(-(n // 2), n // 2, dtype=float))

    @cached_property
    def y(self) -> np.ndarray:
        n = self.points_y
        return _readonly(self.dy * np.arange(-(n // 2), n // 2, dtype=float))

    @cached_property
    def mode_index_x(self) -> np.ndarray:
        return _readonly(np.fft.fftfreq(self.points_x, 1.0 / self.points_x).astype(int))

    @cached_property
    def mode_index_y(self) -> np.ndarray:
        return _readonly(np.fft.fftfreq(self.points_y, 1.0 / self.points_y).astype(int))

    @cached_property
    def k1(self) -> np.ndarray:
        return _readonly(self.dk1 * self.mode_index_x)

    @cached_property
    def k2(self) -> np.ndarray:
        return _readonly(self.dk2 * self.mode_index_y)

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        xx, yy = np.meshgrid(self.x, self.y, indexing="ij")
        return _readonly(xx), _readonly(yy)

    @cached_property
    def wave_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        kk1, kk2 = np.meshgrid(self.k1, self.k2, indexing="ij")
        return _readonly(kk1), _readonly(kk2)

    @cached_property
    def retained(self) -> np.ndarray:
        """Modes every operation keeps: no Nyquist row/column, no k1 = 0 with k2 != 0."""
        m1, m2 = np.meshgrid(self.mode_index_x, self.mode_index_y, indexing="ij")
        nyquist = (m1 == -(self.points_x // 2)) | (m2 == -(self.points_y // 2))
        singular = (m1 == 0) & (m2 != 0)
        return _readonly(~nyquist & ~singular)

    @cached_property
    def dealias(self) -> np.ndarray:
        m1, m2 = np.meshgrid(self.mode_index_x, self.mode_index_y, indexing="ij")
        band = (3 * np.abs(m1) < self.points_x) & (3 * np.abs(m2) < self.points_y)
        return _readonly(band & self.retained)

    @cached_property
    def _phase(self) -> np.ndarray:
        # Samples start at -L, so exp(i k L) = (-1)^m aligns coefficients with the
        # continuous transform.
        px = np.where(self.mode_index_x % 2 == 0, 1.0, -1.0)
        py = np.where(self.mode_index_y % 2 == 0, 1.0, -1.0)
        return _readonly(np.outer(px, py))

    @property
    def _scale(self) -> float:
        return self.dx * self.dy / (2.0 * np.pi)

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def dual_cell_area(self) -> float:
        return self.dk1 * self.dk2


def make_grid(L_x: float, L_y: float, N_x: int, N_y: int) -> Grid:
    """Build a grid, rejecting nonpositive lengths and counts that are not powers of two >= 16."""
    if not (L_x > 0 and L_y > 0 and np.isfinite(L_x) and np.isfinite(L_y)):
        raise GridError(f"half widths must be positive, got ({L_x}, {L_y})")
    for name, n in (("N_x", N_x), ("N_y", N_y)):
        if int(n) != n or n < 16 or int(n) & (int(n) - 1):
            raise GridError(f"{name} must be a power of two >= 16, got {n}")
    return Grid(float(L_x), float(L_y), int(N_x), int(N_y))


# ----------------------------------------------------------------------
# Field
# ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Field:
    """A real function on a grid, held as samples and/or spectral coefficients."""

    grid: Grid
    frame: Frame
    samples: Optional[np.ndarray] = None
    coefficients: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.samples is None and self.coefficients is None:
            raise RepresentationError("a field needs samples or coefficients")
        if self.samples is not None:
            s = np.array(self.samples, dtype=float)
            if s.shape != self.grid.shape:
                raise GridError(f"samples shape {s.shape} does not match grid {self.grid.shape}")
            object.__setattr__(self, "samples", _readonly(s))
        if self.coefficients is not None:
            c = np.array(self.coefficients, dtype=complex)
            if c.shape != self.grid.shape:
                raise GridError(
                    f"coefficient shape {c.shape} does not match grid {self.grid.shape}"
                )
            object.__setattr__(self, "coefficients", _readonly(c))

    @classmethod
    def from_samples(cls, grid: Grid, samples: np.ndarray, frame: Frame = Frame.KP_SCALED) -> Field:
        return cls(grid, frame, samples=samples)

    @classmethod
    def from_coefficients(
        cls, grid: Grid, coefficients: np.ndarray, frame: Frame = Frame.KP_SCALED
    ) -> Field:
        return cls(grid, frame, coefficients=coefficients)

    @classmethod
    def zeros(cls, grid: Grid, frame: Frame = Frame.KP_SCALED) -> Field:
        z = np.zeros(grid.shape)
        return cls(grid, frame, samples=z, coefficients=z.astype(complex))

    @property
    def has_samples(self) -> bool:
        return self.samples is not None

    @property
    def has_spectrum(self) -> bool:
        return self.coefficients is not None

    def physical(self) -> np.ndarray:
        """Samples, synthesised from the coefficients when needed."""
        if self.samples is not None:
            return self.samples
        return _backward(self.grid, self.coefficients)

    def spectrum(self) -> np.ndarray:
        if self.coefficients is not None:
            return self.coefficients
        return _forward(self.grid, self.samples)

    def with_frame(self, frame: Frame) -> Field:
        return Field(self.grid, frame, self.samples, self.coefficients)

    def sup(self) -> float:
        return float(np.max(np.abs(self.physical())))

    # arithmetic -------------------------------------------------------

    def _check_compatible(self, other: Field) -> None:
        if other.grid != self.grid or other.frame != self.frame:
            raise ValueError("fields live on different grids or frames")

    def __add__(self, other: Field) -> Field:
        self._check_compatible(other)
        if self.has_samples and other.has_samples and not (self.has_spectrum and other.has_spectrum):
            return Field(self.grid, self.frame, samples=self.samples + other.samples)
        return Field(self.grid, self.frame, coefficients=self.spectrum() + other.spectrum())

    def __sub__(self, other: Field) -> Field:
        return self + (-other)

    def __neg__(self) -> Field:
        return self * -1.0

    def __mul__(self, scalar: float) -> Field:
        s = None if self.samples is None else self.samples * scalar
        c = None if self.coefficients is None else self.coefficients * scalar
        return Field(self.grid, self.frame, s, c)

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> Field:
        return self * (1.0 / scalar)


# ----------------------------------------------------------------------
# Transforms and multipliers
# ----------------------------------------------------------------------


def _forward(grid: Grid, samples: np.ndarray) -> np.ndarray:
    return np.fft.fft2(samples) * (grid._scale * grid._phase)


def _backward(grid: Grid, coefficients: np.ndarray) -> np.ndarray:
    return np.fft.ifft2(coefficients * (grid._phase / grid._scale)).real


def transform(f: Field, direction: Direction) -> Field:
    """Populate the other representation; Parseval holds with weights dx*dy and dk1*dk2."""
    if direction is Direction.FORWARD:
        if f.samples is None:
            raise RepresentationError("forward transform needs physical samples")
        return Field(f.grid, f.frame, f.samples, _forward(f.grid, f.samples))
    if f.coefficients is None:
        raise RepresentationError("backward transform needs spectral coefficients")
    return Field(f.grid, f.frame, _backward(f.grid, f.coefficients), f.coefficients)


def multiplier_table(grid: Grid, sigma: SymbolFunction) -> np.ndarray:
    """Evaluate ``sigma(k1, k2)`` on retained modes; zero elsewhere."""
    kk1, kk2 = grid.wave_mesh
    mask = grid.retained
    table = np.zeros(grid.shape)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        table[mask] = sigma(kk1[mask], kk2[mask])
    _check_finite(grid, table)
    return table


def _check_finite(grid: Grid, table: np.ndarray) -> None:
    bad = ~np.isfinite(table[grid.retained])
    if bad.any():
        kk1, kk2 = grid.wave_mesh
        k1 = kk1[grid.retained][bad][0]
        k2 = kk2[grid.retained][bad][0]
        raise SymbolError(f"symbol is non-finite on {int(bad.sum())} retained modes, e.g. k=({k1}, {k2})")


def apply_multiplier(f: Field, sigma: Multiplier) -> Field:
    """Multiply the spectrum by a symbol (callable or precomputed lattice table)."""
    if callable(sigma):
        table = multiplier_table(f.grid, sigma)
    else:
        table = np.asarray(sigma)
        if table.shape != f.grid.shape:
            raise GridError("multiplier table does not match the grid")
        _check_finite(f.grid, table)
        table = np.where(f.grid.retained, table, 0.0)
    return Field(f.grid, f.frame, coefficients=f.spectrum() * table)


def project_admissible(f: Field) -> Field:
    """Zero the Nyquist row/column and the k1 = 0, k2 != 0 line."""
    return Field(f.grid, f.frame, coefficients=np.where(f.grid.retained, f.spectrum(), 0.0))


def dealiased_product(f: Field, g: Field) -> Field:
    """Product with 2/3-rule truncation before and after multiplying."""
    f._check_compatible(g)
    band = f.grid.dealias
    fs = _backward(f.grid, np.where(band, f.spectrum(), 0.0))
    gs = fs if g is f else _backward(f.grid, np.where(band, g.spectrum(), 0.0))
    return Field(f.grid, f.frame, coefficients=np.where(band, _forward(f.grid, fs * gs), 0.0))


def pointwise_square(f: Field) -> Field:
    return dealiased_product(f, f)


def inner_product(f: Field, g: Field) -> float:
    f._check_compatible(g)
    return float(np.real(np.vdot(f.spectrum(), g.spectrum())) * f.grid.dual_cell_area)


# ----------------------------------------------------------------------
# Norms
# ----------------------------------------------------------------------


def _ratio_squared(k1: np.ndarray, k2: np.ndarray) -> np.ndarray:
    out = np.zeros_like(k1)
    np.divide(k2 * k2, k1 * k1, out=out, where=k1 != 0)
    return out


def norm_weight(kind: NormKind, k1: np.ndarray, k2: np.ndarray, params: SymbolParams) -> np.ndarray:
    """Squared-norm weight of ``kind`` in its home frame."""
    t2 = _ratio_squared(k1, k2)
    if kind.tag is NormTag.L2:
        return np.ones_like(k1)
    if kind.tag is NormTag.YR:
        return (1.0 + k1 * k1 + t2) ** kind.order
    if kind.tag is NormTag.EPS_SCALED:
        eps2 = params.epsilon**2
        return 1.0 + (k1 * k1 + t2) / eps2
    s = params.sobolev_s if kind.order is None else kind.order
    modulus = np.sqrt(k1 * k1 + k2 * k2)
    if kind.tag is NormTag.X:
        return 1.0 + t2 + t2 * k2 * k2 + modulus ** (2.0 * s)
    # Z: |k|^(2s-3) has a positive exponent, so the k = 0 value is 0.
    return 1.0 + modulus + k1 * k1 * modulus ** (2.0 * s - 3.0)


def _check_kind(kind: NormKind, params: SymbolParams) -> None:
    if kind.tag is NormTag.YR and (kind.order is None or kind.order < 0):
        raise ParameterMismatchError(f"Yr needs r >= 0, got {kind.order}")
    if kind.tag in (NormTag.X, NormTag.Z):
        s = params.sobolev_s if kind.order is None else kind.order
        if not 1.5 < s < 2.0 or not 1.0 + params.theta < s:
            raise ParameterMismatchError(f"Sobolev index {s} outside (max(3/2, 1+theta), 2)")
    if kind.tag is NormTag.EPS_SCALED and params.epsilon <= 0:
        raise ParameterMismatchError("EpsScaled norm needs epsilon > 0")


def norm(f: Field, kind: NormKind, params: SymbolParams) -> float:
    """Discrete quadrature of the norm, converting frames by the KP scaling when needed."""
    _check_kind(kind, params)
    grid = f.grid
    mask = grid.retained
    kk1, kk2 = grid.wave_mesh
    k1, k2 = kk1[mask], kk2[mask]
    energy = np.abs(f.spectrum()[mask]) ** 2
    factor = 1.0
    if f.frame != kind.home_frame:
        eps = params.epsilon
        if eps <= 0:
            raise ParameterMismatchError(
                f"converting a {f.frame.value} field to a {kind.tag.value} norm needs epsilon > 0"
            )
        if f.frame is Frame.KP_SCALED:
            k1, k2, factor = eps * k1, eps * eps * k2, eps
        else:
            k1, k2, factor = k1 / eps, k2 / (eps * eps), 1.0 / eps
    weight = norm_weight(kind, k1, k2, params)
    return float(np.sqrt(factor * grid.dual_cell_area * np.sum(weight * energy)))


# ----------------------------------------------------------------------
# Cone projections and symmetry
# ----------------------------------------------------------------------


def cone_mask(grid: Grid, frame: Frame, params: SymbolParams) -> np.ndarray:
    """Lattice indicator of the cone (chi in physical, chi_eps in KP-scaled frame)."""
    kk1, kk2 = grid.wave_mesh
    origin = (kk1 == 0) & (kk2 == 0)
    if frame is Frame.PHYSICAL:
        bound = params.delta
    elif params.epsilon == 0:
        return grid.retained.copy()
    else:
        bound = params.delta / params.epsilon
    inside = (np.abs(kk1) <= bound) & (np.abs(kk2) <= bound * np.abs(kk1)) & (kk1 != 0)
    return (inside | origin) & grid.retained


def project_cone(f: Field, side: Side, params: SymbolParams) -> Field:
    """Inside keeps cone modes; Outside keeps the complement, so the two sum to f exactly."""
    mask = cone_mask(f.grid, f.frame, params)
    if side is Side.OUTSIDE:
        mask = ~mask
    return Field(f.grid, f.frame, coefficients=np.where(mask, f.spectrum(), 0.0))


def _reflect(a: np.ndarray, axis: int) -> np.ndarray:
    # sample index i sits at (i - N/2) h, so x -> -x is i -> (N - i) mod N
    return np.roll(np.flip(a, axis=axis), 1, axis=axis)


def symmetrize(f: Field) -> Field:
    """Average over the four reflections (+-x, +-y)."""
    s = f.physical()
    rx = _reflect(s, 0)
    return Field(f.grid, f.frame, samples=0.25 * (s + rx + _reflect(s, 1) + _reflect(rx, 1)))


def asymmetry(f: Field) -> float:
    s = f.physical()
    scale = float(np.max(np.abs(s)))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(s - symmetrize(f).samples))) / scale


def physical_image(f: Field, epsilon: float) -> Field:
    """The physical field u(x, y) = eps^2 zeta(eps x, eps^2 y) on the stretched grid."""
    if f.frame is not Frame.KP_SCALED:
        raise ParameterMismatchError("physical_image expects a KP-scaled field")
    if epsilon <= 0:
        raise ParameterMismatchError("physical_image needs epsilon > 0")
    g = f.grid
    stretched = Grid(g.half_width_x / epsilon, g.half_width_y / epsilon**2, g.points_x, g.points_y)
    return Field(stretched, Frame.PHYSICAL, samples=epsilon**2 * f.physical())
