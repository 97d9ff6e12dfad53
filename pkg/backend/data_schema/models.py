from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

SCHEMA_VERSION = 1


def _guess_key(message: str) -> str:
    # Model-level validators carry no location; the message leads with the key.
    for key in ("sobolev_s", "epsilon"):
        if key in message:
            return key
    return "config"


class SymbolParams(BaseModel):
    """Physical and numerical parameters shared by every Fourier multiplier."""

    model_config = ConfigDict(frozen=True)

    beta: float = Field(default=2.0, description="Bond-type surface tension parameter")
    delta: float = Field(default=0.5, gt=0.0, lt=1.0, description="Cone half-width")
    epsilon: float = Field(default=0.1, ge=0.0, description="Amplitude parameter, c = 1 - eps^2")
    epsilon_0: float = Field(default=0.25, gt=0.0, le=1.0)
    theta: float = Field(default=0.75, gt=0.5, lt=1.0)
    sobolev_s: float = Field(default=1.9, gt=1.5, lt=2.0)
    ball_M: float = Field(default=50.0, gt=1.0)

    @field_validator("beta")
    @classmethod
    def beta_in_strong_tension_regime(cls, v: float) -> float:
        if v <= 1.0 / 3.0:
            raise ValueError("beta must exceed 1/3 (strong surface tension regime)")
        return v

    @model_validator(mode="after")
    def check_exponents_and_amplitude(self) -> SymbolParams:
        if not 1.0 + self.theta < self.sobolev_s:
            raise ValueError("sobolev_s must exceed 1 + theta")
        if self.epsilon >= self.epsilon_0:
            raise ValueError(f"epsilon ({self.epsilon}) must be below epsilon_0 ({self.epsilon_0})")
        return self

    # ------------------------------------------------------------------
    # Derived quantities
    # ------------------------------------------------------------------

    @property
    def kp_coefficient(self) -> float:
        """Coefficient a = (beta - 1/3)/2 of D1^2 in the KP symbol."""
        return 0.5 * (self.beta - 1.0 / 3.0)

    @property
    def in_small_amplitude_regime(self) -> bool:
        """True when eps < M^-2, the regime covered by the existence argument."""
        return self.epsilon < self.ball_M ** -2

    def with_epsilon(self, epsilon: float) -> SymbolParams:
        return SymbolParams(**{**self.model_dump(), "epsilon": epsilon})

    @classmethod
    def unchecked(cls, **overrides: Any) -> SymbolParams:
        """Build parameters without validation (negative controls such as KP-II beta)."""
        values = {name: info.default for name, info in cls.model_fields.items()}
        values.update(overrides)
        return cls.model_construct(**values)


class SolverConfig(BaseModel):
    """Tolerances and iteration limits of the reduction solver."""

    model_config = ConfigDict(frozen=True)

    fixed_point_tol: float = Field(default=1e-12, gt=0.0)
    fixed_point_max_iter: int = Field(default=200, ge=1)
    newton_tol: float = Field(default=1e-10, gt=0.0)
    newton_max_iter: int = Field(default=30, ge=1)
    linear_solver_tol: float = Field(default=1e-8, gt=0.0)
    linear_solver_max_iter: int = Field(default=400, ge=1)
    linear_solver_restart: int = Field(default=40, ge=1)
    jacobian_fd_step: float = Field(default=1e-7, gt=0.0)
    max_halvings: int = Field(default=8, ge=0)
    contraction_ceiling: float = Field(default=0.9, gt=0.0, lt=1.0)
    u2_fallback: Literal["newton_krylov", "abort"] = "newton_krylov"
    reduced_solver: Literal["newton", "picard"] = "newton"
    preconditioner: Literal["limit", "none"] = "limit"


class Config(BaseModel):
    """Flat run configuration; every key has a default and unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid")

    # symbol parameters
    beta: float = 2.0
    delta: float = 0.5
    epsilon: float = 0.1
    epsilon_0: float = 0.25
    theta: float = 0.75
    sobolev_s: float = 1.9
    ball_M: float = 50.0

    # solver
    fixed_point_tol: float = 1e-12
    fixed_point_max_iter: int = 200
    newton_tol: float = 1e-10
    newton_max_iter: int = 30
    linear_solver_tol: float = 1e-8
    linear_solver_max_iter: int = 400
    linear_solver_restart: int = 40
    jacobian_fd_step: float = 1e-7
    max_halvings: int = 8
    contraction_ceiling: float = 0.9
    u2_fallback: Literal["newton_krylov", "abort"] = "newton_krylov"
    reduced_solver: Literal["newton", "picard"] = "newton"
    preconditioner: Literal["limit", "none"] = "limit"

    # grid
    half_width_x: float = Field(default=100.0, gt=0.0)
    half_width_y: float = Field(default=100.0, gt=0.0)
    points_x: int = 512
    points_y: int = 512

    # runs
    epsilons: list[float] = Field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    k_index: int = Field(default=1, ge=1, le=2)
    out_dir: str = "runs"
    probe_levels: list[tuple[float, int]] = Field(
        default_factory=lambda: [(20.0, 128), (20.0, 256)],
        description="(half width, points) per refinement level of the nondegeneracy probe",
    )
    k1_max: float = Field(default=10.0, gt=0.0)
    dispersion_samples: int = Field(default=1000, ge=2)
    seed: int = 42

    @field_validator("points_x", "points_y")
    @classmethod
    def power_of_two(cls, v: int) -> int:
        if v < 16 or v & (v - 1):
            raise ValueError("grid point counts must be powers of two >= 16")
        return v

    @field_validator("epsilons")
    @classmethod
    def strictly_decreasing(cls, v: list[float]) -> list[float]:
        if any(e <= 0.0 for e in v):
            raise ValueError("sweep epsilons must be positive")
        if any(a <= b for a, b in zip(v, v[1:])):
            raise ValueError("sweep epsilons must be strictly decreasing")
        return v

    @model_validator(mode="after")
    def check_module_invariants(self) -> Config:
        try:
            self.symbol_params()
            for eps in self.epsilons:
                self.symbol_params(eps)
            self.solver_config()
        except ValidationError as exc:
            first = exc.errors()[0]
            key = ".".join(str(part) for part in first["loc"]) or _guess_key(first["msg"])
            raise ValueError(f"{key}: {first['msg']}") from None
        return self

    # ------------------------------------------------------------------
    # Per-module views
    # ------------------------------------------------------------------

    def symbol_params(self, epsilon: Optional[float] = None) -> SymbolParams:
        keys = SymbolParams.model_fields.keys()
        data = {k: getattr(self, k) for k in keys}
        if epsilon is not None:
            data["epsilon"] = epsilon
        return SymbolParams(**data)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(**{k: getattr(self, k) for k in SolverConfig.model_fields})

    def grid_shape(self) -> tuple[float, float, int, int]:
        return (self.half_width_x, self.half_width_y, self.points_x, self.points_y)

    def grid(self) -> Any:
        """The run grid as a ``models.spectral.Grid``."""
        from models.spectral.core import make_grid

        return make_grid(*self.grid_shape())

    def probe_grids(self) -> list[Any]:
        from models.spectral.core import make_grid

        return [make_grid(L, L, n, n) for L, n in self.probe_levels]


# ----------------------------------------------------------------------
# Solver diagnostics
# ----------------------------------------------------------------------


class U2Diagnostics(BaseModel):
    """Outcome of the high-frequency fixed-point solve."""

    method: Literal["picard", "newton_krylov"] = "picard"
    iterations: int = 0
    increments: list[float] = Field(default_factory=list)
    contraction_factor: float = 0.0
    contraction_ok: bool = True
    sigma: Optional[float] = Field(default=None, description="|u2|_X / (eps |u1|_eps^2)")
    u1_eps_norm: float = 0.0
    u2_x_norm: float = 0.0
    warnings: list[str] = Field(default_factory=list)


class NewtonDiagnostics(BaseModel):
    """Outcome of the reduced-equation solve."""

    method: Literal["newton", "picard"] = "newton"
    converged: bool = False
    steps: int = 0
    residuals: list[float] = Field(default_factory=list)
    step_lengths: list[float] = Field(default_factory=list)
    krylov_iterations: list[int] = Field(default_factory=list)
    krylov_inexact: int = 0
    quadratic_constant: Optional[float] = None
    cone_is_identity: bool = False
    warnings: list[str] = Field(default_factory=list)


# ----------------------------------------------------------------------
# Harness reports
# ----------------------------------------------------------------------


class EstimateSample(BaseModel):
    """One measurement of an estimate: quantity over its epsilon-free normaliser."""

    quantity: float = Field(..., ge=0.0)
    normaliser: float = Field(..., gt=0.0)


class SweepRecord(BaseModel):
    """Diagnostics for one epsilon of a continuation sweep."""

    epsilon: float = Field(..., gt=0.0)
    status: Literal["ok", "failed"] = "ok"
    failure_reason: Optional[str] = None
    newton_steps: int = 0
    reduced_residual: Optional[float] = None
    full_residual_l2: Optional[float] = None
    full_residual_z: Optional[float] = None
    relative_residual: Optional[float] = None
    speed: Optional[float] = None
    approx_error_sup: Optional[float] = None
    y1theta_distance: Optional[float] = None
    u2_sup_ratio: Optional[float] = None
    contraction_factor: Optional[float] = None
    contraction_ok: bool = True
    u2_method: Optional[Literal["picard", "newton_krylov"]] = None
    asymmetry: Optional[float] = None
    estimates: dict[str, EstimateSample] = Field(default_factory=dict)
    estimate_ratios: dict[str, float] = Field(default_factory=dict)
    warnings: list[str] = Field(default_factory=list)


class SweepReport(BaseModel):
    """Per-epsilon records plus global fitted exponents and criteria."""

    schema_version: int = SCHEMA_VERSION
    k_index: int = Field(default=1, ge=1, le=2)
    theta: float = Field(default=0.75, gt=0.5, lt=1.0)
    records: list[SweepRecord] = Field(default_factory=list)
    fitted_exponents: dict[str, float] = Field(default_factory=dict)
    criteria: dict[str, bool] = Field(default_factory=dict)

    @field_validator("records")
    @classmethod
    def epsilons_decreasing(cls, v: list[SweepRecord]) -> list[SweepRecord]:
        eps = [r.epsilon for r in v]
        if any(a <= b for a, b in zip(eps, eps[1:])):
            raise ValueError("sweep records must have strictly decreasing epsilon")
        return v

    @property
    def passed(self) -> bool:
        return all(self.criteria.values())

    @property
    def largest_converged_epsilon(self) -> Optional[float]:
        """Empirical stand-in for epsilon_0."""
        ok = [r.epsilon for r in self.records if r.status == "ok"]
        return max(ok) if ok else None

    @property
    def weak_contraction(self) -> list[SweepRecord]:
        """Converged points whose u2 map contracted by more than the ceiling, or not at all."""
        return [r for r in self.records if r.status == "ok" and not r.contraction_ok]


class EstimateResult(BaseModel):
    """Verdict of one estimate over a sweep."""

    name: str
    exponent_expected: float
    exponent_fit: Optional[float] = Field(..., description="None when a measured quantity vanishes")
    constant_fit: float
    band: float = Field(..., description="max ratio / ratio at the largest epsilon")
    epsilons: list[float]
    ratios: list[float]
    passed: bool


class SpectralProbeResult(BaseModel):
    """Smallest symmetric eigenvalue of the limit linearisation per grid level."""

    k_index: int
    smallest_abs_eigenvalue: float
    eigenvalues: list[float]
    eigenvector_asymmetry: float
    refinement_deltas: list[float] = Field(default_factory=list)
    iterations: list[int] = Field(default_factory=list)
    stable: bool = False
    converged: bool = False


class DispersionCheckResult(BaseModel):
    """Scan of the one-dimensional dispersion curve c(k1)."""

    beta: float
    k1_max: float
    samples: int
    applicable: bool
    c_at_zero: float
    monotone: bool
    status: Literal["pass", "fail", "not_applicable"]
