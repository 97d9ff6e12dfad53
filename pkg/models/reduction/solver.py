from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Any, NamedTuple, Optional

import numpy as np
from scipy.optimize import NoConvergence, newton_krylov
from scipy.sparse.linalg import LinearOperator, gmres

from backend.data_schema.models import NewtonDiagnostics, SolverConfig, SymbolParams, U2Diagnostics
from models.errors import ConvergenceError, SymbolError
from models.spectral.core import (
    Field,
    Frame,
    Grid,
    NormKind,
    Side,
    apply_multiplier,
    cone_mask,
    dealiased_product,
    norm,
    pointwise_square,
    project_admissible,
    project_cone,
    symmetrize,
)
from models.symbols.symbols import symbol_table

logger = logging.getLogger(__name__)

_L2 = NormKind.yr(0.0)
_X = NormKind.x()
_EPS = NormKind.eps_scaled()

# amplitude steps of the u2 fallback when newton_krylov fails from the direct guess
U2_HOMOTOPY_FRACTIONS = (0.25, 0.5, 0.75, 1.0)


class IterationLog:
    """In-memory record of solver iterations, dumpable as JSON lines."""

    def __init__(self) -> None:
        self.records: list[dict[str, Any]] = []

    def record(self, stage: str, step: int, **values: Any) -> None:
        entry = {"stage": stage, "step": step, **values}
        self.records.append(entry)
        logger.debug("%s", entry)

    def write_jsonl(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w") as fh:
            for entry in self.records:
                fh.write(json.dumps(entry) + "\n")
        return path


@dataclass(frozen=True)
class ReductionState:
    """Cone split u = u1 + u2 after eliminating the high-frequency part."""

    u1: Field
    u2: Field
    epsilon: float
    diagnostics: U2Diagnostics


@dataclass(frozen=True)
class AssembledWave:
    """Full solitary wave in KP units: physical u(x, y) = eps^2 * u_kp(eps x, eps^2 y)."""

    u: Field
    u2: Field
    speed: float
    epsilon: float

    def amplitude(self) -> np.ndarray:
        """Physical wave height at the stored sample points."""
        return self.epsilon**2 * self.u.physical()

    def physical_coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        xx, yy = self.u.grid.mesh
        return xx / self.epsilon, yy / self.epsilon**2


class ResidualNorms(NamedTuple):
    l2: float
    z: float
    relative: float


@dataclass(frozen=True)
class _Linearisation:
    zeta: Field
    u2: Field
    s: Field
    residual: Field
    residual_norm: float


class ReductionSolver:
    """Cone reduction of the steady FDKP equation on one KP-scaled grid.

    Fields are KP-scaled and in zeta units: u_i(x, y) = eps^2 zeta_i(eps x, eps^2 y).
    Physical-frame operators act through the substituted symbols, so the
    scaling is exact bookkeeping.
    """

    def __init__(
        self,
        grid: Grid,
        params: SymbolParams,
        config: Optional[SolverConfig] = None,
        log: Optional[IterationLog] = None,
    ) -> None:
        self.grid = grid
        self.params = params
        self.config = config or SolverConfig()
        self.log = log or IterationLog()
        self._warned_ball = False
        if params.epsilon > 0 and not params.in_small_amplitude_regime:
            logger.info(
                "epsilon=%.4g is above M^-2=%.3g; running outside the proven regime",
                params.epsilon,
                params.ball_M**-2,
            )

    # ------------------------------------------------------------------
    # Lattice tables
    # ------------------------------------------------------------------

    @cached_property
    def _cone(self) -> np.ndarray:
        return cone_mask(self.grid, Frame.KP_SCALED, self.params)

    @cached_property
    def _u2_gain(self) -> np.ndarray:
        """-eps^2 / n_eps on retained modes outside the cone."""
        eps2 = self.params.epsilon**2
        if eps2 == 0.0:
            return np.zeros(self.grid.shape)
        n_eps = symbol_table(self.grid, self.params, "n_eps")
        outside = self.grid.retained & ~self._cone
        if outside.any():
            smallest = float(np.min(n_eps[outside]))
            if smallest < 1e-10:
                raise SymbolError(f"n_eps={smallest:.3g} outside the cone; -n^-1 is unsafe")
        gain = np.zeros(self.grid.shape)
        gain[outside] = -eps2 / n_eps[outside]
        return gain

    @cached_property
    def _resolvent(self) -> np.ndarray:
        return symbol_table(self.grid, self.params, "resolvent")

    @cached_property
    def _mtilde_inv(self) -> np.ndarray:
        return symbol_table(self.grid, self.params, "mtilde_inv")

    @property
    def cone_is_identity(self) -> bool:
        return bool(np.array_equal(self._cone, self.grid.retained))

    # ------------------------------------------------------------------
    # High-frequency component
    # ------------------------------------------------------------------

    def f_map(self, u1: Field, u2: Field) -> Field:
        """-eps^2 n_eps^-1 (1 - chi_eps)(u2 + (u1 + u2)^2), supported outside the cone."""
        rhs = u2 + pointwise_square(u1 + u2)
        return apply_multiplier(rhs, self._u2_gain)

    def solve_u2(self, u1: Field, *, tight: bool = False, start: Optional[Field] = None) -> tuple[Field, U2Diagnostics]:
        """Picard iteration u2 <- F(u1, u2) from u2 = 0.

        ``tight`` keeps iterating below ``fixed_point_tol`` until the increments
        reach roundoff; finite-difference derivatives need that accuracy.
        """
        cfg = self.config
        p = self.params
        diag = U2Diagnostics()
        u1_norm = norm(u1, _EPS, p) if p.epsilon > 0 else 0.0
        diag.u1_eps_norm = u1_norm
        if u1_norm > 1.0:
            message = f"|u1|_eps = {u1_norm:.3g} lies outside the unit ball"
            diag.warnings.append(message)
            if not self._warned_ball:
                logger.warning(message)
                self._warned_ball = True

        u2 = start if start is not None else Field.zeros(self.grid)
        try:
            u2, increments = self._picard_u2(u1, u2, tight)
            diag.method = "picard"
        except ConvergenceError as exc:
            if cfg.u2_fallback != "newton_krylov" or exc.diagnostics.get("reason") != "non-contraction":
                raise
            logger.warning("u2 Picard iteration does not contract; falling back to newton_krylov")
            diag.warnings.append("picard non-contraction; newton_krylov fallback")
            diag.contraction_ok = False
            u2 = self._newton_krylov_u2(u1, start)
            increments = exc.diagnostics.get("increments", [])
            diag.method = "newton_krylov"

        diag.iterations = len(increments)
        diag.increments = increments
        diag.contraction_factor = _contraction_factor(increments, cfg.fixed_point_tol)
        if diag.method == "picard" and diag.contraction_factor > cfg.contraction_ceiling:
            diag.contraction_ok = False
            diag.warnings.append(f"contraction factor {diag.contraction_factor:.3f} above ceiling")
            logger.warning("u2 contraction factor %.3f above %.2f", diag.contraction_factor, cfg.contraction_ceiling)
        diag.u2_x_norm = norm(u2, _X, p) if p.epsilon > 0 else 0.0
        if u1_norm > 0 and p.epsilon > 0:
            diag.sigma = diag.u2_x_norm / (p.epsilon * u1_norm**2)
        return u2, diag

    def reduce(self, u1: Field) -> ReductionState:
        u2, diag = self.solve_u2(u1)
        return ReductionState(u1, u2, self.params.epsilon, diag)

    def r_eps(self, u1: Field) -> Field:
        """chi(2 u1 u2 + u2^2) in KP units; its physical L2 norm is the remainder's."""
        u2, _ = self.solve_u2(u1)
        return self._s_from(u1, u2) * self.params.epsilon**2

    def s_eps(self, zeta: Field) -> Field:
        """Scaled remainder S_eps(zeta) = chi_eps(2 zeta u2 + u2^2)."""
        u2, _ = self.solve_u2(zeta, tight=True)
        return self._s_from(zeta, u2)

    def du2_apply(self, u1: Field, v1: Field) -> Field:
        """Finite-difference derivative of the u2 map along v1."""
        base, _ = self.solve_u2(u1, tight=True)
        h = self._fd_step(u1, v1)
        moved, _ = self.solve_u2(u1 + v1 * h, tight=True, start=base)
        return (moved - base) / h

    def dr_apply(self, u1: Field, v1: Field) -> Field:
        """Finite-difference derivative of R_eps along v1 (KP units)."""
        base, _ = self.solve_u2(u1, tight=True)
        h = self._fd_step(u1, v1)
        shifted = u1 + v1 * h
        moved, _ = self.solve_u2(shifted, tight=True, start=base)
        eps2 = self.params.epsilon**2
        return (self._s_from(shifted, moved) - self._s_from(u1, base)) * (eps2 / h)

    # ------------------------------------------------------------------
    # Reduced equation
    # ------------------------------------------------------------------

    def project_iterate(self, zeta: Field) -> Field:
        """Symmetrize and keep the admissible cone modes."""
        return project_cone(symmetrize(zeta), Side.INSIDE, self.params)

    def reduced_residual(self, zeta: Field) -> tuple[Field, float]:
        """zeta + rho_eps (chi_eps zeta^2 + S_eps(zeta)) evaluated at chi_eps zeta."""
        state = self._linearise(zeta)
        return state.residual, state.residual_norm

    def linearization_apply(
        self,
        zeta: Field,
        w: Field,
        *,
        include_ds: bool = True,
        limit: bool = False,
    ) -> Field:
        """w + rho_eps(2 chi_eps(zeta w) + dS[zeta] w); with ``limit`` the eps -> 0 form."""
        if norm(w, _L2, self.params) == 0.0:
            raise ValueError("linearization direction has zero norm")
        if limit:
            zc = project_cone(zeta, Side.INSIDE, self.params)
            wc = project_cone(w, Side.INSIDE, self.params)
            quad = project_cone(dealiased_product(zc, wc), Side.INSIDE, self.params) * 2.0
            return w + apply_multiplier(quad, self._mtilde_inv)
        return self._jvp(self._linearise(zeta), w, include_ds=include_ds)

    def newton_solve(self, zeta0: Field) -> tuple[Field, NewtonDiagnostics]:
        """Damped Newton-Krylov on the reduced equation (or Picard in fidelity mode)."""
        if self.config.reduced_solver == "picard":
            return self.picard_reduced(zeta0)
        cfg = self.config
        diag = NewtonDiagnostics(method="newton", cone_is_identity=self.cone_is_identity)
        if diag.cone_is_identity:
            diag.warnings.append("chi_eps is the identity on this lattice")
            logger.warning("chi_eps acts as the identity at epsilon=%.4g", self.params.epsilon)

        state = self._linearise(self.project_iterate(zeta0))
        n = self.grid.size
        restart = min(cfg.linear_solver_restart, cfg.linear_solver_max_iter)
        outer = max(1, math.ceil(cfg.linear_solver_max_iter / restart))

        for step in range(cfg.newton_max_iter + 1):
            diag.residuals.append(state.residual_norm)
            self.log.record("newton", step, residual=state.residual_norm)
            if state.residual_norm <= cfg.newton_tol:
                diag.converged = True
                break
            if step == cfg.newton_max_iter:
                break

            current = state
            operator = LinearOperator(
                (n, n), matvec=lambda v: self._jvp_vector(current, v), dtype=float
            )
            inner = _Counter()
            delta, info = gmres(
                operator,
                -state.residual.physical().ravel(),
                rtol=cfg.linear_solver_tol,
                atol=0.0,
                restart=restart,
                maxiter=outer,
                M=self._preconditioner(state.zeta),
                callback=inner,
                callback_type="pr_norm",
            )
            diag.krylov_iterations.append(inner.count)
            if info != 0:
                diag.krylov_inexact += 1
                logger.info("Krylov solve inexact at Newton step %d (info=%d)", step, info)

            direction = Field.from_samples(self.grid, delta.reshape(self.grid.shape))
            state, length = self._line_search(state, direction, step)
            diag.step_lengths.append(length)
            diag.steps = step + 1

        diag.quadratic_constant = quadratic_constant(diag.residuals, cfg.newton_tol)
        if not diag.converged:
            raise ConvergenceError(
                f"Newton exhausted {cfg.newton_max_iter} steps at residual {state.residual_norm:.3e}",
                diagnostics={"reason": "exhausted", **diag.model_dump()},
                best=state.zeta,
            )
        logger.info(
            "Newton converged at eps=%.4g in %d steps (residual %.2e)",
            self.params.epsilon,
            diag.steps,
            state.residual_norm,
        )
        return state.zeta, diag

    def picard_reduced(self, zeta0: Field) -> tuple[Field, NewtonDiagnostics]:
        """Plain fixed-point iteration zeta <- -rho_eps(chi_eps zeta^2 + S_eps(zeta))."""
        cfg = self.config
        diag = NewtonDiagnostics(method="picard", cone_is_identity=self.cone_is_identity)
        state = self._linearise(self.project_iterate(zeta0))
        best = state
        growth = 0
        for step in range(cfg.fixed_point_max_iter + 1):
            diag.residuals.append(state.residual_norm)
            self.log.record("picard_reduced", step, residual=state.residual_norm)
            if state.residual_norm <= cfg.newton_tol:
                diag.converged = True
                diag.steps = step
                return state.zeta, diag
            if len(diag.residuals) > 1 and state.residual_norm >= diag.residuals[-2]:
                growth += 1
            else:
                growth = 0
            if growth >= 3:
                break
            if state.residual_norm < best.residual_norm:
                best = state
            state = self._linearise(self.project_iterate(state.zeta - state.residual))
        reason = "divergence" if growth >= 3 else "exhausted"
        raise ConvergenceError(
            f"reduced Picard iteration failed ({reason}) at residual {best.residual_norm:.3e}",
            diagnostics={"reason": reason, **diag.model_dump()},
            best=best.zeta,
        )

    def assemble_solution(self, zeta: Field) -> AssembledWave:
        """u = zeta + u2(zeta) with speed c = 1 - eps^2."""
        u2, _ = self.solve_u2(zeta, tight=True)
        eps = self.params.epsilon
        return AssembledWave(zeta + u2, u2, 1.0 - eps**2, eps)

    # ------------------------------------------------------------------
    # Remainder pieces
    # ------------------------------------------------------------------

    def t_eps(self, zeta: Field) -> tuple[Field, Field]:
        """(rho_eps - 1/mtilde) chi_eps zeta^2 and rho_eps S_eps(zeta)."""
        zc = project_cone(zeta, Side.INSIDE, self.params)
        sq = project_cone(pointwise_square(zc), Side.INSIDE, self.params)
        t1 = apply_multiplier(sq, self._resolvent - self._mtilde_inv)
        t2 = apply_multiplier(self.s_eps(zc), self._resolvent)
        return t1, t2

    def limit_map(self, zeta: Field) -> Field:
        sq = project_cone(pointwise_square(zeta), Side.INSIDE, self.params)
        return apply_multiplier(sq, self._mtilde_inv)

    def g_difference(self, zeta: Field) -> Field:
        """mtilde^-1 (chi_eps((chi_eps zeta)^2) - zeta^2)."""
        zc = project_cone(zeta, Side.INSIDE, self.params)
        cut = project_cone(pointwise_square(zc), Side.INSIDE, self.params)
        return apply_multiplier(cut - pointwise_square(zeta), self._mtilde_inv)

    def split_residuals(self, u1: Field, u2: Field) -> tuple[Field, Field]:
        """Residuals of the cone and complement equations of the split system."""
        eps2 = self.params.epsilon**2
        linear = symbol_table(self.grid, self.params, "n_eps") + eps2
        sq = pointwise_square(u1 + u2) * eps2
        inside = apply_multiplier(u1, linear) + project_cone(sq, Side.INSIDE, self.params)
        outside = apply_multiplier(u2, linear) + project_admissible(
            project_cone(sq, Side.OUTSIDE, self.params)
        )
        return inside, outside

    # ------------------------------------------------------------------
    # Private helpers
    # ------------------------------------------------------------------

    def _picard_u2(self, u1: Field, u2: Field, tight: bool) -> tuple[Field, list[float]]:
        cfg = self.config
        p = self.params
        target = cfg.fixed_point_tol * (1e-3 if tight else 1.0)
        increments: list[float] = []
        rising = 0
        for it in range(1, cfg.fixed_point_max_iter + 1):
            nxt = self.f_map(u1, u2)
            inc = norm(nxt - u2, _X, p) if p.epsilon > 0 else 0.0
            increments.append(inc)
            self.log.record("u2_picard", it, increment=inc)
            u2 = nxt
            if inc <= target:
                return u2, increments
            rising = rising + 1 if len(increments) > 1 and inc >= increments[-2] else 0
            if tight and rising and inc <= cfg.fixed_point_tol:
                # roundoff floor reached below the public tolerance
                return u2, increments
            if rising >= 3:
                raise ConvergenceError(
                    "u2 Picard iteration is not contracting",
                    diagnostics={"reason": "non-contraction", "increments": increments},
                    best=u2,
                )
        raise ConvergenceError(
            f"u2 Picard iteration exhausted {cfg.fixed_point_max_iter} steps",
            diagnostics={"reason": "exhausted", "increments": increments},
            best=u2,
        )

    def _newton_krylov_u2(self, u1: Field, start: Optional[Field] = None) -> Field:
        """u2 = F(u1, u2) by newton_krylov; marches the amplitude of u1 when the direct solve fails."""
        guess = start if start is not None else Field.zeros(self.grid)
        try:
            return self._newton_krylov_step(u1, guess, 1.0)
        except NoConvergence:
            logger.info("direct newton_krylov u2 solve failed; marching the amplitude of u1")
        guess = Field.zeros(self.grid)
        for fraction in U2_HOMOTOPY_FRACTIONS:
            try:
                guess = self._newton_krylov_step(u1 * fraction, guess, fraction)
            except NoConvergence as exc:
                raise ConvergenceError(
                    f"newton_krylov fallback for u2 did not converge at amplitude fraction {fraction}",
                    diagnostics={"reason": "fallback-failed", "fraction": fraction},
                    best=guess,
                ) from exc
        return guess

    def _newton_krylov_step(self, u1: Field, guess: Field, fraction: float) -> Field:
        shape = self.grid.shape

        def residual(vec: np.ndarray) -> np.ndarray:
            v2 = Field.from_samples(self.grid, vec.reshape(shape))
            return vec - self.f_map(u1, v2).physical().ravel()

        solution = newton_krylov(
            residual,
            guess.physical().ravel(),
            f_tol=self.config.fixed_point_tol,
            maxiter=self.config.fixed_point_max_iter,
            method="lgmres",
        )
        u2 = self.f_map(u1, Field.from_samples(self.grid, solution.reshape(shape)))
        self.log.record("u2_newton_krylov", 0, fraction=fraction, sup=u2.sup())
        return u2

    def _s_from(self, u1: Field, u2: Field) -> Field:
        mixed = dealiased_product(u1 * 2.0 + u2, u2)
        return project_cone(mixed, Side.INSIDE, self.params)

    def _fd_step(self, base: Field, direction: Field) -> float:
        w = norm(direction, _L2, self.params)
        if w == 0.0:
            raise ValueError("finite-difference direction has zero norm")
        z = norm(base, _L2, self.params)
        return self.config.jacobian_fd_step * (z if z > 0 else 1.0) / w

    def _linearise(self, zeta: Field) -> _Linearisation:
        zc = project_cone(zeta, Side.INSIDE, self.params)
        u2, _ = self.solve_u2(zc, tight=True)
        s = self._s_from(zc, u2)
        sq = project_cone(pointwise_square(zc), Side.INSIDE, self.params)
        residual = zeta + apply_multiplier(sq + s, self._resolvent)
        return _Linearisation(zc, u2, s, residual, norm(residual, _L2, self.params))

    def _jvp(self, state: _Linearisation, w: Field, *, include_ds: bool = True) -> Field:
        wc = project_cone(w, Side.INSIDE, self.params)
        term = project_cone(dealiased_product(state.zeta, wc), Side.INSIDE, self.params) * 2.0
        if include_ds and norm(wc, _L2, self.params) > 0.0:
            h = self._fd_step(state.zeta, wc)
            shifted = state.zeta + wc * h
            moved, _ = self.solve_u2(shifted, tight=True, start=state.u2)
            term = term + (self._s_from(shifted, moved) - state.s) / h
        return w + apply_multiplier(term, self._resolvent)

    def _jvp_vector(self, state: _Linearisation, v: np.ndarray) -> np.ndarray:
        if not np.any(v):
            return np.zeros_like(v)
        w = Field.from_samples(self.grid, v.reshape(self.grid.shape))
        return self._jvp(state, w).physical().ravel()

    def _preconditioner(self, zeta: Field) -> Optional[LinearOperator]:
        if self.config.preconditioner == "none":
            return None
        mean = float(np.mean(zeta.physical()))
        denom = np.where(self._cone, 1.0 + 2.0 * mean * self._mtilde_inv, 1.0)
        if np.min(np.abs(denom)) < 0.1:
            return None
        table = np.where(self.grid.retained, 1.0 / denom, 1.0)
        shape = self.grid.shape

        def apply(v: np.ndarray) -> np.ndarray:
            f = Field.from_samples(self.grid, v.reshape(shape))
            return Field.from_coefficients(self.grid, f.spectrum() * table).physical().ravel()

        n = self.grid.size
        return LinearOperator((n, n), matvec=apply, dtype=float)

    def _line_search(self, state: _Linearisation, direction: Field, step: int) -> tuple[_Linearisation, float]:
        length = 1.0
        for halving in range(self.config.max_halvings + 1):
            trial = self._linearise(self.project_iterate(state.zeta + direction * length))
            self.log.record("line_search", step, halving=halving, length=length, residual=trial.residual_norm)
            if trial.residual_norm < state.residual_norm:
                return trial, length
            length *= 0.5
        raise ConvergenceError(
            f"Newton step {step} failed to reduce the residual after full damping",
            diagnostics={"reason": "divergence", "residual": state.residual_norm},
            best=state.zeta,
        )


class _Counter:
    def __init__(self) -> None:
        self.count = 0

    def __call__(self, _: Any) -> None:
        self.count += 1


def _contraction_factor(increments: list[float], tol: float) -> float:
    """Median ratio of successive increments above the roundoff regime."""
    ratios = [
        b / a for a, b in zip(increments, increments[1:]) if a > 100.0 * tol and a > 0.0
    ]
    return float(np.median(ratios)) if ratios else 0.0


def quadratic_constant(residuals: list[float], floor: float = 0.0) -> Optional[float]:
    """Largest r_{n+1} / r_n^2 once r_n < 1e-4.

    Pairs whose predicted next residual r_n^2 sits below ``floor`` are skipped;
    there the iteration has hit roundoff rather than its quadratic regime.
    """
    ks = [b / a**2 for a, b in zip(residuals, residuals[1:]) if 0.0 < a < 1e-4 and a * a > floor]
    return max(ks) if ks else None


# ----------------------------------------------------------------------
# End-to-end residual
# ----------------------------------------------------------------------


def fdkp_residual_field(u: Field, c: float, p: SymbolParams) -> Field:
    """-c u + m(D) u + u^2; KP-scaled fields use m(eps k1, eps^2 k2) and zeta units."""
    if u.frame is Frame.KP_SCALED:
        linear = symbol_table(u.grid, p, "n_eps") + (1.0 - c)
        return apply_multiplier(u, linear) + pointwise_square(u) * p.epsilon**2
    linear = symbol_table(u.grid, p, "n") + (1.0 - c)
    return apply_multiplier(u, linear) + pointwise_square(u)


def fdkp_residual(u: Field, c: float, p: SymbolParams) -> ResidualNorms:
    """Physical L2 and Z norms of the steady FDKP residual, plus L2 relative to |u|."""
    res = fdkp_residual_field(u, c, p)
    l2 = norm(res, NormKind.l2(), p)
    size = norm(u, NormKind.l2(), p)
    return ResidualNorms(l2, norm(res, NormKind.z(), p), l2 / size if size > 0 else 0.0)
