from __future__ import annotations

import logging
from typing import Literal, Sequence

import numpy as np
from scipy.sparse.linalg import LinearOperator, minres

from backend.data_schema.models import DispersionCheckResult, SpectralProbeResult, SymbolParams
from models.lumps.lumps import sample_lump
from models.reduction.solver import IterationLog, ReductionSolver
from models.spectral.core import Field, Frame, Grid, asymmetry, project_admissible, symmetrize
from models.symbols.symbols import dispersion_speed, symbol_table

logger = logging.getLogger(__name__)

REFINEMENT_TOLERANCE = 0.1


class NondegeneracyProbe:
    """Smallest-magnitude eigenvalue of I + 2 mtilde^-1(zeta* .) on even-even fields.

    The operator is conjugated by mtilde^(1/2) so it is symmetric, then
    inverted with MINRES inside an inverse iteration.
    """

    def __init__(
        self,
        k_index: int,
        params: SymbolParams,
        potential: Literal["lump", "zero"] = "lump",
        tol: float = 1e-8,
        max_iter: int = 200,
        seed: int = 42,
        log: IterationLog | None = None,
    ) -> None:
        self.k_index = k_index
        self.params = params.with_epsilon(0.0)
        self.potential = potential
        self.tol = tol
        self.max_iter = max_iter
        self.seed = seed
        self.log = log or IterationLog()

    # ------------------------------------------------------------------
    # Public API
    # ------------------------------------------------------------------

    def run(self, grid_levels: Sequence[Grid]) -> SpectralProbeResult:
        eigenvalues: list[float] = []
        iterations: list[int] = []
        asym = 0.0
        converged = True
        for grid in grid_levels:
            lam, vec, steps, ok = self.smallest_eigenvalue(grid)
            eigenvalues.append(lam)
            iterations.append(steps)
            asym = max(asym, asymmetry(vec))
            converged &= ok
            if not ok:
                logger.warning("eigen-iteration did not converge on grid %s", grid.shape)
        deltas = [
            abs(b - a) / abs(a) if a != 0 else float(abs(b - a))
            for a, b in zip(eigenvalues, eigenvalues[1:])
        ]
        smallest = abs(eigenvalues[-1]) if eigenvalues else 0.0
        return SpectralProbeResult(
            k_index=self.k_index,
            smallest_abs_eigenvalue=smallest,
            eigenvalues=eigenvalues,
            eigenvector_asymmetry=asym,
            refinement_deltas=deltas,
            iterations=iterations,
            stable=all(d <= REFINEMENT_TOLERANCE for d in deltas),
            converged=converged,
        )

    def smallest_eigenvalue(self, grid: Grid) -> tuple[float, Field, int, bool]:
        zeta = self._potential(grid)
        solver = ReductionSolver(grid, self.params, log=self.log)
        half = np.sqrt(symbol_table(grid, self.params, "mtilde_inv"))
        inv_half = np.sqrt(symbol_table(grid, self.params, "mtilde"))
        shape, n = grid.shape, grid.size

        def project(v: np.ndarray) -> np.ndarray:
            f = Field.from_samples(grid, v.reshape(shape))
            return project_admissible(symmetrize(f)).physical().ravel()

        def compact(v: np.ndarray) -> np.ndarray:
            # mtilde^(1/2) (A - I) mtilde^(-1/2) v
            c = Field.from_samples(grid, v.reshape(shape)).spectrum()
            w = Field.from_coefficients(grid, c * half)
            if not np.any(w.coefficients):
                return np.zeros(n)
            a_minus_i = solver.linearization_apply(zeta, w, limit=True).spectrum() - w.spectrum()
            return Field.from_coefficients(grid, a_minus_i * inv_half).physical().ravel()

        def apply_b(v: np.ndarray) -> np.ndarray:
            pv = project(v)
            return pv + project(compact(pv))

        operator = LinearOperator((n, n), matvec=apply_b, dtype=float)
        rng = np.random.default_rng(self.seed)
        v = project(rng.standard_normal(n))
        v /= np.linalg.norm(v)
        lam = 1.0
        for step in range(1, self.max_iter + 1):
            x, info = minres(operator, v, rtol=1e-10, maxiter=2000)
            if info != 0:
                logger.info("MINRES inexact in eigen-iteration step %d (info=%d)", step, info)
            x = project(x)
            size = np.linalg.norm(x)
            if size == 0.0:
                break
            v = x / size
            kv = project(compact(v))
            lam = 1.0 + float(v @ kv) / float(v @ v)
            resid = float(np.linalg.norm(v + kv - lam * v))
            self.log.record("eigen", step, eigenvalue=lam, residual=resid, points=grid.points_x)
            if resid <= self.tol * max(1.0, abs(lam)):
                return lam, Field.from_samples(grid, v.reshape(shape)), step, True
        return lam, Field.from_samples(grid, v.reshape(shape)), self.max_iter, False

    # ------------------------------------------------------------------
    # Private helpers
    # ------------------------------------------------------------------

    def _potential(self, grid: Grid) -> Field:
        if self.potential == "zero":
            return Field.zeros(grid)
        return sample_lump(grid, self.k_index, Frame.KP_SCALED, self.params).field


def nondegeneracy_probe(
    k_index: int,
    grid_levels: Sequence[Grid],
    p: SymbolParams,
    potential: Literal["lump", "zero"] = "lump",
) -> SpectralProbeResult:
    return NondegeneracyProbe(k_index, p, potential=potential).run(grid_levels)


def dispersion_check(p: SymbolParams, k1_max: float, samples: int) -> DispersionCheckResult:
    """Scan c(k1) on [0, k1_max]: c(0) = 1 and strictly increasing when beta > 1/3."""
    if k1_max <= 0:
        raise ValueError("k1_max must be positive")
    k1 = np.linspace(0.0, k1_max, samples)
    c = dispersion_speed(k1, p)
    c0 = float(c[0])
    monotone = bool(np.all(np.diff(c) > 0.0))
    applicable = p.beta > 1.0 / 3.0
    if not applicable:
        status = "not_applicable"
    elif c0 == 1.0 and monotone:
        status = "pass"
    else:
        status = "fail"
    logger.info("dispersion check beta=%.4g: c(0)=%.15g, monotone=%s -> %s", p.beta, c0, monotone, status)
    return DispersionCheckResult(
        beta=p.beta,
        k1_max=k1_max,
        samples=samples,
        applicable=applicable,
        c_at_zero=c0,
        monotone=monotone,
        status=status,
    )
