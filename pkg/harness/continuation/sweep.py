from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np

from backend.data_schema.models import (
    NewtonDiagnostics,
    SolverConfig,
    SweepRecord,
    SweepReport,
    SymbolParams,
)
from harness.evaluation.estimates import REQUIRED_ESTIMATES, measure_estimates, verify_estimate
from models.errors import ConvergenceError, InsufficientDataError, SymbolError
from models.lumps.lumps import lump_for_mtilde, sample_lump
from models.reduction.solver import IterationLog, ReductionSolver, fdkp_residual
from models.spectral.core import Field, Frame, Grid, NormKind, asymmetry, norm

logger = logging.getLogger(__name__)

RELATIVE_RESIDUAL_CEILING = 1e-8
SYMMETRY_CEILING = 1e-12
MAX_BISECTIONS = 4


def approximation_error(u: Field, epsilon: float, k_index: int, p: SymbolParams) -> float:
    """sup |u(x, y) - eps^2 zeta*(eps x, eps^2 y)| / eps^2 against the mtilde-frame lump."""
    lump = lump_for_mtilde(k_index, p)
    xx, yy = u.grid.mesh
    if u.frame is Frame.KP_SCALED:
        return float(np.max(np.abs(u.physical() - lump(xx, yy))))
    reference = epsilon**2 * lump(epsilon * xx, epsilon**2 * yy)
    return float(np.max(np.abs(u.physical() - reference))) / epsilon**2


def solve_by_continuation(
    grid: Grid,
    params: SymbolParams,
    config: SolverConfig,
    target: float,
    start: Field,
    start_epsilon: float = 0.0,
    log: Optional[IterationLog] = None,
    depth: int = MAX_BISECTIONS,
) -> tuple[ReductionSolver, Field, NewtonDiagnostics]:
    """Newton at ``target`` seeded with ``start``, the solution at ``start_epsilon``.

    When Newton fails the epsilon step is halved: the midpoint is solved first
    and its solution seeds the second half. ``start_epsilon`` 0 stands for the
    lump itself.
    """
    solver = ReductionSolver(grid, params.with_epsilon(target), config, log)
    try:
        zeta, diag = solver.newton_solve(start)
        return solver, zeta, diag
    except ConvergenceError as exc:
        if depth <= 0 or target == start_epsilon:
            raise
        middle = 0.5 * (start_epsilon + target)
        logger.warning(
            "eps=%.4g did not converge from eps=%.4g (%s); stepping through eps=%.4g",
            target,
            start_epsilon,
            exc.diagnostics.get("reason"),
            middle,
        )
    _, bridge, _ = solve_by_continuation(grid, params, config, middle, start, start_epsilon, log, depth - 1)
    return solve_by_continuation(grid, params, config, target, bridge, middle, log, depth - 1)


def run_sweep(
    k_index: int,
    epsilons: Sequence[float],
    params: SymbolParams,
    config: SolverConfig,
    grid: Grid,
    log: Optional[IterationLog] = None,
) -> SweepReport:
    """Solve, reassemble and measure at each epsilon; failures are recorded, not raised.

    Points are solved from the smallest epsilon up, each seeded with the last
    converged solution. Estimates and distances are measured against the lump.
    """
    eps_list = [float(e) for e in epsilons]
    if any(a <= b for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("sweep epsilons must be strictly decreasing")
    report = SweepReport(k_index=k_index, theta=params.theta)
    if not eps_list:
        return report

    lump = sample_lump(grid, k_index, Frame.KP_SCALED, params).field
    start, start_eps = lump, 0.0
    by_epsilon: dict[float, SweepRecord] = {}
    for eps in reversed(eps_list):
        record, zeta = _solve_point(k_index, eps, params, config, grid, lump, start, start_eps, log)
        by_epsilon[eps] = record
        if zeta is not None:
            start, start_eps = zeta, eps
    report = SweepReport(k_index=k_index, theta=params.theta, records=[by_epsilon[e] for e in eps_list])
    _aggregate(report)
    return report


# ----------------------------------------------------------------------
# Private helpers
# ----------------------------------------------------------------------


def _solve_point(
    k_index: int,
    eps: float,
    params: SymbolParams,
    config: SolverConfig,
    grid: Grid,
    lump: Field,
    start: Field,
    start_eps: float,
    log: Optional[IterationLog],
) -> tuple[SweepRecord, Optional[Field]]:
    p = params.with_epsilon(eps)
    logger.info("sweep point eps=%.4g, k=%d", eps, k_index)
    try:
        solver, zeta, newton = solve_by_continuation(grid, params, config, eps, start, start_eps, log)
        wave = solver.assemble_solution(zeta)
        residual = fdkp_residual(wave.u, wave.speed, p)
        _, reduced = solver.reduced_residual(zeta)
        _, u2_diag = solver.solve_u2(solver.project_iterate(lump))
        estimates = measure_estimates(solver, lump)
    except (ConvergenceError, SymbolError) as exc:
        logger.warning("sweep point eps=%.4g failed: %s", eps, exc)
        return SweepRecord(epsilon=eps, status="failed", failure_reason=str(exc)), None

    record = SweepRecord(
        epsilon=eps,
        newton_steps=newton.steps,
        reduced_residual=reduced,
        full_residual_l2=residual.l2,
        full_residual_z=residual.z,
        relative_residual=residual.relative,
        speed=wave.speed,
        approx_error_sup=approximation_error(wave.u, eps, k_index, p),
        y1theta_distance=norm(zeta - lump, NormKind.yr(1.0 + p.theta), p),
        u2_sup_ratio=eps**2 * wave.u2.sup() / eps**3,
        contraction_factor=u2_diag.contraction_factor,
        contraction_ok=u2_diag.contraction_ok,
        u2_method=u2_diag.method,
        asymmetry=asymmetry(wave.u),
        estimates=estimates,
        estimate_ratios={
            name: s.quantity / s.normaliser for name, s in estimates.items()
        },
        warnings=[*newton.warnings, *u2_diag.warnings],
    )
    return record, zeta


def _strictly_decreasing(values: list[float]) -> bool:
    return all(a > b for a, b in zip(values, values[1:]))


def _aggregate(report: SweepReport) -> None:
    ok = [r for r in report.records if r.status == "ok"]
    criteria = report.criteria
    criteria["all_points_converged"] = len(ok) == len(report.records)
    logger.info("largest converged epsilon: %s", report.largest_converged_epsilon)
    for r in report.weak_contraction:
        logger.warning("u2 contraction factor %.3f at eps=%.4g (method %s)", r.contraction_factor, r.epsilon, r.u2_method)
    if ok:
        criteria["relative_residual"] = all(r.relative_residual <= RELATIVE_RESIDUAL_CEILING for r in ok)
        criteria["symmetric"] = all(r.asymmetry <= SYMMETRY_CEILING for r in ok)
        criteria["speed"] = all(r.speed == 1.0 - r.epsilon**2 for r in ok)
    if len(ok) >= 2:
        errors = [r.approx_error_sup for r in ok]
        criteria["approx_error_decreasing"] = _strictly_decreasing(errors)
        criteria["approx_error_halved"] = errors[-1] <= 0.5 * errors[0]
        criteria["y1theta_decreasing"] = _strictly_decreasing([r.y1theta_distance for r in ok])

    names = ok[0].estimates.keys() if ok else []
    for name in names:
        try:
            result = verify_estimate(name, report)
        except InsufficientDataError:
            continue
        if result.exponent_fit is not None:
            report.fitted_exponents[name] = result.exponent_fit
        if name in REQUIRED_ESTIMATES:
            criteria[f"estimate:{name}"] = result.passed
