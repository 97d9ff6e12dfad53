from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import pandas as pd

from backend.data_schema.models import Config, SpectralProbeResult
from backend.ingestion.ingestion import OUT_DIR_ENV, ConfigError, load_config
from backend.storage.storage import (
    read_field,
    read_report,
    write_field,
    write_json,
    write_report,
)
from harness.continuation.sweep import RELATIVE_RESIDUAL_CEILING, run_sweep, solve_by_continuation
from harness.evaluation.estimates import ESTIMATES, REQUIRED_ESTIMATES, verify_estimate
from harness.probes.probes import NondegeneracyProbe, dispersion_check
from models.errors import ConvergenceError, InsufficientDataError
from models.lumps.lumps import eval_tau, eval_zeta_star, kp_residual_exact, sample_lump
from models.reduction.solver import IterationLog, fdkp_residual
from models.spectral.core import Field, Frame
from models.symbols.symbols import dispersion_speed

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

LUMP_RESIDUAL_CEILING = 1e-10
LUMP_CHECK_POINTS = 1000
LUMP_CHECK_BOX = 30.0
PROBE_EIGENVALUE_FLOOR = 1e-2

Command = Callable[[Config, Path, argparse.Namespace], bool]


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_lump_check(config: Config, out: Path, args: argparse.Namespace) -> bool:
    """Closed-form lump invariants: exact KP residual, centre values of tau and zeta."""
    rng = np.random.default_rng(config.seed)
    x = rng.uniform(-LUMP_CHECK_BOX, LUMP_CHECK_BOX, LUMP_CHECK_POINTS)
    y = rng.uniform(-LUMP_CHECK_BOX, LUMP_CHECK_BOX, LUMP_CHECK_POINTS)
    residuals = {k: float(np.max(np.abs(kp_residual_exact(k, x, y)))) for k in (1, 2)}
    centre = float(eval_zeta_star(1, 0.0, 0.0))
    tau_centres = {1: float(eval_tau(1, 0.0, 0.0)), 2: float(eval_tau(2, 0.0, 0.0))}
    criteria = {
        "kp_residual_k1": residuals[1] <= LUMP_RESIDUAL_CEILING,
        "kp_residual_k2": residuals[2] <= LUMP_RESIDUAL_CEILING,
        "zeta1_centre": abs(centre + 4.0) <= 1e-12,
        "tau1_centre": tau_centres[1] == 3.0,
        "tau2_centre": tau_centres[2] == 1875.0,
    }
    removed = sample_lump(config.grid(), config.k_index, Frame.KP_SCALED, config.symbol_params())
    write_json(
        {
            "max_kp_residual": residuals,
            "zeta1_centre": centre,
            "tau_centre": tau_centres,
            "removed_energy_fraction": removed.removed_energy_fraction,
            "criteria": criteria,
        },
        out / "lump_check.json",
    )
    for name, ok in criteria.items():
        logger.info("lump-check %s: %s", name, "pass" if ok else "FAIL")
    return all(criteria.values())


def cmd_dispersion(config: Config, out: Path, args: argparse.Namespace) -> bool:
    result = dispersion_check(config.symbol_params(), config.k1_max, config.dispersion_samples)
    write_json(result, out / "dispersion.json")
    return result.status == "pass"


def cmd_solve(config: Config, out: Path, args: argparse.Namespace) -> bool:
    """One solve at (config.epsilon, config.k_index); writes fields and a manifest.

    Newton starts from the lump and falls back to epsilon continuation. On
    failure the best iterate is written before the error propagates.
    """
    p = config.symbol_params()
    grid = config.grid()
    log = IterationLog()
    seed = sample_lump(grid, config.k_index, Frame.KP_SCALED, p).field
    meta = {"epsilon": p.epsilon, "k_index": config.k_index}
    try:
        solver, zeta, newton = solve_by_continuation(grid, p, config.solver_config(), p.epsilon, seed, log=log)
    except ConvergenceError as exc:
        if isinstance(exc.best, Field):
            reason = exc.diagnostics.get("reason")
            write_field(exc.best, out / "best_iterate.bin", {**meta, "quantity": "best_iterate", "reason": reason}, config)
            logger.info("best iterate written to %s", out / "best_iterate.bin")
        raise
    finally:
        log.write_jsonl(out / "iterations.jsonl")
    wave = solver.assemble_solution(zeta)
    residual = fdkp_residual(wave.u, wave.speed, p)

    meta["speed"] = wave.speed
    write_field(wave.u, out / "u.bin", {**meta, "quantity": "u"}, config)
    write_field(zeta, out / "zeta.bin", {**meta, "quantity": "zeta"}, config)
    write_field(wave.u2, out / "u2.bin", {**meta, "quantity": "u2"}, config)
    write_json(
        {
            **meta,
            "newton": newton.model_dump(mode="json"),
            "residual": residual._asdict(),
            "fields": ["u.bin", "zeta.bin", "u2.bin"],
        },
        out / "manifest.json",
    )
    logger.info(
        "solved eps=%.4g k=%d: c=%.15g, relative residual %.3e",
        p.epsilon, config.k_index, wave.speed, residual.relative,
    )
    return newton.converged and residual.relative <= RELATIVE_RESIDUAL_CEILING


def cmd_sweep(config: Config, out: Path, args: argparse.Namespace) -> bool:
    log = IterationLog()
    report = run_sweep(
        config.k_index,
        config.epsilons,
        config.symbol_params(),
        config.solver_config(),
        config.grid(),
        log,
    )
    log.write_jsonl(out / "iterations.jsonl")
    write_report(report, out / "report.json")
    for name, ok in sorted(report.criteria.items()):
        logger.info("sweep %s: %s", name, "pass" if ok else "FAIL")
    return report.passed


def cmd_probe(config: Config, out: Path, args: argparse.Namespace) -> bool:
    """Nondegeneracy of both lumps; passes only when each one does."""
    log = IterationLog()
    grids = config.probe_grids()
    results = {}
    for k in (1, 2):
        probe = NondegeneracyProbe(k, config.symbol_params(), seed=config.seed, log=log)
        results[k] = probe.run(grids)
    log.write_jsonl(out / "iterations.jsonl")
    write_json({str(k): r.model_dump(mode="json") for k, r in results.items()}, out / "probe.json")
    verdicts = {k: _probe_passed(r) for k, r in results.items()}
    for k, ok in verdicts.items():
        logger.info(
            "probe k=%d: smallest |lambda| %.4g, deltas %s: %s",
            k, results[k].smallest_abs_eigenvalue, results[k].refinement_deltas, "pass" if ok else "FAIL",
        )
    return all(verdicts.values())


def cmd_estimates(config: Config, out: Path, args: argparse.Namespace) -> bool:
    """Re-verify the estimate catalogue over a stored sweep report."""
    report = read_report(args.report or out / "report.json")
    results = {}
    for name in ESTIMATES:
        try:
            results[name] = verify_estimate(name, report)
        except InsufficientDataError as exc:
            logger.warning("estimate %s skipped: %s", name, exc)
    write_json({name: r.model_dump(mode="json") for name, r in results.items()}, out / "estimates.json")
    missing = [name for name in REQUIRED_ESTIMATES if name not in results]
    if missing:
        logger.error("required estimates without data: %s", ", ".join(missing))
    return not missing and all(results[name].passed for name in REQUIRED_ESTIMATES)


def cmd_plot_data(config: Config, out: Path, args: argparse.Namespace) -> bool:
    """(x, y, value) tables of both lumps and the (k1, c) dispersion curve."""
    xx, yy = config.grid().mesh
    for k in (1, 2):
        _xy_table(xx, yy, eval_zeta_star(k, xx, yy)).to_csv(out / f"zeta{k}_star.csv", index=False)
    k1 = np.linspace(0.0, config.k1_max, config.dispersion_samples)
    curve = pd.DataFrame({"k1": k1, "c": dispersion_speed(k1, config.symbol_params())})
    curve.to_csv(out / "dispersion_curve.csv", index=False)
    if args.field:
        field = read_field(args.field)
        fx, fy = field.grid.mesh
        _xy_table(fx, fy, field.physical()).to_csv(out / f"{Path(args.field).stem}.csv", index=False)
    return True


COMMANDS: dict[str, Command] = {
    "lump-check": cmd_lump_check,
    "dispersion": cmd_dispersion,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "probe": cmd_probe,
    "estimates": cmd_estimates,
    "plot-data": cmd_plot_data,
}


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fdkp-lumps",
        description="Solitary-wave continuation from KP lumps for the fully dispersive KP equation.",
    )
    parser.add_argument("command", nargs="?", help=f"one of: {', '.join(COMMANDS)}")
    parser.add_argument("--command", dest="command_flag", help="command name (positional wins)")
    parser.add_argument("--config", type=str, default=None, help="Flat JSON config file.")
    parser.add_argument("--out", type=str, default=None, help=f"Output directory (overrides config and ${OUT_DIR_ENV}).")
    parser.add_argument("--log-level", type=str, default="INFO", help="Logging level.")
    parser.add_argument("--report", type=str, default=None, help="Stored report for the estimates command.")
    parser.add_argument("--field", type=str, default=None, help="Stored field to dump with plot-data.")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    command = args.command or args.command_flag
    if command not in COMMANDS:
        parser.print_usage(sys.stderr)
        print(f"fdkp-lumps: unknown or missing command {command!r}", file=sys.stderr)
        return EXIT_USAGE

    fallback_out = Path(args.out or os.environ.get(OUT_DIR_ENV) or "runs")
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        logger.error("invalid configuration: %s", exc)
        _write_failure(fallback_out, command, exc, EXIT_USAGE, key=exc.key)
        return EXIT_USAGE

    out = Path(args.out) if args.out else Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        passed = COMMANDS[command](config, out, args)
    except ConvergenceError as exc:
        logger.error("%s failed to converge: %s", command, exc)
        _write_failure(out, command, exc, EXIT_FAIL, diagnostics=exc.diagnostics)
        return EXIT_FAIL
    except (ValueError, OSError) as exc:
        logger.error("%s aborted: %s", command, exc)
        _write_failure(out, command, exc, EXIT_USAGE)
        return EXIT_USAGE

    if not passed:
        _write_failure(out, command, None, EXIT_FAIL)
        logger.warning("%s: criteria failed", command)
        return EXIT_FAIL
    logger.info("%s: all criteria passed", command)
    return EXIT_PASS


def run() -> None:
    sys.exit(main())


# ---------------------------------------------------------------------------
# Private helpers
# ---------------------------------------------------------------------------


def _probe_passed(result: SpectralProbeResult) -> bool:
    return result.converged and result.stable and result.smallest_abs_eigenvalue >= PROBE_EIGENVALUE_FLOOR


def _xy_table(xx: np.ndarray, yy: np.ndarray, values: np.ndarray) -> pd.DataFrame:
    return pd.DataFrame({"x": xx.ravel(), "y": yy.ravel(), "value": np.asarray(values).ravel()})


def _write_failure(
    out: Path,
    command: str,
    exc: Optional[BaseException],
    exit_code: int,
    **extra: object,
) -> None:
    record = {
        "command": command,
        "exit_code": exit_code,
        "error_type": type(exc).__name__ if exc is not None else "CriterionFailure",
        "message": str(exc) if exc is not None else "one or more criteria failed",
        **extra,
    }
    try:
        write_json(record, out / "failure.json")
    except OSError as io_exc:
        logger.error("could not write failure record: %s", io_exc)


if __name__ == "__main__":
    run()
