"""Shared pytest fixtures for the FDKP lump tests."""
from __future__ import annotations

import numpy as np
import pytest

from backend.data_schema.models import EstimateSample, SolverConfig, SweepRecord, SweepReport, SymbolParams
from harness.evaluation.estimates import ESTIMATES
from models.lumps.lumps import sample_lump
from models.reduction.solver import ReductionSolver
from models.spectral.core import Field, Frame, Grid, make_grid


@pytest.fixture()
def params() -> SymbolParams:
    return SymbolParams()


@pytest.fixture()
def limit_params(params) -> SymbolParams:
    return params.with_epsilon(0.0)


@pytest.fixture()
def grid() -> Grid:
    # KP-scaled box: the lump has unit width, so 30 half-widths hold its 1/r^2 tail
    return make_grid(30.0, 30.0, 64, 64)


@pytest.fixture()
def tiny_grid() -> Grid:
    return make_grid(10.0, 10.0, 32, 32)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(42)


@pytest.fixture()
def random_field(grid, rng) -> Field:
    return Field.from_samples(grid, rng.standard_normal(grid.shape))


@pytest.fixture()
def lump_seed(grid, params) -> Field:
    return sample_lump(grid, 1, Frame.KP_SCALED, params).field


@pytest.fixture()
def solver_config() -> SolverConfig:
    return SolverConfig(newton_tol=1e-9)


@pytest.fixture()
def solver(grid, params, solver_config) -> ReductionSolver:
    return ReductionSolver(grid, params, solver_config)


def power_law_report(exponent_shift: float = 0.0, epsilons=(0.2, 0.1, 0.05, 0.025)) -> SweepReport:
    """A report whose estimates follow 2 eps^(expected + shift) exactly."""
    records = []
    for eps in epsilons:
        samples = {
            name: EstimateSample(
                quantity=3.0 * 2.0 * eps ** (spec.exponent(0.75) + exponent_shift),
                normaliser=3.0,
            )
            for name, spec in ESTIMATES.items()
        }
        records.append(
            SweepRecord(
                epsilon=eps,
                speed=1.0 - eps**2,
                estimates=samples,
                estimate_ratios={n: s.quantity / s.normaliser for n, s in samples.items()},
            )
        )
    return SweepReport(k_index=1, theta=0.75, records=records, criteria={"speed": True})


@pytest.fixture()
def synthetic_report() -> SweepReport:
    return power_law_report()


@pytest.fixture()
def report_factory():
    return power_law_report
