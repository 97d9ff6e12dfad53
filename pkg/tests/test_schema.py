"""Tests for Pydantic schema models."""
from __future__ import annotations

import pytest
from pydantic import ValidationError

from backend.data_schema.models import (
    SCHEMA_VERSION,
    Config,
    SolverConfig,
    SweepRecord,
    SweepReport,
    SymbolParams,
)
from models.spectral.core import Grid


class TestSymbolParams:
    def test_defaults(self, params):
        assert params.beta == 2.0
        assert params.delta == 0.5
        assert params.theta == 0.75
        assert params.kp_coefficient == pytest.approx(5.0 / 6.0)

    def test_weak_tension_rejected(self):
        with pytest.raises(ValidationError):
            SymbolParams(beta=0.2)

    def test_sobolev_index_must_exceed_one_plus_theta(self):
        with pytest.raises(ValidationError):
            SymbolParams(theta=0.95, sobolev_s=1.9)

    def test_epsilon_below_epsilon_0(self):
        with pytest.raises(ValidationError):
            SymbolParams(epsilon=0.3)

    def test_frozen_and_hashable(self, params):
        with pytest.raises(ValidationError):
            params.beta = 3.0
        assert hash(params) == hash(SymbolParams())

    def test_with_epsilon(self, params):
        assert params.with_epsilon(0.05).epsilon == 0.05
        assert params.epsilon == 0.1

    def test_small_amplitude_regime(self, params):
        assert not params.in_small_amplitude_regime
        assert params.with_epsilon(1e-4).in_small_amplitude_regime

    def test_unchecked_skips_validation(self):
        assert SymbolParams.unchecked(beta=0.2).beta == 0.2


class TestConfig:
    def test_defaults(self):
        config = Config()
        assert config.epsilons == [0.2, 0.1, 0.05, 0.025]
        assert config.k_index == 1
        assert config.grid_shape() == (100.0, 100.0, 512, 512)
        assert config.probe_levels == [(20.0, 128), (20.0, 256)]

    def test_module_views(self):
        config = Config(beta=3.0, newton_tol=1e-8)
        assert config.symbol_params().beta == 3.0
        assert config.symbol_params(0.05).epsilon == 0.05
        assert config.solver_config() == SolverConfig(newton_tol=1e-8)

    def test_grid(self):
        grid = Config(half_width_x=30.0, half_width_y=30.0, points_x=64, points_y=64).grid()
        assert isinstance(grid, Grid)
        assert grid.shape == (64, 64)

    def test_probe_grids(self):
        grids = Config(probe_levels=[(20.0, 32), (20.0, 64)]).probe_grids()
        assert [g.points_x for g in grids] == [32, 64]

    def test_unknown_key(self):
        with pytest.raises(ValidationError):
            Config(betaa=2.0)

    def test_points_must_be_powers_of_two(self):
        with pytest.raises(ValidationError):
            Config(points_x=100)

    def test_epsilons_must_decrease(self):
        with pytest.raises(ValidationError):
            Config(epsilons=[0.1, 0.2])

    def test_sweep_epsilon_checked_against_epsilon_0(self):
        with pytest.raises(ValidationError, match="epsilon"):
            Config(epsilons=[0.3, 0.1])


class TestSweepReport:
    def test_records_must_decrease(self):
        with pytest.raises(ValidationError):
            SweepReport(records=[SweepRecord(epsilon=0.1), SweepRecord(epsilon=0.2)])

    def test_passed_requires_every_criterion(self):
        report = SweepReport(criteria={"a": True, "b": False})
        assert not report.passed
        report.criteria["b"] = True
        assert report.passed

    def test_schema_version(self):
        assert SweepReport().schema_version == SCHEMA_VERSION

    def test_largest_converged_epsilon_skips_failures(self):
        report = SweepReport(
            records=[SweepRecord(epsilon=0.2, status="failed"), SweepRecord(epsilon=0.1), SweepRecord(epsilon=0.05)]
        )
        assert report.largest_converged_epsilon == 0.1
        assert SweepReport().largest_converged_epsilon is None

    def test_weak_contraction_lists_converged_points_only(self):
        report = SweepReport(
            records=[
                SweepRecord(epsilon=0.2, contraction_factor=0.95, contraction_ok=False, u2_method="picard"),
                SweepRecord(epsilon=0.1, contraction_factor=0.4),
                SweepRecord(epsilon=0.05, status="failed", contraction_ok=False),
            ]
        )
        assert [r.epsilon for r in report.weak_contraction] == [0.2]
        restored = SweepReport.model_validate_json(report.model_dump_json())
        assert restored.records[0].contraction_ok is False
        assert restored.records[0].u2_method == "picard"

    def test_json_round_trip(self, synthetic_report):
        restored = SweepReport.model_validate_json(synthetic_report.model_dump_json())
        assert restored == synthetic_report
