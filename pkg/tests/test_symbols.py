"""Tests for the dispersion symbols and their lattice tables."""
from __future__ import annotations

import numpy as np
import pytest
from scipy.stats import linregress

from backend.data_schema.models import SymbolParams
from models.errors import SymbolError
from models.spectral.core import Frame
from models.symbols.symbols import (
    cone_indicator,
    dispersion_speed,
    fit_n_lower_bound,
    m_symbol,
    mtilde_inverse,
    mtilde_symbol,
    n_eps_symbol,
    n_symbol,
    resolvent_gap_sup,
    resolvent_symbol,
    symbol_table,
    tanh_ratio,
)


class TestFullSymbol:
    def test_values_at_origin(self, params):
        assert m_symbol((0.0, 0.0), params) == 1.0
        assert n_symbol((0.0, 0.0), params) == 0.0

    def test_singular_line_raises(self, params):
        with pytest.raises(SymbolError):
            m_symbol((0.0, 1.0), params)

    def test_n_is_m_minus_one(self, params, rng):
        k1 = rng.uniform(0.1, 3.0, 50)
        k2 = rng.uniform(-3.0, 3.0, 50)
        np.testing.assert_allclose(n_symbol((k1, k2), params), m_symbol((k1, k2), params) - 1.0, rtol=1e-12)

    def test_n_keeps_relative_accuracy_near_zero(self, params):
        s1 = 1e-5
        assert n_symbol((s1, 0.0), params) == pytest.approx(params.kp_coefficient * s1**2, rel=1e-6)

    def test_tanh_ratio_branches_agree(self):
        below, above = tanh_ratio(0.99e-4), tanh_ratio(1.01e-4)
        assert tanh_ratio(0.0) == 1.0
        assert below == pytest.approx(above, abs=1e-8)

    def test_scalar_in_scalar_out(self, params):
        assert isinstance(m_symbol((0.3, 0.1), params), float)
        assert m_symbol((np.array([0.3]), np.array([0.1])), params).shape == (1,)


class TestKPSymbols:
    def test_mtilde_inverse(self, params, rng):
        k = (rng.uniform(0.1, 5.0, 20), rng.uniform(-5.0, 5.0, 20))
        np.testing.assert_allclose(mtilde_symbol(k, params) * mtilde_inverse(k, params), 1.0, rtol=1e-14)

    def test_scaled_symbol_approaches_kp_symbol(self, params):
        # n(eps k1, eps^2 k2) - eps^2 (mtilde(k) - 1) = O(eps^4)
        k = (0.7, 0.4)
        eps = np.geomspace(1e-2, 1e-1, 6)
        gap = [
            abs(n_eps_symbol(k, params.with_epsilon(e)) - e**2 * (mtilde_symbol(k, params) - 1.0))
            for e in eps
        ]
        slope = np.polyfit(np.log(eps), np.log(gap), 1)[0]
        assert slope >= 3.75

    def test_resolvent_tends_to_mtilde_inverse(self, params):
        k = (0.8, 0.5)
        gaps = [
            abs(resolvent_symbol(k, params.with_epsilon(e)) - mtilde_inverse(k, params))
            for e in (0.1, 0.05, 0.025)
        ]
        assert gaps[1] < 0.3 * gaps[0]
        assert gaps[2] < 0.3 * gaps[1]

    def test_resolvent_needs_positive_epsilon(self, limit_params):
        with pytest.raises(SymbolError):
            resolvent_symbol((1.0, 0.0), limit_params)

    def test_resolvent_gap_sup_decreases(self, params):
        coarse = resolvent_gap_sup(params.with_epsilon(0.1), 0.5)
        fine = resolvent_gap_sup(params.with_epsilon(0.05), 0.5)
        assert 0.0 < fine < coarse

    @pytest.mark.parametrize("weight_power, exponent", [(0.5, 1.0), (0.875, 0.25)])
    def test_resolvent_gap_decay_rate(self, params, weight_power, exponent):
        # weight power (1 + theta)/2 with theta = 0.75 decays like eps^(1 - theta)
        epsilons = [0.1, 0.05, 0.025]
        sups = [resolvent_gap_sup(params.with_epsilon(e), weight_power) for e in epsilons]
        fit = linregress(np.log(epsilons), np.log(sups))
        assert fit.slope >= exponent - 0.25


class TestCone:
    def test_physical_indicator(self, params):
        assert cone_indicator((0.3, 0.1), params)
        assert not cone_indicator((0.3, 0.2), params)
        assert not cone_indicator((0.6, 0.0), params)
        assert cone_indicator((0.0, 0.0), params)
        assert not cone_indicator((0.0, 0.1), params)

    def test_kp_indicator(self, params):
        assert cone_indicator((3.0, 1.0), params, Frame.KP_SCALED)
        assert not cone_indicator((6.0, 0.0), params, Frame.KP_SCALED)

    def test_limit_indicator_is_everything_admissible(self, limit_params):
        assert cone_indicator((1e-3, 100.0), limit_params, Frame.KP_SCALED)
        assert not cone_indicator((0.0, 1.0), limit_params, Frame.KP_SCALED)

    def test_n_lower_bound_is_positive(self, params):
        assert fit_n_lower_bound(params, samples=50) > 0.0


class TestDispersion:
    def test_speed_at_zero(self, params):
        assert dispersion_speed(0.0, params) == 1.0

    def test_strong_tension_curve_increases(self, params):
        c = dispersion_speed(np.linspace(0.0, 10.0, 1000), params)
        assert np.all(np.diff(c) > 0.0)

    def test_weak_tension_curve_dips(self):
        weak = SymbolParams.unchecked(beta=0.2)
        c = dispersion_speed(np.linspace(0.0, 1.0, 100), weak)
        assert c[1] < c[0]


class TestSymbolTable:
    def test_table_is_read_only_and_cached(self, grid, params):
        table = symbol_table(grid, params, "mtilde_inv")
        assert table is symbol_table(grid, params, "mtilde_inv")
        with pytest.raises(ValueError):
            table[0, 0] = 2.0

    def test_zero_off_retained(self, grid, params):
        table = symbol_table(grid, params, "m")
        assert np.all(table[~grid.retained] == 0.0)
        assert table[0, 0] == 1.0

    def test_unknown_name(self, grid, params):
        with pytest.raises(ValueError):
            symbol_table(grid, params, "nope")
