"""Tests for the closed-form KP lumps and their grid samples."""
from __future__ import annotations

import json

import numpy as np
import pytest

from models.errors import DerivativeOrderError, ParameterMismatchError
from models.lumps.lumps import (
    LumpFamily,
    TauPolynomial,
    eval_tau,
    eval_zeta_star,
    kp_residual_exact,
    lump_family,
    lump_for_mtilde,
    sample_lump,
)
from models.spectral.core import Frame, NormKind, asymmetry, make_grid, norm


class TestTauPolynomial:
    def test_centre_values(self):
        assert eval_tau(1, 0.0, 0.0) == 3.0
        assert eval_tau(2, 0.0, 0.0) == 1875.0

    def test_degrees_and_parity(self):
        assert TauPolynomial.for_family(1).degree == 2
        assert TauPolynomial.for_family(2).degree == 6
        assert TauPolynomial.for_family(2).is_even

    def test_unknown_family(self):
        with pytest.raises(DerivativeOrderError):
            TauPolynomial.for_family(3)

    def test_positive_everywhere(self, rng):
        x, y = rng.uniform(-20.0, 20.0, (2, 500))
        assert np.all(eval_tau(2, x, y) > 0.0)


class TestLumpFamily:
    def test_centre_value(self):
        assert eval_zeta_star(1, 0.0, 0.0) == pytest.approx(-4.0, abs=1e-12)

    @pytest.mark.parametrize("k", [1, 2])
    def test_exact_kp_residual(self, k, rng):
        x = rng.uniform(-30.0, 30.0, 1000)
        y = rng.uniform(-30.0, 30.0, 1000)
        assert np.max(np.abs(kp_residual_exact(k, x, y))) <= 1e-10

    @pytest.mark.parametrize("k", [1, 2])
    def test_even_in_both_variables(self, k, rng):
        x, y = rng.uniform(-5.0, 5.0, (2, 50))
        z = eval_zeta_star(k, x, y)
        np.testing.assert_allclose(eval_zeta_star(k, -x, y), z, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(eval_zeta_star(k, x, -y), z, rtol=1e-12, atol=1e-12)

    def test_derivatives_match_finite_differences(self):
        x, y, h = 0.7, -0.4, 1e-5
        fd_x = (eval_zeta_star(2, x + h, y) - eval_zeta_star(2, x - h, y)) / (2 * h)
        fd_y = (eval_zeta_star(2, x, y + h) - eval_zeta_star(2, x, y - h)) / (2 * h)
        assert eval_zeta_star(2, x, y, 1, 0) == pytest.approx(fd_x, rel=1e-6)
        assert eval_zeta_star(2, x, y, 0, 1) == pytest.approx(fd_y, rel=1e-6)

    def test_derivative_order_limit(self):
        with pytest.raises(DerivativeOrderError):
            eval_zeta_star(1, 0.0, 0.0, 3, 2)

    def test_decay(self):
        assert abs(eval_zeta_star(1, 200.0, 0.0)) < 1e-3

    @pytest.mark.parametrize("direction", [(1.0, 0.0), (0.0, 1.0), (0.6, 0.8)])
    def test_inverse_square_tail(self, direction):
        radii = np.geomspace(1e2, 1e6, 9)
        x, y = direction[0] * radii, direction[1] * radii
        weighted = np.abs(eval_zeta_star(1, x, y)) * (1.0 + radii**2)
        assert np.all(weighted <= 20.0)
        assert weighted[-1] <= weighted[-2] * (1.0 + 1e-6)

    def test_tail_constant_at_1e6(self):
        assert abs(eval_zeta_star(1, 1e6, 0.0)) * (1.0 + 1e12) == pytest.approx(12.0, rel=1e-6)
        # tau_2 grows like r^6, three times the log-derivative of tau_1
        assert eval_zeta_star(2, 1e6, 0.0) / eval_zeta_star(1, 1e6, 0.0) == pytest.approx(3.0, rel=1e-6)

    def test_family_is_cached(self):
        assert lump_family(1) is lump_family(1)

    def test_to_json(self):
        payload = json.loads(lump_family(2).to_json())
        assert payload["k_index"] == 2
        assert payload["degree"] == 6
        assert [0, 0, 1875] in payload["coefficients"]

    def test_custom_tau(self):
        family = LumpFamily(TauPolynomial.from_dict({(2, 0): 1, (0, 2): 1, (0, 0): 3}))
        assert family.zeta(0.0, 0.0) == pytest.approx(-4.0)


class TestMtildeLump:
    @pytest.mark.parametrize("k", [1, 2])
    def test_rescaled_lump_solves_mtilde_equation(self, k, params, rng):
        lump = lump_for_mtilde(k, params)
        x, y = rng.uniform(-10.0, 10.0, (2, 200))
        assert np.max(np.abs(lump.residual(x, y))) <= 1e-9

    def test_scale_is_a_power_of_the_kp_coefficient(self, params):
        lump = lump_for_mtilde(1, params)
        assert lump.scale == pytest.approx(params.kp_coefficient**lump.exponent)
        assert lump.exponent in (-0.5, 0.5)


class TestSampleLump:
    def test_kp_sample(self, grid, params):
        sample = sample_lump(grid, 1, Frame.KP_SCALED, params)
        assert sample.field.frame is Frame.KP_SCALED
        assert 0.0 <= sample.removed_energy_fraction < 1e-2
        assert not np.any(sample.field.spectrum()[~grid.retained])

    def test_sample_is_symmetric(self, lump_seed):
        assert asymmetry(lump_seed) <= 1e-12

    def test_physical_sample_is_scaled(self, grid, params):
        sample = sample_lump(grid, 1, Frame.PHYSICAL, params)
        assert sample.field.frame is Frame.PHYSICAL
        assert sample.field.sup() < 0.1 * sample_lump(grid, 1, Frame.KP_SCALED, params).field.sup()

    def test_physical_sample_needs_epsilon(self, grid, limit_params):
        with pytest.raises(ParameterMismatchError):
            sample_lump(grid, 1, Frame.PHYSICAL, limit_params)


class TestLumpNorms:
    @pytest.mark.parametrize("k", [1, 2])
    def test_lies_in_the_ball(self, k, params):
        grid = make_grid(100.0, 100.0, 512, 512)
        field = sample_lump(grid, k, Frame.KP_SCALED, params).field
        assert norm(field, NormKind.yr(1.0 + params.theta), params) < params.ball_M

    def test_y2_norm_is_resolved(self, params):
        coarse, fine = (
            sample_lump(make_grid(50.0, 50.0, n, n), 1, Frame.KP_SCALED, params).field for n in (256, 512)
        )
        y2 = NormKind.yr(2.0)
        assert norm(fine, y2, params) == pytest.approx(norm(coarse, y2, params), rel=0.02)
