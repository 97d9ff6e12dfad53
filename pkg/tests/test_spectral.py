"""Tests for the spectral core: grids, transforms, multipliers, norms and projections."""
from __future__ import annotations

import numpy as np
import pytest

from models.errors import GridError, ParameterMismatchError, RepresentationError, SymbolError
from models.spectral.core import (
    Direction,
    Field,
    Frame,
    NormKind,
    Side,
    apply_multiplier,
    asymmetry,
    cone_mask,
    dealiased_product,
    inner_product,
    make_grid,
    norm,
    physical_image,
    project_admissible,
    project_cone,
    symmetrize,
    transform,
)
from models.symbols.symbols import symbol_table


class TestGrid:
    def test_spacing_and_sample_points(self, grid):
        assert grid.dx == pytest.approx(60.0 / 64)
        assert grid.x[0] == pytest.approx(-30.0)
        assert grid.x[32] == 0.0
        assert grid.dk1 == pytest.approx(np.pi / 30.0)

    @pytest.mark.parametrize("n", [8, 48, 100])
    def test_rejects_bad_point_counts(self, n):
        with pytest.raises(GridError):
            make_grid(10.0, 10.0, n, 32)

    def test_rejects_nonpositive_length(self):
        with pytest.raises(GridError):
            make_grid(0.0, 10.0, 32, 32)

    def test_retained_mask(self, grid):
        retained = grid.retained
        assert retained[0, 0]
        assert retained[1, 0]
        assert retained[1, 5]
        assert not retained[0, 1]          # k1 = 0, k2 != 0
        assert not retained[32, 0]         # Nyquist row
        assert not retained[3, 32]         # Nyquist column

    def test_dealias_band(self, grid):
        assert grid.dealias[21, 0]
        assert not grid.dealias[22, 0]


class TestTransform:
    def test_round_trip(self, random_field):
        spectral = transform(random_field, Direction.FORWARD)
        back = transform(Field.from_coefficients(spectral.grid, spectral.coefficients), Direction.BACKWARD)
        np.testing.assert_allclose(back.samples, random_field.samples, atol=1e-12)

    def test_parseval_on_random_fields(self, grid, rng):
        for _ in range(100):
            s = rng.standard_normal(grid.shape)
            c = Field.from_samples(grid, s).spectrum()
            physical = np.sum(s * s) * grid.cell_area
            spectral = np.sum(np.abs(c) ** 2) * grid.dual_cell_area
            assert spectral == pytest.approx(physical, rel=1e-12)

    def test_gaussian_matches_continuous_transform(self, grid):
        xx, yy = grid.mesh
        f = Field.from_samples(grid, np.exp(-(xx**2 + yy**2) / 2.0))
        c = f.spectrum()
        assert c[0, 0].real == pytest.approx(1.0, abs=1e-8)
        assert c[1, 0].real == pytest.approx(np.exp(-grid.dk1**2 / 2.0), abs=1e-8)
        assert abs(c[1, 0].imag) < 1e-12

    def test_missing_representation(self, grid):
        f = Field.from_coefficients(grid, np.zeros(grid.shape))
        with pytest.raises(RepresentationError):
            transform(f, Direction.FORWARD)

    def test_field_needs_a_representation(self, grid):
        with pytest.raises(RepresentationError):
            Field(grid, Frame.KP_SCALED)

    def test_shape_mismatch(self, grid):
        with pytest.raises(GridError):
            Field.from_samples(grid, np.zeros((16, 16)))

    def test_arrays_are_read_only(self, random_field):
        with pytest.raises(ValueError):
            random_field.samples[0, 0] = 1.0


class TestMultipliers:
    def test_unit_multiplier_is_admissible_projection(self, random_field):
        out = apply_multiplier(random_field, lambda k1, k2: np.ones_like(k1))
        np.testing.assert_allclose(out.spectrum(), project_admissible(random_field).spectrum(), atol=0)

    def test_singular_symbol_raises(self, random_field):
        with pytest.raises(SymbolError):
            apply_multiplier(random_field, lambda k1, k2: 1.0 / (k1**2 + k2**2))

    def test_non_finite_table_raises(self, random_field, grid):
        table = np.ones(grid.shape)
        table[1, 1] = np.inf
        with pytest.raises(SymbolError):
            apply_multiplier(random_field, table)

    def test_non_finite_off_retained_is_ignored(self, random_field, grid):
        table = np.ones(grid.shape)
        table[0, 1] = np.nan
        out = apply_multiplier(random_field, table)
        assert np.all(np.isfinite(out.spectrum()))

    def test_multipliers_compose_by_product(self, random_field, grid, params):
        a = symbol_table(grid, params, "mtilde_inv")
        b = symbol_table(grid, params, "resolvent")
        twice = apply_multiplier(apply_multiplier(random_field, a), b)
        once = apply_multiplier(random_field, a * b)
        np.testing.assert_allclose(twice.spectrum(), once.spectrum(), rtol=1e-14, atol=0)

    def test_dealiased_product_of_low_modes_is_exact(self, grid):
        xx, _ = grid.mesh
        f = Field.from_samples(grid, np.cos(grid.dk1 * xx))
        product = dealiased_product(f, f)
        np.testing.assert_allclose(product.physical(), np.cos(grid.dk1 * xx) ** 2, atol=1e-12)

    def test_inner_product_matches_physical_quadrature(self, grid, rng):
        f = Field.from_samples(grid, rng.standard_normal(grid.shape))
        g = Field.from_samples(grid, rng.standard_normal(grid.shape))
        expected = np.sum(f.samples * g.samples) * grid.cell_area
        assert inner_product(f, g) == pytest.approx(expected, rel=1e-10)


class TestNorms:
    def test_kp_l2_is_physical_quadrature(self, random_field, params):
        f = project_admissible(random_field)
        expected = np.sqrt(np.sum(f.physical() ** 2) * f.grid.cell_area)
        assert norm(f, NormKind.yr(0.0), params) == pytest.approx(expected, rel=1e-12)

    def test_eps_scaled_frame_identity(self, grid, rng, params):
        for _ in range(100):
            f = Field.from_samples(grid, rng.standard_normal(grid.shape))
            lhs = norm(f, NormKind.eps_scaled(), params) ** 2
            rhs = params.epsilon * norm(f, NormKind.yr(1.0), params) ** 2
            assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_frame_conversion_round_trip(self, random_field, params):
        # KP -> physical L2 carries the factor eps in the squared norm
        kp = norm(random_field, NormKind.yr(0.0), params)
        phys = norm(random_field, NormKind.l2(), params)
        assert phys**2 == pytest.approx(params.epsilon * kp**2, rel=1e-12)

    def test_norms_are_monotone_in_order(self, random_field, params):
        y0 = norm(random_field, NormKind.yr(0.0), params)
        y1 = norm(random_field, NormKind.yr(1.0), params)
        y2 = norm(random_field, NormKind.yr(1.75), params)
        assert y0 <= y1 <= y2

    def test_negative_order_rejected(self, random_field, params):
        with pytest.raises(ParameterMismatchError):
            norm(random_field, NormKind.yr(-1.0), params)

    def test_sobolev_index_out_of_range(self, random_field, params):
        with pytest.raises(ParameterMismatchError):
            norm(random_field, NormKind.x(1.2), params)

    def test_conversion_needs_positive_epsilon(self, random_field, limit_params):
        with pytest.raises(ParameterMismatchError):
            norm(random_field, NormKind.x(), limit_params)


class TestConeAndSymmetry:
    def test_projection_partition(self, random_field, params):
        inside = project_cone(random_field, Side.INSIDE, params)
        outside = project_cone(random_field, Side.OUTSIDE, params)
        np.testing.assert_allclose(
            inside.spectrum() + outside.spectrum(), random_field.spectrum(), rtol=0, atol=0
        )

    def test_cone_contains_origin_and_only_retained_modes(self, grid, params):
        mask = cone_mask(grid, Frame.KP_SCALED, params)
        assert mask[0, 0]
        assert not np.any(mask & ~grid.retained)

    def test_kp_cone_bound(self, grid, params):
        mask = cone_mask(grid, Frame.KP_SCALED, params)
        kk1, kk2 = grid.wave_mesh
        bound = params.delta / params.epsilon
        assert not np.any(mask & (np.abs(kk2) > bound * np.abs(kk1) + 1e-12) & (kk1 != 0))

    def test_limit_cone_is_all_retained(self, grid, limit_params):
        np.testing.assert_array_equal(cone_mask(grid, Frame.KP_SCALED, limit_params), grid.retained)

    def test_symmetrize_is_idempotent(self, random_field):
        once = symmetrize(random_field)
        assert asymmetry(once) <= 1e-12
        assert asymmetry(random_field) > 0.1

    def test_even_function_is_symmetric(self, grid):
        xx, yy = grid.mesh
        f = Field.from_samples(grid, np.exp(-(xx**2) - 2.0 * yy**2))
        assert asymmetry(f) <= 1e-14

    def test_zero_field_asymmetry(self, grid):
        assert asymmetry(Field.zeros(grid)) == 0.0

    def test_physical_image(self, random_field):
        image = physical_image(random_field, 0.1)
        assert image.frame is Frame.PHYSICAL
        assert image.grid.half_width_x == pytest.approx(300.0)
        assert image.grid.half_width_y == pytest.approx(3000.0)
        np.testing.assert_allclose(image.samples, 0.01 * random_field.samples)

    def test_physical_image_needs_positive_epsilon(self, random_field):
        with pytest.raises(ParameterMismatchError):
            physical_image(random_field, 0.0)
