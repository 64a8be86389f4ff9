import numpy as np
import pytest

from reni.baselines import SHCoeffs, baseline_from_dict, sh_basis, sh_eval, sh_fit, sh_fit_values
from reni.baselines.sh import sh_index, sh_terms
from reni.hdrio import EnvironmentMap
from reni.sphgeom import equirect_grid
from reni.utils.validation import ValidationError
from tests.helpers import random_directions


def test_terms_and_index():
    assert sh_terms(0) == 1
    assert sh_terms(2) == 9
    assert [sh_index(1, m) for m in (-1, 0, 1)] == [1, 2, 3]


def test_dc_term_is_constant(rng):
    basis = sh_basis(random_directions(rng, 20), 0)
    np.testing.assert_allclose(basis[:, 0], 0.5 / np.sqrt(np.pi))


def test_first_band_follows_direction_components(rng):
    dirs = random_directions(rng, 20)
    basis = sh_basis(dirs, 1)
    scale = np.sqrt(3.0 / (4.0 * np.pi))
    np.testing.assert_allclose(basis[:, sh_index(1, -1)], scale * dirs[:, 0], atol=1e-12)
    np.testing.assert_allclose(basis[:, sh_index(1, 0)], scale * dirs[:, 1], atol=1e-12)
    np.testing.assert_allclose(basis[:, sh_index(1, 1)], scale * dirs[:, 2], atol=1e-12)


def test_basis_is_orthonormal():
    grid = equirect_grid(64)
    basis = sh_basis(grid.directions, 4)
    gram = basis.T @ (grid.solid_angles[:, None] * basis)
    np.testing.assert_allclose(gram, np.eye(sh_terms(4)), atol=5e-3)


def test_band_limited_map_is_fitted_exactly(rng):
    grid = equirect_grid(16)
    coefficients = rng.normal(size=(sh_terms(3), 3))
    values = sh_basis(grid.directions, 3) @ coefficients
    fitted = sh_fit_values(grid, values, 3)
    np.testing.assert_allclose(fitted.coefficients, coefficients, atol=1e-9)


def test_constant_map_has_only_dc():
    env = EnvironmentMap.from_image(np.full((8, 16, 3), 1.5))
    coeffs = sh_fit(env, 2)
    np.testing.assert_allclose(coeffs.coefficients[0], 1.5 * 2.0 * np.sqrt(np.pi), rtol=1e-9)
    np.testing.assert_allclose(coeffs.coefficients[1:], 0.0, atol=1e-9)
    np.testing.assert_allclose(sh_eval(coeffs, env.grid.directions), env.rgb, atol=1e-9)


def test_residual_shrinks_with_order(rng):
    grid = equirect_grid(16)
    env = EnvironmentMap(grid, rng.uniform(0.0, 2.0, size=(grid.num_pixels, 3)))
    residuals = []
    for l_max in range(5):
        diff = sh_eval(sh_fit(env, l_max), grid.directions) - env.rgb
        residuals.append(np.sum(grid.sin_weights[:, None] * diff ** 2))
    assert all(b <= a + 1e-9 for a, b in zip(residuals, residuals[1:]))


def test_rank_deficient_order_raises():
    with pytest.raises(ValidationError):
        sh_fit_values(equirect_grid(2), np.ones((8, 3)), 4)


def test_coefficients_shape_and_serialization(rng):
    with pytest.raises(ValidationError):
        SHCoeffs(2, np.zeros((4, 3)))
    coeffs = SHCoeffs(1, rng.normal(size=(4, 3)))
    assert coeffs.dimension == 12
    restored = baseline_from_dict(coeffs.to_dict())
    assert isinstance(restored, SHCoeffs)
    np.testing.assert_array_equal(restored.coefficients, coeffs.coefficients)
