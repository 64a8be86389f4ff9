import numpy as np
import pytest

from reni.baselines import SGLobes, baseline_from_dict, sg_eval, sg_fit
from reni.baselines.sg import fibonacci_sphere
from reni.config import SGFitConfig
from reni.hdrio import EnvironmentMap
from reni.sphgeom import equirect_grid, random_rotation
from reni.utils.validation import ValidationError
from tests.helpers import random_directions


def _lobes():
    axes = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])
    return SGLobes(axes, [4.0, 2.0], [[1.0, 0.5, 0.2], [0.3, 0.3, 0.9]])


def test_single_lobe_peak_and_antipode():
    lobe = SGLobes([[0.0, 0.0, 1.0]], [3.0], [[2.0, 1.0, 0.5]])
    np.testing.assert_allclose(sg_eval(lobe, [0.0, 0.0, 1.0]), [[2.0, 1.0, 0.5]])
    np.testing.assert_allclose(sg_eval(lobe, [0.0, 0.0, -1.0]), np.array([[2.0, 1.0, 0.5]]) * np.exp(-6.0))


def test_no_lobes_evaluate_to_zero(rng):
    empty = SGLobes(np.zeros((0, 3)), np.zeros(0), np.zeros((0, 3)))
    assert empty.count == 0
    np.testing.assert_array_equal(sg_eval(empty, random_directions(rng, 5)), np.zeros((5, 3)))


def test_rotating_axes_and_directions_together(rng):
    lobes = _lobes()
    rotation = random_rotation(rng)
    rotated = SGLobes(lobes.axes @ rotation.T, lobes.sharpness, lobes.amplitudes)
    dirs = random_directions(rng, 30)
    np.testing.assert_allclose(sg_eval(rotated, dirs @ rotation.T), sg_eval(lobes, dirs), atol=1e-12)


def test_invalid_lobes():
    with pytest.raises(ValidationError):
        SGLobes([[0.0, 2.0, 0.0]], [1.0], [[1.0, 1.0, 1.0]])
    with pytest.raises(ValidationError):
        SGLobes([[0.0, 1.0, 0.0]], [0.0], [[1.0, 1.0, 1.0]])
    with pytest.raises(ValidationError):
        SGLobes([[0.0, 1.0, 0.0]], [1.0, 2.0], [[1.0, 1.0, 1.0]])


def test_fibonacci_points_are_unit_and_spread():
    points = fibonacci_sphere(50)
    np.testing.assert_allclose(np.linalg.norm(points, axis=1), 1.0)
    assert np.linalg.norm(points.mean(axis=0)) < 0.05


def test_fit_needs_a_lobe():
    env = EnvironmentMap.from_image(np.ones((4, 8, 3)))
    with pytest.raises(ValidationError):
        sg_fit(env, 0)


def test_fit_beats_constant_approximation():
    grid = equirect_grid(16)
    truth = _lobes()
    env = EnvironmentMap(grid, sg_eval(truth, grid.directions) + 0.05)
    weights = grid.sin_weights[:, None]

    def error(pred):
        return np.sum(weights * (pred - env.rgb) ** 2)

    mean = np.sum(weights * env.rgb, axis=0) / np.sum(weights)
    fitted = sg_fit(env, 4, SGFitConfig(steps=800))
    assert fitted.count == 4
    np.testing.assert_allclose(np.linalg.norm(fitted.axes, axis=1), 1.0)
    assert np.all(fitted.amplitudes > 0)
    assert error(sg_eval(fitted, grid.directions)) < 0.25 * error(np.tile(mean, (grid.num_pixels, 1)))


def test_log_domain_fit_runs_and_serializes():
    grid = equirect_grid(8)
    env = EnvironmentMap(grid, sg_eval(_lobes(), grid.directions) + 0.01)
    fitted = sg_fit(env, 2, SGFitConfig(steps=50), log_domain=True)
    assert np.all(np.isfinite(sg_eval(fitted, grid.directions)))
    assert fitted.dimension == 12
    restored = baseline_from_dict(fitted.to_dict())
    np.testing.assert_allclose(restored.sharpness, fitted.sharpness)


def test_unknown_baseline_type():
    with pytest.raises(ValidationError):
        baseline_from_dict({"type": "wavelet"})
