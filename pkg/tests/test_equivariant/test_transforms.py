import numpy as np
import pytest

from reni.equivariant import (
    EquivarianceMode,
    get_transform,
    transform_none,
    transform_so2,
    transform_so3,
)
from reni.sphgeom import random_rotation, x_rotation_matrix, y_rotation_matrix
from reni.utils.validation import ValidationError
from tests.helpers import make_field, random_directions


@pytest.mark.parametrize("mode,dir_size,cond_size", [
    ("SO3", 4, 16),
    ("SO2", 6, 20),
    ("NONE", 3, 12),
])
def test_feature_sizes(rng, mode, dir_size, cond_size):
    feats = get_transform(mode).features(random_directions(rng, 5), rng.normal(size=(3, 4)))
    assert feats.dir_feat.shape == (5, dir_size)
    assert feats.cond_feat.shape == (cond_size,)
    assert feats.stacked().shape == (5, dir_size + cond_size)


def test_so2_features_invariant_under_y_rotation(rng):
    for _ in range(200):
        d = random_directions(rng, 8)
        Z = rng.normal(size=(3, 5))
        R = y_rotation_matrix(rng.uniform(0.0, 2.0 * np.pi))
        a = transform_so2(d, Z)
        b = transform_so2(d @ R.T, R @ Z)
        np.testing.assert_allclose(b.dir_feat, a.dir_feat, atol=1e-9)
        np.testing.assert_allclose(b.cond_feat, a.cond_feat, atol=1e-9)


def test_so3_features_invariant_under_any_rotation(rng):
    for _ in range(200):
        d = random_directions(rng, 8)
        Z = rng.normal(size=(3, 5))
        R = random_rotation(rng)
        a = transform_so3(d, Z)
        b = transform_so3(d @ R.T, R @ Z)
        np.testing.assert_allclose(b.dir_feat, a.dir_feat, atol=1e-9)
        np.testing.assert_allclose(b.cond_feat, a.cond_feat, atol=1e-9)


def test_so2_is_not_invariant_under_x_rotation(rng):
    d = random_directions(rng, 16)
    Z = rng.normal(size=(3, 5))
    R = x_rotation_matrix(0.7)
    a = transform_so2(d, Z)
    b = transform_so2(d @ R.T, R @ Z)
    assert np.max(np.abs(b.stacked() - a.stacked())) > 1e-3


def test_none_transform_passes_raw_inputs(rng):
    d = random_directions(rng, 3)
    Z = rng.normal(size=(3, 2))
    feats = transform_none(d, Z)
    np.testing.assert_array_equal(feats.dir_feat, d)
    np.testing.assert_array_equal(feats.cond_feat, [Z[0, 0], Z[1, 0], Z[2, 0], Z[0, 1], Z[1, 1], Z[2, 1]])


@pytest.mark.parametrize("mode", ["SO3", "SO2", "NONE"])
def test_backward_matches_finite_differences(rng, mode):
    transform = get_transform(mode)
    d = random_directions(rng, 6)
    Z = rng.normal(size=(3, 3))
    feats = transform.features(d, Z)
    g_dir = rng.normal(size=feats.dir_feat.shape)
    g_cond = rng.normal(size=feats.cond_feat.shape)

    def loss(Zp):
        f = transform.features(d, Zp)
        return np.sum(g_dir * f.dir_feat) + np.sum(g_cond * f.cond_feat)

    analytic = transform.backward(d, Z, g_dir, g_cond)
    eps = 1e-6
    numeric = np.zeros_like(Z)
    for idx in np.ndindex(*Z.shape):
        Zp, Zm = Z.copy(), Z.copy()
        Zp[idx] += eps
        Zm[idx] -= eps
        numeric[idx] = (loss(Zp) - loss(Zm)) / (2 * eps)
    np.testing.assert_allclose(analytic, numeric, rtol=1e-6, atol=1e-8)


def test_field_equivariance_with_random_network(rng):
    field_model = make_field("SO2", n_latent=4, num_layers=3, hidden_width=16, seed=3)
    worst = 0.0
    for _ in range(200):
        d = random_directions(rng, 50)
        Z = rng.normal(size=(3, 4))
        R = y_rotation_matrix(rng.uniform(0.0, 2.0 * np.pi))
        worst = max(worst, np.max(np.abs(field_model.decode(R @ Z, d @ R.T) - field_model.decode(Z, d))))
    assert worst < 1e-9


def test_so3_field_equivariance_with_random_network(rng):
    field_model = make_field("SO3", n_latent=4, num_layers=3, hidden_width=16, seed=3)
    for _ in range(50):
        d = random_directions(rng, 50)
        Z = rng.normal(size=(3, 4))
        R = random_rotation(rng)
        np.testing.assert_allclose(field_model.decode(R @ Z, d @ R.T), field_model.decode(Z, d), atol=1e-9)


def test_unknown_mode():
    with pytest.raises(ValueError):
        get_transform("SO4")


def test_mode_accepts_strings():
    assert get_transform("so2").mode == EquivarianceMode.SO2


def test_invalid_latent_shape(rng):
    with pytest.raises(ValidationError):
        transform_so2(random_directions(rng, 2), rng.normal(size=(2, 4)))
