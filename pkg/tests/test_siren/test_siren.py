import numpy as np
import pytest

from reni import siren
from reni.equivariant import EquivarianceMode, InvariantFeatures, get_transform
from reni.siren import FieldParams, init_params
from reni.utils.validation import ValidationError
from tests.helpers import random_directions


def _features(rng, n_latent=2, count=7, mode="SO2"):
    return get_transform(mode).features(random_directions(rng, count), rng.normal(size=(3, n_latent)))


def test_init_is_deterministic_and_shaped():
    a = init_params(5, 128, 20, seed=7)
    b = init_params(5, 128, 20, seed=7)
    assert a.num_layers == 5 and a.hidden_width == 128 and a.input_width == 20
    assert [w.shape for w in a.weights] == [(128, 20)] + [(128, 128)] * 4 + [(3, 128)]
    for wa, wb in zip(a.arrays(), b.arrays()):
        np.testing.assert_array_equal(wa, wb)


def test_init_bounds():
    params = init_params(3, 64, 10, seed=1)
    assert np.abs(params.weights[0]).max() <= 1.0 / 10
    for w in params.weights[1:]:
        assert np.abs(w).max() <= np.sqrt(6.0 / w.shape[1]) / 30.0


def test_zero_params_give_zero_output(rng):
    params = init_params(2, 4, 6, seed=0)
    zero = FieldParams([np.zeros_like(w) for w in params.weights], [np.zeros_like(b) for b in params.biases])
    feats = _features(rng)
    np.testing.assert_array_equal(siren.forward(zero, feats), 0.0)


def test_linear_layer_hand_calculation():
    W = np.array([[1.0, 2.0], [0.0, -1.0], [3.0, 0.5]])
    b = np.array([0.5, 0.0, -1.0])
    params = FieldParams([W], [b])
    feats = InvariantFeatures(np.array([[2.0]]), np.array([-1.0]), EquivarianceMode.NONE)
    np.testing.assert_allclose(siren.forward(params, feats), [[0.5, 1.0, 4.5]])


def test_batched_equals_per_direction(rng):
    transform = get_transform("SO2")
    params = init_params(3, 8, transform.input_width(2), seed=2)
    dirs = random_directions(rng, 5)
    Z = rng.normal(size=(3, 2))
    batched = siren.forward(params, transform.features(dirs, Z))
    for i, d in enumerate(dirs):
        np.testing.assert_allclose(siren.forward(params, transform.features(d, Z))[0], batched[i], atol=1e-14)


def test_width_mismatch(rng):
    params = init_params(2, 4, 3, seed=0)
    with pytest.raises(ValidationError):
        siren.forward(params, _features(rng))


def test_chain_validation():
    with pytest.raises(ValidationError):
        FieldParams([np.zeros((4, 3)), np.zeros((3, 5))], [np.zeros(4), np.zeros(3)])


def test_zero_upstream_gives_zero_gradients(rng):
    feats = _features(rng)
    params = init_params(3, 8, feats.width, seed=0)
    grads = siren.backward(params, feats, np.zeros((feats.num_directions, 3)))
    for g in grads.arrays() + [grads.dir_feat, grads.cond_feat]:
        np.testing.assert_array_equal(g, 0.0)


def test_gradients_match_finite_differences(rng):
    feats = _features(rng, n_latent=2, count=5)
    params = init_params(3, 8, feats.width, seed=4)
    upstream = rng.normal(size=(feats.num_directions, 3))

    def loss(p, f):
        return float(np.sum(upstream * siren.forward(p, f)))

    grads = siren.backward(params, feats, upstream)
    eps = 1e-6
    for array, grad in zip(params.arrays(), grads.arrays()):
        numeric = np.zeros_like(array)
        for idx in np.ndindex(*array.shape):
            original = array[idx]
            array[idx] = original + eps
            plus = loss(params, feats)
            array[idx] = original - eps
            minus = loss(params, feats)
            array[idx] = original
            numeric[idx] = (plus - minus) / (2 * eps)
        np.testing.assert_allclose(grad, numeric, rtol=1e-4, atol=1e-6)

    for name in ("dir_feat", "cond_feat"):
        base = getattr(feats, name)
        numeric = np.zeros_like(base)
        for idx in np.ndindex(*base.shape):
            original = base[idx]
            base[idx] = original + eps
            plus = loss(params, feats)
            base[idx] = original - eps
            minus = loss(params, feats)
            base[idx] = original
            numeric[idx] = (plus - minus) / (2 * eps)
        np.testing.assert_allclose(getattr(grads, name), numeric, rtol=1e-4, atol=1e-6)
