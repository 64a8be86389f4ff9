import numpy as np
import pytest

from reni.config import TrainConfig
from reni.hdrio import EnvironmentMap, NormStats, normalize_log
from reni.model import latent_to_vec
from reni.sphgeom import equirect_grid
from reni.utils.validation import NonFiniteLossError, ValidationError
from reni.vad import (
    VADTrainer,
    VariationalLatent,
    image_loss_and_grads,
    interpolate_latents,
    kld_grad,
    kld_loss,
    recon_loss,
    sample_latent,
    sample_prior,
    train,
    train_loss,
)
from reni.fitting import psnr
from tests.helpers import make_field


def test_kld_closed_form():
    assert kld_loss([VariationalLatent(np.zeros(3), np.zeros(3))]) == 0.0
    latent = VariationalLatent(np.array([1.0, 0.0, 0.0]), np.zeros(3))
    assert kld_loss([latent]) == pytest.approx(0.5)


def test_kld_non_negative(rng):
    for _ in range(100):
        latents = [VariationalLatent(rng.normal(size=6), rng.normal(size=6)) for _ in range(3)]
        assert kld_loss(latents) >= 0.0


def test_kld_gradient_matches_finite_differences(rng):
    latent = VariationalLatent(rng.normal(size=6), rng.normal(size=6))
    grad_mu, grad_log_var = kld_grad(latent)
    eps = 1e-6
    for i in range(6):
        plus = VariationalLatent(latent.mu + eps * np.eye(6)[i], latent.log_var)
        minus = VariationalLatent(latent.mu - eps * np.eye(6)[i], latent.log_var)
        assert grad_mu[i] == pytest.approx((kld_loss([plus]) - kld_loss([minus])) / (2 * eps), rel=1e-6)
        plus = VariationalLatent(latent.mu, latent.log_var + eps * np.eye(6)[i])
        minus = VariationalLatent(latent.mu, latent.log_var - eps * np.eye(6)[i])
        assert grad_log_var[i] == pytest.approx((kld_loss([plus]) - kld_loss([minus])) / (2 * eps), rel=1e-6)


def test_zero_variance_sample_is_mean(rng):
    latent = VariationalLatent(np.arange(6.0), np.full(6, -1000.0))
    Z = sample_latent(latent, rng)
    np.testing.assert_allclose(Z, [[0.0, 3.0], [1.0, 4.0], [2.0, 5.0]], atol=1e-100)


def test_standard_normal_sample_moments():
    rng = np.random.default_rng(0)
    latent = VariationalLatent(np.zeros(3), np.zeros(3))
    draws = np.stack([latent_to_vec(sample_latent(latent, rng)) for _ in range(100000)])
    stderr = 1.0 / np.sqrt(draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0)) < 3 * stderr)
    assert np.all(np.abs(draws.var(axis=0) - 1.0) < 3 * np.sqrt(2.0) * stderr)


def test_seeded_samples_repeat():
    latent = VariationalLatent(np.ones(6), np.zeros(6))
    a = sample_latent(latent, np.random.default_rng(3))
    b = sample_latent(latent, np.random.default_rng(3))
    np.testing.assert_array_equal(a, b)
    assert sample_prior(4, np.random.default_rng(1)).shape == (3, 4)


def test_recon_loss_values():
    grid = equirect_grid(4)
    target = np.zeros((grid.num_pixels, 3))
    assert recon_loss(target, target, grid.sin_weights) == 0.0
    expected = grid.sin_weights.sum() / grid.num_pixels * 3 * 0.25
    assert recon_loss(target + 0.5, target, grid.sin_weights) == pytest.approx(expected)


def test_recon_loss_downweights_poles():
    grid = equirect_grid(8)
    target = np.zeros((grid.num_pixels, 3))
    pole, equator = target.copy(), target.copy()
    pole[:grid.width] = 1.0
    equator[3 * grid.width:4 * grid.width] = 1.0
    assert recon_loss(pole, target, grid.sin_weights) < recon_loss(equator, target, grid.sin_weights)


def test_train_loss_formula():
    assert train_loss(2.0, 5.0, 0.0, 27) == 2.0
    assert train_loss(2.0, 0.0, 1.0, 27) == 2.0
    assert train_loss(2.0, 27.0, 0.5, 27) == pytest.approx(2.5)


def _relative_error(analytic, numeric):
    return np.linalg.norm(np.ravel(analytic) - np.ravel(numeric)) / np.linalg.norm(np.ravel(numeric))


@pytest.mark.parametrize("num_layers", [2, 3])
def test_image_loss_gradients_match_finite_differences(rng, num_layers):
    field_model = make_field("SO2", n_latent=2, num_layers=num_layers, hidden_width=8, seed=3)
    grid = equirect_grid(4)
    target = np.clip(rng.normal(scale=0.5, size=(grid.num_pixels, 3)), -1.0, 1.0)
    latent = VariationalLatent(rng.normal(size=6), rng.normal(-1.0, 0.3, size=6))
    eps = rng.standard_normal(6)
    beta = 0.5
    step = image_loss_and_grads(field_model, latent, eps, target, grid, beta)

    def loss_at(mu=latent.mu, log_var=latent.log_var):
        return image_loss_and_grads(field_model, VariationalLatent(mu, log_var), eps, target, grid, beta).loss

    h = 1e-6
    basis = np.eye(6)
    numeric_mu = [(loss_at(mu=latent.mu + h * e) - loss_at(mu=latent.mu - h * e)) / (2 * h) for e in basis]
    numeric_lv = [(loss_at(log_var=latent.log_var + h * e) - loss_at(log_var=latent.log_var - h * e)) / (2 * h)
                  for e in basis]
    assert _relative_error(step.grad_mu, numeric_mu) < 1e-4
    assert _relative_error(step.grad_log_var, numeric_lv) < 1e-4

    analytic_w, numeric_w = [], []
    arrays, grad_arrays = field_model.params.arrays(), step.net_grads.arrays()
    for array, grad in zip(arrays, grad_arrays):
        for flat in rng.choice(array.size, size=min(3, array.size), replace=False):
            idx = np.unravel_index(flat, array.shape)
            original = array[idx]
            array[idx] = original + h
            plus = loss_at()
            array[idx] = original - h
            minus = loss_at()
            array[idx] = original
            analytic_w.append(grad[idx])
            numeric_w.append((plus - minus) / (2 * h))
    assert _relative_error(analytic_w, numeric_w) < 1e-4


def test_interpolation_endpoints():
    a, b = np.zeros((3, 2)), np.ones((3, 2))
    codes = interpolate_latents(a, b, 5)
    assert len(codes) == 5
    np.testing.assert_array_equal(codes[0], a)
    np.testing.assert_array_equal(codes[-1], b)
    np.testing.assert_allclose(codes[2], 0.5)
    with pytest.raises(ValidationError):
        interpolate_latents(a, b, 1)


def _gray_map(height=8, level=0.5):
    grid = equirect_grid(height)
    return EnvironmentMap(grid, np.full((grid.num_pixels, 3), level) * np.array([1.0, 0.8, 0.6]))


def _sky_map(height=8, seed=0):
    rng = np.random.default_rng(seed)
    grid = equirect_grid(height)
    y = grid.directions[:, 1:2]
    rgb = np.exp(1.5 * y + 0.3 * rng.normal()) * np.array([0.6, 0.8, 1.0])
    return EnvironmentMap(grid, rgb)


def test_train_gray_image_converges():
    cfg = TrainConfig(n_latent=1, num_layers=2, hidden_width=16, lr_start=5e-3, lr_end=2e-4,
                      resolutions=[(8, 200)], log_every=100)
    grid = equirect_grid(8)
    gray = EnvironmentMap(grid, np.full((grid.num_pixels, 3), 0.5))
    stats = NormStats(-3.0, 2.0)
    checkpoint = VADTrainer(cfg).train([gray], stats=stats)

    recons = np.array([row["recon"] for row in checkpoint.loss_log])
    assert recons.shape == (200,)
    block_means = recons.reshape(4, 50).mean(axis=1)
    assert np.all(np.diff(block_means) < 0.0)

    truth = normalize_log(gray.rgb, stats)
    decoded = checkpoint.field_model.decode(checkpoint.latents[0].mean_latent(), grid)
    assert psnr(decoded, truth) > 40.0


def test_training_is_deterministic():
    cfg = TrainConfig(n_latent=2, num_layers=2, hidden_width=8, resolutions=[(4, 5), (8, 5)], seed=11)
    maps = [_sky_map(8, 0), _sky_map(8, 1)]
    a = VADTrainer(cfg).train(maps)
    b = VADTrainer(cfg).train(maps)
    assert a.loss_log == b.loss_log
    assert [row["resolution"] for row in a.loss_log] == [4] * 5 + [8] * 5


def test_large_beta_pulls_latents_to_prior():
    cfg = TrainConfig(n_latent=1, num_layers=2, hidden_width=8, beta=1e4, lr_start=2e-2, lr_end=5e-3,
                      resolutions=[(4, 1000)], log_every=500)
    checkpoint = train([_sky_map(4, 0), _sky_map(4, 1)], cfg)
    assert kld_loss(checkpoint.latents) < 0.1


def test_training_rejects_bad_inputs():
    cfg = TrainConfig(n_latent=1, num_layers=1, hidden_width=4, resolutions=[(16, 1)])
    with pytest.raises(ValidationError):
        train([], cfg)
    with pytest.raises(ValidationError):
        train([_gray_map(8)], cfg)


def test_divergence_reports_epoch_and_image():
    cfg = TrainConfig(n_latent=1, num_layers=2, hidden_width=8, lr_start=1e200, lr_end=1e200,
                      resolutions=[(4, 20)])
    with pytest.raises(NonFiniteLossError) as info:
        VADTrainer(cfg).train([_sky_map(4, 0), _sky_map(4, 1)], ["first", "second"])
    assert info.value.image_id in ("first", "second")
    assert info.value.epoch is not None
