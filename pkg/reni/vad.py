#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Variational Auto-Decoder Module

Per-image Gaussian latent distributions trained jointly with the field:
reparameterized sampling, the KL and sin-weighted reconstruction losses, and
the progressive multi-resolution training loop.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from reni.checkpoint import Checkpoint
from reni.config import TrainConfig
from reni.equivariant import get_transform
from reni.hdrio import EnvironmentMap, compute_stats, normalize_log
from reni.model import ReniField, latent_to_vec, vec_to_latent
from reni.optim import AdamState, adam_step, lr_at
from reni.siren import FieldGradients, init_params
from reni.sphgeom import DirectionGrid, area_downsample, equirect_grid
from reni.utils.validation import ValidationError, check_finite_loss

LOGGER = logging.getLogger(__name__)

LOG_MU_INIT = (0.0, 1.0)
LOG_VAR_INIT = (-5.0, 1.0)


@dataclass
class VariationalLatent:
    """
    Diagonal Gaussian over a flattened 3N latent.

    Attributes:
        mu (np.ndarray): Mean, length 3N.
        log_var (np.ndarray): log sigma^2, length 3N.
    """
    mu: np.ndarray = field(repr=False)
    log_var: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.log_var = np.asarray(self.log_var, dtype=np.float64)
        if self.mu.ndim != 1 or self.mu.shape != self.log_var.shape or self.mu.shape[0] % 3:
            raise ValidationError(f"Latent mean {self.mu.shape} and log-variance {self.log_var.shape} must be 3N vectors")
        if not (np.all(np.isfinite(self.mu)) and np.all(np.isfinite(self.log_var))):
            raise ValidationError("Variational latent contains non-finite entries")

    @property
    def n_latent(self) -> int:
        return self.mu.shape[0] // 3

    @property
    def variance(self) -> np.ndarray:
        return np.exp(self.log_var)

    def mean_latent(self) -> np.ndarray:
        """The mean as a 3 x N code."""
        return vec_to_latent(self.mu, self.n_latent)


def sample_latent(latent: VariationalLatent, rng: np.random.Generator,
                  return_noise: bool = False) -> Union[np.ndarray, Tuple[np.ndarray, np.ndarray]]:
    """
    Reparameterized draw vec(Z) = mu + sigma * eps with eps ~ N(0, I).

    Args:
        latent (VariationalLatent): Distribution to sample.
        rng (np.random.Generator): Noise source.
        return_noise (bool): Also return eps (needed for gradients).

    Returns:
        np.ndarray: 3 x N latent code (and eps when requested).
    """
    eps = rng.standard_normal(latent.mu.shape[0])
    Z = vec_to_latent(latent.mu + np.exp(0.5 * latent.log_var) * eps, latent.n_latent)
    return (Z, eps) if return_noise else Z


def sample_prior(n_latent: int, rng: np.random.Generator) -> np.ndarray:
    """Draw vec(Z) ~ N(0, I_{3N}) as a 3 x N code."""
    return vec_to_latent(rng.standard_normal(3 * n_latent), n_latent)


def interpolate_latents(Z_a: np.ndarray, Z_b: np.ndarray, steps: int) -> List[np.ndarray]:
    """Linear interpolation from Z_a to Z_b inclusive, in `steps` codes."""
    if steps < 2:
        raise ValidationError(f"Interpolation needs at least 2 steps, got {steps}")
    Z_a, Z_b = np.asarray(Z_a, dtype=np.float64), np.asarray(Z_b, dtype=np.float64)
    if Z_a.shape != Z_b.shape:
        raise ValidationError(f"Cannot interpolate codes of shapes {Z_a.shape} and {Z_b.shape}")
    return [(1.0 - t) * Z_a + t * Z_b for t in np.linspace(0.0, 1.0, steps)]


def kld_loss(latents: Sequence[VariationalLatent]) -> float:
    """-1/2 sum_i sum_j (1 + log sigma_ij^2 - mu_ij^2 - sigma_ij^2)."""
    return float(sum(
        -0.5 * np.sum(1.0 + v.log_var - v.mu ** 2 - np.exp(v.log_var)) for v in latents
    ))


def kld_grad(latent: VariationalLatent) -> Tuple[np.ndarray, np.ndarray]:
    """Gradient of one latent's KL term w.r.t. (mu, log sigma^2)."""
    return latent.mu.copy(), 0.5 * (np.exp(latent.log_var) - 1.0)


def recon_loss(pred: np.ndarray, target: np.ndarray, sin_weights: np.ndarray) -> float:
    """(1/P) sum_j sin(theta_j) ||pred_j - target_j||^2 for one image."""
    diff = np.asarray(pred) - np.asarray(target)
    return float(np.sum(sin_weights * np.sum(diff * diff, axis=1)) / diff.shape[0])


def recon_grad(pred: np.ndarray, target: np.ndarray, sin_weights: np.ndarray) -> np.ndarray:
    """Gradient of recon_loss w.r.t. pred, shape (P, 3)."""
    diff = np.asarray(pred) - np.asarray(target)
    return 2.0 * sin_weights[:, None] * diff / diff.shape[0]


def train_loss(recon: float, kld: float, beta: float, latent_dim: int) -> float:
    """recon + (beta / D) kld."""
    return recon + (beta / latent_dim) * kld


@dataclass
class ImageStep:
    """Loss of one image at one reparameterized sample, with its gradients."""
    loss: float
    recon: float
    net_grads: FieldGradients = field(repr=False)
    grad_mu: np.ndarray = field(repr=False)
    grad_log_var: np.ndarray = field(repr=False)


def image_loss_and_grads(field_model: ReniField, latent: VariationalLatent, eps: np.ndarray,
                         target: np.ndarray, grid: DirectionGrid, beta: float) -> ImageStep:
    """
    Per-image training loss recon + (beta / D) kld at vec(Z) = mu + sigma * eps.

    Args:
        field_model (ReniField): Field whose weights receive gradients.
        latent (VariationalLatent): The image's latent distribution.
        eps (np.ndarray): Fixed reparameterization noise, length 3N.
        target (np.ndarray): Normalized log-HDR target (P, 3) on `grid`.
        grid (DirectionGrid): Equirectangular grid of the target.
        beta (float): KL weight before division by D.

    Returns:
        ImageStep: Loss value and gradients w.r.t. the weights, mu and log sigma^2.
    """
    sigma = np.exp(0.5 * latent.log_var)
    Z = vec_to_latent(latent.mu + sigma * eps, latent.n_latent)
    kld_weight = beta / field_model.latent_dim
    evaluation = field_model.forward(Z, grid)
    recon = recon_loss(evaluation.output, target, grid.sin_weights)
    loss = train_loss(recon, kld_loss([latent]), beta, field_model.latent_dim)

    net_grads, grad_Z = field_model.backward(evaluation, recon_grad(evaluation.output, target, grid.sin_weights))
    grad_vec = latent_to_vec(grad_Z)
    kld_mu, kld_log_var = kld_grad(latent)
    return ImageStep(
        loss=loss,
        recon=recon,
        net_grads=net_grads,
        grad_mu=grad_vec + kld_weight * kld_mu,
        grad_log_var=grad_vec * eps * 0.5 * sigma + kld_weight * kld_log_var,
    )


def init_latents(count: int, n_latent: int, rng: np.random.Generator) -> List[VariationalLatent]:
    """mu ~ N(0, 1) and log sigma^2 ~ N(-5, 1) per entry."""
    return [
        VariationalLatent(
            rng.normal(LOG_MU_INIT[0], LOG_MU_INIT[1], 3 * n_latent),
            rng.normal(LOG_VAR_INIT[0], LOG_VAR_INIT[1], 3 * n_latent),
        )
        for _ in range(count)
    ]


def resolution_targets(maps: Sequence[EnvironmentMap], height: int, stats, floor: float) -> List[np.ndarray]:
    """Normalized log-HDR targets of every map area-downsampled to `height`."""
    targets = []
    for env in maps:
        rgb = area_downsample(env.rgb, env.height, height)
        targets.append(normalize_log(rgb, stats, floor))
    return targets


def check_dataset_resolution(maps: Sequence[EnvironmentMap], resolutions: Sequence[Tuple[int, int]]) -> None:
    """Every scheduled height must divide every map's stored height."""
    for index, env in enumerate(maps):
        for height, _ in resolutions:
            if height > env.height or env.height % height:
                raise ValidationError(
                    f"Map {index} with H={env.height} cannot be downsampled to scheduled H={height}"
                )


class VADTrainer:
    """
    Variational auto-decoder training loop.

    One reparameterized latent sample per image per epoch, batch size one
    image, Adam on the network and on each image's (mu, log sigma^2).
    """

    def __init__(self, config: TrainConfig):
        self.config = config
        self.logger = logging.getLogger(self.__class__.__name__)

    def train(self, dataset: Sequence[EnvironmentMap], image_ids: Optional[Sequence[str]] = None,
              stats=None) -> Checkpoint:
        """
        Train a field on a dataset.

        Args:
            dataset: Environment maps at their stored (maximum) resolution.
            image_ids: Names used in logs and the checkpoint; defaults to indices.
            stats: Precomputed NormStats; computed from the dataset when None.

        Returns:
            Checkpoint: Trained field, latents and the per-epoch loss log.

        Raises:
            ValidationError: Empty dataset or incompatible resolutions.
            NonFiniteLossError: If any image loss diverges.
        """
        cfg = self.config
        dataset = list(dataset)
        if not dataset:
            raise ValidationError("Training dataset must not be empty")
        image_ids = [str(i) for i in (image_ids or range(len(dataset)))]
        if len(image_ids) != len(dataset):
            raise ValidationError("image_ids must match the dataset length")
        check_dataset_resolution(dataset, cfg.resolutions)

        stats = stats or compute_stats(dataset, cfg.floor)
        rng = np.random.default_rng(cfg.seed)
        transform = get_transform(cfg.mode)
        params = init_params(cfg.num_layers, cfg.hidden_width, transform.input_width(cfg.n_latent),
                             cfg.seed, cfg.omega0)
        field_model = ReniField(cfg.mode, params, cfg.n_latent, stats)
        latents = init_latents(len(dataset), cfg.n_latent, rng)

        net_state = AdamState.for_params(params.arrays())
        latent_states = [AdamState.for_params([v.mu, v.log_var]) for v in latents]
        schedule = cfg.lr_schedule()

        self.logger.info(
            f"Training {cfg.mode.value} field N={cfg.n_latent} on {len(dataset)} images "
            f"for {cfg.total_epochs} epochs, stats=[{stats.log_min:.3f}, {stats.log_max:.3f}]"
        )

        loss_log: List[Dict[str, float]] = []
        epoch = 0
        for height, epochs in cfg.resolutions:
            grid = equirect_grid(height)
            targets = resolution_targets(dataset, height, stats, cfg.floor)
            for _ in range(epochs):
                lr = lr_at(schedule, epoch)
                recon_total = 0.0
                for index, (target, latent) in enumerate(zip(targets, latents)):
                    _, eps = sample_latent(latent, rng, return_noise=True)
                    step = image_loss_and_grads(field_model, latent, eps, target, grid, cfg.beta)
                    check_finite_loss(step.loss, epoch, image_ids[index])
                    adam_step(net_state, params.arrays(), step.net_grads.arrays(), lr)
                    adam_step(latent_states[index], [latent.mu, latent.log_var], [step.grad_mu, step.grad_log_var], lr)
                    recon_total += step.recon

                kld_total = kld_loss(latents)
                loss_log.append({
                    "epoch": epoch,
                    "resolution": height,
                    "recon": recon_total,
                    "kld": kld_total,
                    "lr": lr,
                })
                if epoch % cfg.log_every == 0 or epoch == cfg.total_epochs - 1:
                    self.logger.info(
                        f"epoch {epoch + 1}/{cfg.total_epochs} H={height} recon={recon_total:.6f} "
                        f"kld={kld_total:.4f} lr={lr:.3e}"
                    )
                epoch += 1

        return Checkpoint(field_model, latents, image_ids, loss_log, cfg.model_dump(mode="json"))


def train(dataset: Sequence[EnvironmentMap], cfg: TrainConfig, image_ids: Optional[Sequence[str]] = None) -> Checkpoint:
    """Train a field on a dataset with the given configuration."""
    return VADTrainer(cfg).train(dataset, image_ids)
