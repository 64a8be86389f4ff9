#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Latent Fitting Module

Test-time optimization of a latent code against a full or partially observed
environment map with the network held fixed, the PSNR metric, completion
masks, and the closed-form y-axis alignment of two latent codes.
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from reni.checkpoint import Checkpoint
from reni.config import FitConfig
from reni.hdrio import EnvironmentMap, normalize_log, read_pfm_array
from reni.optim import AdamState, adam_step, lr_at
from reni.sphgeom import DirectionGrid, area_downsample, equirect_grid, y_rotation_matrix
from reni.utils.data_processing import read_png_gray
from reni.utils.validation import ValidationError, check_finite_loss, validate_latent, validate_mask

LOGGER = logging.getLogger(__name__)

COSINE_EPS = 1e-8
NORMALIZED_PEAK = 2.0


# =============================================================================
# Masks

@dataclass
class PixelMask:
    """Observed pixels of an equirectangular grid; at least one is observed."""
    grid: DirectionGrid
    observed: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.observed = validate_mask(self.observed, self.grid.num_pixels)

    @property
    def count(self) -> int:
        return int(self.observed.sum())

    @property
    def coverage(self) -> float:
        return self.count / self.grid.num_pixels

    @property
    def is_full(self) -> bool:
        return bool(self.observed.all())

    def at_height(self, height: int) -> "PixelMask":
        """
        Mask for a coarser grid: a pixel is observed when more than half of its
        solid angle is. Falls back to any overlap when that selects nothing.
        """
        if height == self.grid.height:
            return self
        fraction = area_downsample(self.observed[:, None].astype(np.float64), self.grid.height, height)[:, 0]
        observed = fraction > 0.5
        if not observed.any():
            observed = fraction > 0.0
        return PixelMask(equirect_grid(height), observed)


def full_mask(grid: DirectionGrid) -> PixelMask:
    return PixelMask(grid, np.ones(grid.num_pixels, dtype=bool))


def hemisphere_mask(grid: DirectionGrid, upper: bool = True) -> PixelMask:
    """Observe only the upper (y > 0) or lower (y < 0) hemisphere."""
    y = grid.directions[:, 1]
    return PixelMask(grid, y > 0 if upper else y < 0)


def crop_mask(grid: DirectionGrid, phi_range: Tuple[float, float],
              theta_range: Tuple[float, float] = (0.0, np.pi)) -> PixelMask:
    """
    Observe a rectangular crop of the panorama, as seen through a limited field of view.

    Args:
        grid: Target grid.
        phi_range: Azimuth interval [a, b] in radians; wraps through 0 when a > b.
        theta_range: Polar interval in radians.
    """
    a, b = (np.mod(v, 2.0 * np.pi) for v in phi_range)
    if a <= b:
        in_phi = (grid.phi >= a) & (grid.phi <= b)
    else:
        in_phi = (grid.phi >= a) | (grid.phi <= b)
    in_theta = (grid.theta >= theta_range[0]) & (grid.theta <= theta_range[1])
    return PixelMask(grid, in_phi & in_theta)


def mask_from_image(path: str, grid: DirectionGrid) -> PixelMask:
    """
    Read a grayscale PNG or PFM mask (values > 0.5 are observed).

    The image must be equirectangular with a height equal to, or an integer
    multiple of, the grid height.
    """
    suffix = os.path.splitext(path)[1].lower()
    if suffix == ".png":
        values = read_png_gray(path)
    elif suffix == ".pfm":
        values = read_pfm_array(path)
        values = values.mean(axis=2) if values.ndim == 3 else values
    else:
        raise ValidationError(f"Mask {path} must be a .png or .pfm file")
    values = np.asarray(values, dtype=np.float64)
    height, width = values.shape[:2]
    if width != 2 * height:
        raise ValidationError(f"Mask {path} is {width}x{height}, not equirectangular")
    if height != grid.height:
        values = area_downsample(values.reshape(-1, 1), height, grid.height)
    LOGGER.debug(f"Loaded mask {path} ({height}x{width})")
    return PixelMask(grid, values.reshape(-1) > 0.5)


# =============================================================================
# Losses and metrics

def masked_recon_loss(pred: np.ndarray, target: np.ndarray, sin_weights: np.ndarray) -> Tuple[float, np.ndarray]:
    """Sin-weighted squared error averaged over the given (masked) pixels, and its gradient."""
    diff = pred - target
    count = diff.shape[0]
    loss = float(np.sum(sin_weights * np.sum(diff * diff, axis=1)) / count)
    return loss, 2.0 * sin_weights[:, None] * diff / count


def cosine_loss(pred: np.ndarray, target: np.ndarray, sin_weights: np.ndarray,
                mask: Optional[np.ndarray] = None, eps: float = COSINE_EPS) -> float:
    """(1/|mask|) sum_{j in mask} sin(theta_j) (1 - <p_j, t_j> / (|p_j| |t_j| + eps))."""
    return cosine_loss_and_grad(pred, target, sin_weights, mask, eps)[0]


def cosine_loss_and_grad(pred: np.ndarray, target: np.ndarray, sin_weights: np.ndarray,
                         mask: Optional[np.ndarray] = None,
                         eps: float = COSINE_EPS) -> Tuple[float, np.ndarray]:
    """Cosine loss and its gradient w.r.t. pred (zero outside the mask)."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    mask = np.ones(pred.shape[0], dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    count = int(mask.sum())
    if count == 0:
        raise ValidationError("Cosine loss needs at least one masked pixel")

    p, t, w = pred[mask], target[mask], np.asarray(sin_weights)[mask]
    p_norm = np.linalg.norm(p, axis=1)
    t_norm = np.linalg.norm(t, axis=1)
    dot = np.sum(p * t, axis=1)
    denom = p_norm * t_norm + eps
    loss = float(np.sum(w * (1.0 - dot / denom)) / count)

    safe_p = np.where(p_norm > 0, p_norm, 1.0)
    d_denom = (t_norm / safe_p)[:, None] * p * (p_norm > 0)[:, None]
    d_cos = t / denom[:, None] - (dot / denom ** 2)[:, None] * d_denom
    grad = np.zeros_like(pred)
    grad[mask] = -(w / count)[:, None] * d_cos
    return loss, grad


def prior_loss(Z: np.ndarray) -> float:
    """Squared Frobenius norm of the latent."""
    Z = np.asarray(Z, dtype=np.float64)
    return float(np.sum(Z * Z))


def psnr(pred: np.ndarray, target: np.ndarray, peak: float = NORMALIZED_PEAK) -> float:
    """10 log10(peak^2 / MSE) with an unweighted MSE; +inf when identical."""
    mse = float(np.mean((np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(peak ** 2 / mse))


# =============================================================================
# Fitting

@dataclass
class FitResult:
    """
    Outcome of a latent fit.

    Attributes:
        Z (np.ndarray): Fitted 3 x N latent.
        psnr (float): PSNR over all pixels at the target resolution (normalized domain).
        psnr_masked (float): PSNR over observed pixels.
        psnr_unmasked (Optional[float]): PSNR over unobserved pixels; None for a full mask.
        reconstruction (np.ndarray): Decoded normalized log-HDR at the target resolution.
        loss_trace (List[Dict[str, float]]): Per-epoch loss components.
    """
    Z: np.ndarray
    psnr: float
    psnr_masked: float
    psnr_unmasked: Optional[float]
    reconstruction: np.ndarray = field(repr=False)
    loss_trace: List[Dict[str, float]] = field(default_factory=list, repr=False)

    def report(self) -> Dict[str, object]:
        return {
            "Z": self.Z.tolist(),
            "psnr": self.psnr,
            "psnr_masked": self.psnr_masked,
            "psnr_unmasked": self.psnr_unmasked,
            "loss_trace": self.loss_trace,
        }


def _capped_schedule(resolutions: Sequence[Tuple[int, int]], height: int) -> List[Tuple[int, int]]:
    """Clamp stage heights to the target height, which each stage must divide."""
    schedule = []
    for stage_height, epochs in resolutions:
        stage_height = min(int(stage_height), height)
        if height % stage_height:
            raise ValidationError(f"Target with H={height} cannot be downsampled to scheduled H={stage_height}")
        schedule.append((stage_height, int(epochs)))
    return schedule


def evaluate_fit(checkpoint: Checkpoint, Z: np.ndarray, target: EnvironmentMap,
                 mask: PixelMask, floor: float = 1e-8) -> Tuple[float, float, Optional[float], np.ndarray]:
    """Full, masked and unmasked PSNR of the decoded Z against the normalized target."""
    truth = normalize_log(target.rgb, checkpoint.stats, floor)
    recon = checkpoint.field_model.decode(Z, target.grid)
    observed = mask.observed
    unmasked = None if mask.is_full else psnr(recon[~observed], truth[~observed])
    return psnr(recon, truth), psnr(recon[observed], truth[observed]), unmasked, recon


def fit_loss_and_grad(field_model, Z: np.ndarray, dirs: np.ndarray, truth: np.ndarray, weights: np.ndarray,
                      rho: float, gamma: float) -> Tuple[Dict[str, float], np.ndarray]:
    """
    Test-time loss recon + rho * cosine + gamma * ||Z||_F^2 over observed pixels, and dL/dZ.

    Args:
        field_model (ReniField): Frozen field.
        Z (np.ndarray): 3 x N latent.
        dirs (np.ndarray): Observed directions (P, 3).
        truth (np.ndarray): Normalized log-HDR values at `dirs`.
        weights (np.ndarray): sin(theta) of each observed pixel.

    Returns:
        Tuple[Dict[str, float], np.ndarray]: Loss and its terms, and the latent gradient.
    """
    evaluation = field_model.forward(Z, dirs)
    recon, grad = masked_recon_loss(evaluation.output, truth, weights)
    cosine, cos_grad = cosine_loss_and_grad(evaluation.output, truth, weights)
    prior = prior_loss(Z)
    terms = {"loss": recon + rho * cosine + gamma * prior, "recon": recon, "cosine": cosine, "prior": prior}

    _, grad_Z = field_model.backward(evaluation, grad + rho * cos_grad)
    return terms, grad_Z + 2.0 * gamma * Z


def fit(checkpoint: Checkpoint, target: EnvironmentMap, mask: Optional[PixelMask] = None,
        cfg: Optional[FitConfig] = None, init_latent: Optional[np.ndarray] = None,
        image_id: str = "target") -> FitResult:
    """
    Optimize a latent code for a (partially) observed environment map.

    Minimizes recon + rho * cosine + gamma * ||Z||_F^2 over the observed
    pixels, with the network frozen, Z starting at zero (the mean map) and the
    same progressive resolution schedule as training.

    Args:
        checkpoint: Trained field.
        target: Linear HDR map; normalized with the checkpoint's stats.
        mask: Observed pixels at the target's resolution; defaults to all.
        cfg: Fitting hyperparameters; an empty schedule reuses the checkpoint's.
        init_latent: Starting latent instead of zero.
        image_id: Name used in diagnostics.

    Returns:
        FitResult: Fitted latent, PSNRs and the loss trace.

    Raises:
        ValidationError: Mask of the wrong size or with no observed pixel.
        NonFiniteLossError: If the loss diverges.
    """
    cfg = (cfg or FitConfig()).with_schedule(checkpoint.resolutions())
    mask = mask or full_mask(target.grid)
    if mask.grid.height != target.height:
        raise ValidationError(f"Mask H={mask.grid.height} does not match target H={target.height}")
    field_model = checkpoint.field_model
    floor = float(checkpoint.config.get("floor", 1e-8))

    Z = field_model.zero_latent() if init_latent is None else validate_latent(init_latent).copy()
    if Z.shape != (3, field_model.n_latent):
        raise ValidationError(f"Initial latent {Z.shape} does not match N={field_model.n_latent}")
    state = AdamState.for_params([Z])
    schedule = _capped_schedule(cfg.resolutions, target.height)
    lr_schedule = cfg.lr_schedule()

    trace: List[Dict[str, float]] = []
    epoch = 0
    for height, epochs in schedule:
        stage_mask = mask.at_height(height)
        grid = stage_mask.grid
        observed = stage_mask.observed
        dirs = grid.directions[observed]
        weights = grid.sin_weights[observed]
        truth = normalize_log(area_downsample(target.rgb, target.height, height), checkpoint.stats, floor)[observed]
        for _ in range(epochs):
            lr = lr_at(lr_schedule, epoch)
            terms, grad_Z = fit_loss_and_grad(field_model, Z, dirs, truth, weights, cfg.rho, cfg.gamma)
            loss = terms["loss"]
            check_finite_loss(loss, epoch, image_id)
            adam_step(state, [Z], [grad_Z], lr)

            trace.append({"epoch": epoch, "resolution": height, **terms, "lr": lr})
            if epoch % cfg.log_every == 0:
                LOGGER.debug(f"fit {image_id} epoch {epoch} H={height} loss={loss:.6f}")
            epoch += 1

    full, masked, unmasked, recon = evaluate_fit(checkpoint, Z, target, mask, floor)
    LOGGER.info(
        f"Fitted {image_id}: PSNR {full:.2f} dB (observed {masked:.2f} dB"
        + (f", unobserved {unmasked:.2f} dB)" if unmasked is not None else ")")
    )
    return FitResult(Z, full, masked, unmasked, recon, trace)


# =============================================================================
# Alignment

def align_rotation(Z1: np.ndarray, Z2: np.ndarray) -> Tuple[float, float]:
    """
    Closed-form y-axis Procrustes alignment of two latent codes.

    Finds psi minimizing ||R_y(psi) Z1 - Z2||_F and the relative error
    E = ||R_y(psi) Z1 - Z2||_F / ||Z2||_F.

    Raises:
        ValidationError: If the shapes differ or Z2 is zero.
    """
    Z1 = validate_latent(Z1)
    Z2 = validate_latent(Z2)
    if Z1.shape != Z2.shape:
        raise ValidationError(f"Cannot align codes of shapes {Z1.shape} and {Z2.shape}")
    norm2 = np.linalg.norm(Z2)
    if norm2 == 0.0:
        raise ValidationError("Relative alignment error is undefined for a zero target code")
    x1, z1 = Z1[0], Z1[2]
    x2, z2 = Z2[0], Z2[2]
    psi = float(np.arctan2(np.sum(x1 * z2 - z1 * x2), np.sum(x1 * x2 + z1 * z2)))
    error = float(np.linalg.norm(y_rotation_matrix(psi) @ Z1 - Z2) / norm2)
    return psi, error
