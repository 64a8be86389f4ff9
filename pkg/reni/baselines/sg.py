#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Spherical Gaussian Baseline

Lobes G(d) = mu exp(lambda (<d, xi> - 1)) with six degrees of freedom each
(RGB amplitude, unit axis, sharpness), fitted per map by Adam on the
sin(theta)-weighted squared error. Sharpness is optimized as log(lambda),
amplitudes through a softplus, and axes are renormalized after every step.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
from scipy.special import expit

from reni.config import SGFitConfig
from reni.hdrio import DEFAULT_FLOOR, EnvironmentMap
from reni.optim import AdamState, adam_step, lr_at
from reni.utils.validation import ValidationError, check_finite_loss

LOGGER = logging.getLogger(__name__)

MIN_AMPLITUDE = 1e-6


@dataclass
class SGLobes:
    """
    k spherical Gaussian lobes.

    Attributes:
        axes (np.ndarray): (k, 3) unit lobe directions xi.
        sharpness (np.ndarray): (k,) positive lambda.
        amplitudes (np.ndarray): (k, 3) RGB mu.
    """
    axes: np.ndarray = field(repr=False)
    sharpness: np.ndarray = field(repr=False)
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.axes = np.asarray(self.axes, dtype=np.float64).reshape(-1, 3)
        self.sharpness = np.asarray(self.sharpness, dtype=np.float64).reshape(-1)
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.float64).reshape(-1, 3)
        k = self.axes.shape[0]
        if self.sharpness.shape != (k,) or self.amplitudes.shape != (k, 3):
            raise ValidationError(
                f"Lobe arrays disagree: axes {self.axes.shape}, sharpness {self.sharpness.shape}, "
                f"amplitudes {self.amplitudes.shape}"
            )
        if np.any(self.sharpness <= 0):
            raise ValidationError("Lobe sharpness must be positive")
        if k and not np.allclose(np.linalg.norm(self.axes, axis=1), 1.0, atol=1e-9):
            raise ValidationError("Lobe axes must be unit vectors")

    @property
    def count(self) -> int:
        return self.axes.shape[0]

    @property
    def dimension(self) -> int:
        return 6 * self.count

    def to_dict(self) -> Dict[str, Any]:
        return {
            "type": "sg",
            "axes": self.axes.tolist(),
            "sharpness": self.sharpness.tolist(),
            "amplitudes": self.amplitudes.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SGLobes":
        return cls(data["axes"], data["sharpness"], data["amplitudes"])


def _kernel(lobes: SGLobes, dirs: np.ndarray) -> np.ndarray:
    """(P, k) values exp(lambda (<d, xi> - 1))."""
    return np.exp(lobes.sharpness[None, :] * (dirs @ lobes.axes.T - 1.0))


def sg_eval(lobes: SGLobes, dirs: np.ndarray) -> np.ndarray:
    """Sum of lobes at the given directions, shape (P, 3)."""
    dirs = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    if lobes.count == 0:
        return np.zeros((dirs.shape[0], 3))
    return _kernel(lobes, dirs) @ lobes.amplitudes


def fibonacci_sphere(count: int) -> np.ndarray:
    """count roughly uniform unit vectors on the sphere."""
    index = np.arange(count) + 0.5
    y = 1.0 - 2.0 * index / count
    radius = np.sqrt(1.0 - y * y)
    angle = np.pi * (3.0 - np.sqrt(5.0)) * index
    return np.stack([radius * np.sin(angle), y, radius * np.cos(angle)], axis=1)


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _softplus_inverse(y: np.ndarray) -> np.ndarray:
    y = np.maximum(y, MIN_AMPLITUDE)
    return y + np.log(-np.expm1(-y))


def sg_fit(env: EnvironmentMap, k: int, cfg: Optional[SGFitConfig] = None,
           log_domain: bool = False, floor: float = DEFAULT_FLOOR) -> SGLobes:
    """
    Fit k lobes to a map by gradient descent.

    Args:
        env: Target linear HDR map.
        k: Number of lobes (>= 1).
        cfg: Step count and learning-rate schedule.
        log_domain: Compare ln(max(., floor)) of prediction and target instead of linear values.
        floor: Radiance floor for the log-domain loss.

    Returns:
        SGLobes: Fitted lobes.

    Raises:
        ValidationError: If k < 1.
        NonFiniteLossError: If the loss diverges.
    """
    if k < 1:
        raise ValidationError(f"SG fit needs at least one lobe, got k={k}")
    cfg = cfg or SGFitConfig()
    grid = env.grid
    dirs = grid.directions
    weights = grid.sin_weights
    target = np.log(np.maximum(env.rgb, floor)) if log_domain else env.rgb
    mean_color = np.sum(weights[:, None] * env.rgb, axis=0) / np.sum(weights)

    axes = fibonacci_sphere(k)
    log_sharpness = np.full(k, np.log(cfg.init_sharpness))
    raw_amplitudes = np.tile(_softplus_inverse(mean_color), (k, 1))
    params = [axes, log_sharpness, raw_amplitudes]
    state = AdamState.for_params(params)
    schedule = cfg.lr_schedule()
    num_pixels = grid.num_pixels

    for step in range(cfg.steps):
        sharpness = np.exp(log_sharpness)
        amplitudes = _softplus(raw_amplitudes)
        cosine = dirs @ axes.T
        kernel = np.exp(sharpness[None, :] * (cosine - 1.0))
        pred = kernel @ amplitudes

        if log_domain:
            clipped = np.maximum(pred, floor)
            diff = np.log(clipped) - target
            grad_pred = 2.0 * weights[:, None] * diff / num_pixels * (pred > floor) / clipped
        else:
            diff = pred - target
            grad_pred = 2.0 * weights[:, None] * diff / num_pixels
        loss = float(np.sum(weights * np.sum(diff * diff, axis=1)) / num_pixels)
        check_finite_loss(loss, step, "sg")

        grad_amplitudes = kernel.T @ grad_pred
        grad_kernel = (grad_pred @ amplitudes.T) * kernel
        grad_log_sharpness = sharpness * np.sum(grad_kernel * (cosine - 1.0), axis=0)
        grad_axes = sharpness[:, None] * (grad_kernel.T @ dirs)
        grad_raw = grad_amplitudes * expit(raw_amplitudes)

        adam_step(state, params, [grad_axes, grad_log_sharpness, grad_raw], lr_at(schedule, step))
        axes /= np.linalg.norm(axes, axis=1, keepdims=True)

        if step % 250 == 0:
            LOGGER.debug(f"SG fit k={k} step {step} loss={loss:.6e}")

    return SGLobes(axes, np.exp(log_sharpness), _softplus(raw_amplitudes))
