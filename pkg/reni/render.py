#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Render Module

Normalized Blinn-Phong environment shading of an orthographic unit sphere and
inverse rendering of lighting, either through the field's latent code or in
closed form with spherical harmonics.

The render is linear in the environment radiance E. For covered pixel q and
texel j with solid angle dOmega_j:

    L_q = sum_j dOmega_j E_j [ (Kd / pi) max(0, n.l) + Ks alpha max(0, n.h)^n max(0, n.l) ]

so shading is a (Q x P) operator applied per channel, held in memory when it
is small enough and otherwise rebuilt in row chunks.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import lstsq

from reni.baselines.sh import SHCoeffs, sh_basis, sh_eval
from reni.checkpoint import Checkpoint
from reni.config import MaterialConfig, RenderFitConfig
from reni.fitting import cosine_loss_and_grad, prior_loss, psnr
from reni.hdrio import EnvironmentMap, denormalize_log
from reni.optim import AdamState, adam_step, lr_at
from reni.sphgeom import DirectionGrid, equirect_grid
from reni.utils.data_processing import write_png
from reni.utils.validation import ValidationError, check_finite_loss

LOGGER = logging.getLogger(__name__)

VIEW = np.array([0.0, 0.0, 1.0])
DEFAULT_IMAGE_SIZE = 128
MAX_CACHE_BYTES = 512 * 1024 ** 2
CHUNK_ROWS = 1024
GAMMA = 2.2


def bp_normalization(shininess: float) -> float:
    """Energy normalization alpha = (n + 2) / (4 pi (2 - exp(-n / 2)))."""
    return (shininess + 2.0) / (4.0 * np.pi * (2.0 - np.exp(-shininess / 2.0)))


@dataclass(frozen=True)
class RenderScene:
    """Fixed orthographic camera looking down -z at a unit sphere, S x S pixels."""
    material: MaterialConfig = field(default_factory=MaterialConfig)
    size: int = DEFAULT_IMAGE_SIZE

    def __post_init__(self):
        if self.size < 1:
            raise ValidationError(f"Image size must be positive, got {self.size}")

    def coverage(self) -> np.ndarray:
        """(S, S) boolean mask of pixels that see the sphere."""
        u, v = self._image_plane()
        return u * u + v * v < 1.0

    def normals(self) -> np.ndarray:
        """(Q, 3) unit normals of covered pixels in row-major order."""
        u, v = self._image_plane()
        covered = u * u + v * v < 1.0
        u, v = u[covered], v[covered]
        return np.stack([u, v, np.sqrt(1.0 - u * u - v * v)], axis=1)

    def _image_plane(self) -> Tuple[np.ndarray, np.ndarray]:
        centers = (np.arange(self.size) + 0.5) / self.size * 2.0 - 1.0
        u, v = np.meshgrid(centers, -centers, indexing="xy")
        return u, v


@dataclass
class RenderImage:
    """
    S x S linear HDR render.

    Attributes:
        rgb (np.ndarray): (S, S, 3) radiance; zero on background pixels.
        coverage (np.ndarray): (S, S) True where the sphere is visible.
    """
    rgb: np.ndarray = field(repr=False)
    coverage: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.rgb = np.asarray(self.rgb, dtype=np.float64)
        self.coverage = np.asarray(self.coverage, dtype=bool)
        if self.rgb.shape != self.coverage.shape + (3,):
            raise ValidationError(f"Render {self.rgb.shape} does not match coverage {self.coverage.shape}")

    @property
    def covered_rgb(self) -> np.ndarray:
        return self.rgb[self.coverage]

    @classmethod
    def from_covered(cls, values: np.ndarray, coverage: np.ndarray) -> "RenderImage":
        rgb = np.zeros(coverage.shape + (3,))
        rgb[coverage] = values
        return cls(rgb, coverage)


class ShadingOperator:
    """
    Linear map from environment radiance (P, C) to covered-pixel radiance (Q, C).

    Args:
        scene (RenderScene): Camera, sphere and material.
        grid (DirectionGrid): Environment map grid.
        max_cache_bytes (int): Keep the transport matrices in memory below this size.
    """

    def __init__(self, scene: RenderScene, grid: DirectionGrid, max_cache_bytes: int = MAX_CACHE_BYTES):
        self.scene = scene
        self.grid = grid
        self.coverage = scene.coverage()
        self.normals = scene.normals()
        self.kd = np.asarray(scene.material.kd, dtype=np.float64)
        self.ks = float(scene.material.ks)
        self.shininess = float(scene.material.shininess)
        self.alpha = bp_normalization(self.shininess)

        halfway = grid.directions + VIEW
        self.halfway = halfway / np.linalg.norm(halfway, axis=1, keepdims=True)
        self.solid_angles = grid.solid_angles

        self._cache: Optional[Tuple[np.ndarray, np.ndarray]] = None
        if 2 * self.num_covered * grid.num_pixels * 8 <= max_cache_bytes:
            self._cache = self._transport(slice(None))
        else:
            LOGGER.debug(f"Shading {self.num_covered}x{grid.num_pixels} in chunks of {CHUNK_ROWS} rows")

    @property
    def num_covered(self) -> int:
        return self.normals.shape[0]

    def _transport(self, rows: slice) -> Tuple[np.ndarray, np.ndarray]:
        """Diffuse and specular transport blocks for a range of covered pixels."""
        normals = self.normals[rows]
        cos_l = np.maximum(normals @ self.grid.directions.T, 0.0)
        cos_h = np.maximum(normals @ self.halfway.T, 0.0)
        diffuse = cos_l * self.solid_angles
        specular = cos_h ** self.shininess * diffuse
        return diffuse, specular

    def _blocks(self):
        if self._cache is not None:
            yield slice(None), self._cache
            return
        for start in range(0, self.num_covered, CHUNK_ROWS):
            rows = slice(start, min(start + CHUNK_ROWS, self.num_covered))
            yield rows, self._transport(rows)

    def _channel_weights(self, kd: np.ndarray) -> Tuple[np.ndarray, float]:
        return kd / np.pi, self.ks * self.alpha

    def apply(self, env_rgb: np.ndarray, kd: Optional[np.ndarray] = None) -> np.ndarray:
        """
        Shade covered pixels.

        Args:
            env_rgb: (P, C) radiance per texel.
            kd: Per-channel diffuse albedo of length C; the scene's by default.

        Returns:
            np.ndarray: (Q, C) radiance.
        """
        env_rgb = np.asarray(env_rgb, dtype=np.float64)
        diffuse_w, specular_w = self._channel_weights(self.kd if kd is None else np.asarray(kd))
        out = np.empty((self.num_covered, env_rgb.shape[1]))
        for rows, (diffuse, specular) in self._blocks():
            out[rows] = (diffuse @ env_rgb) * diffuse_w + specular_w * (specular @ env_rgb)
        return out

    def transpose(self, pixel_grad: np.ndarray) -> np.ndarray:
        """Adjoint of apply: gradient (P, 3) w.r.t. env radiance from (Q, 3) pixel gradients."""
        pixel_grad = np.asarray(pixel_grad, dtype=np.float64)
        diffuse_w, specular_w = self._channel_weights(self.kd)
        out = np.zeros((self.grid.num_pixels, pixel_grad.shape[1]))
        for rows, (diffuse, specular) in self._blocks():
            block = pixel_grad[rows]
            out += (diffuse.T @ block) * diffuse_w + specular_w * (specular.T @ block)
        return out


def shade(scene: RenderScene, env: EnvironmentMap, operator: Optional[ShadingOperator] = None) -> RenderImage:
    """Render the sphere lit by an environment map."""
    operator = operator or ShadingOperator(scene, env.grid)
    if operator.grid.height != env.height:
        raise ValidationError(f"Shading operator built for H={operator.grid.height}, map has H={env.height}")
    return RenderImage.from_covered(operator.apply(env.rgb), operator.coverage)


def render_psnr(rendered: RenderImage, target: RenderImage) -> float:
    """PSNR over covered pixels with the target's maximum as peak."""
    truth = target.covered_rgb
    peak = float(truth.max())
    if peak <= 0:
        peak = 1.0
    return psnr(rendered.covered_rgb, truth, peak)


@dataclass
class InversionResult:
    """Lighting recovered from a render."""
    Z: Optional[np.ndarray]
    env: EnvironmentMap = field(repr=False)
    rendered: RenderImage = field(repr=False)
    psnr: float = 0.0
    loss_trace: List[Dict[str, float]] = field(default_factory=list, repr=False)


def render_loss_and_grad(field_model, Z: np.ndarray, grid: DirectionGrid, operator: ShadingOperator,
                         truth: np.ndarray, rho: float, gamma: float) -> Tuple[Dict[str, float], np.ndarray]:
    """
    Inverse-rendering loss of latent Z against covered target pixels, and dL/dZ.

    The field output is denormalized without the HDR decode clamp here, so
    dE/dv = E * span / 2 everywhere.
    """
    evaluation = field_model.forward(Z, grid)
    env_rgb = denormalize_log(evaluation.output, field_model.stats)
    pred = operator.apply(env_rgb)

    count = truth.shape[0]
    diff = pred - truth
    recon = float(np.sum(diff * diff) / count)
    cosine, cos_grad = cosine_loss_and_grad(pred, truth, np.ones(count))
    prior = prior_loss(Z)
    terms = {"loss": recon + rho * cosine + gamma * prior, "recon": recon, "cosine": cosine, "prior": prior}

    grad_pred = 2.0 * diff / count + rho * cos_grad
    grad_out = operator.transpose(grad_pred) * env_rgb * (0.5 * field_model.stats.span)
    _, grad_Z = field_model.backward(evaluation, grad_out)
    return terms, grad_Z + 2.0 * gamma * Z


def invert_lighting(checkpoint: Checkpoint, target: RenderImage, scene: RenderScene,
                    cfg: Optional[RenderFitConfig] = None,
                    init_latent: Optional[np.ndarray] = None) -> InversionResult:
    """
    Recover a latent code whose decoded lighting reproduces a render.

    Decodes the field to linear HDR, shades, and minimizes the unweighted
    squared error plus rho * cosine + gamma * ||Z||_F^2 over covered pixels
    with Adam on Z only.

    Raises:
        ValidationError: If the target does not match the scene's image size.
        NonFiniteLossError: If the loss diverges.
    """
    cfg = cfg or RenderFitConfig()
    if target.coverage.shape != (scene.size, scene.size):
        raise ValidationError(f"Target is {target.coverage.shape}, scene renders {scene.size}x{scene.size}")
    field_model = checkpoint.field_model
    grid = equirect_grid(cfg.env_height)
    operator = ShadingOperator(scene, grid)
    truth = target.covered_rgb

    Z = field_model.zero_latent() if init_latent is None else np.array(init_latent, dtype=np.float64)
    state = AdamState.for_params([Z])
    schedule = cfg.lr_schedule()
    trace: List[Dict[str, float]] = []

    for epoch in range(cfg.epochs):
        terms, grad_Z = render_loss_and_grad(field_model, Z, grid, operator, truth, cfg.rho, cfg.gamma)
        loss = terms["loss"]
        check_finite_loss(loss, epoch, "render")
        lr = lr_at(schedule, epoch)
        adam_step(state, [Z], [grad_Z], lr)

        trace.append({"epoch": epoch, **terms, "lr": lr})
        if epoch % cfg.log_every == 0:
            LOGGER.info(f"invert epoch {epoch}/{cfg.epochs} loss={loss:.6e}")

    env = field_model.decode_hdr(Z, grid)
    rendered = RenderImage.from_covered(operator.apply(env.rgb), operator.coverage)
    result = InversionResult(Z, env, rendered, render_psnr(rendered, target), trace)
    LOGGER.info(f"Inverse rendering finished: re-render PSNR {result.psnr:.2f} dB")
    return result


def sh_invert_lighting(target: RenderImage, scene: RenderScene, l_max: int,
                       env_height: int = 64) -> Tuple[SHCoeffs, InversionResult]:
    """
    Closed-form SH lighting from a render.

    The render is linear in the SH coefficients, so each channel is solved by
    least squares over covered pixels. Diffuse-only scenes leave the high
    bands unconstrained; the minimum-norm solution is returned.
    """
    grid = equirect_grid(env_height)
    operator = ShadingOperator(scene, grid)
    basis = sh_basis(grid.directions, l_max)
    truth = target.covered_rgb
    coefficients = np.empty((basis.shape[1], 3))
    for c in range(3):
        design = operator.apply(basis, kd=np.full(basis.shape[1], operator.kd[c]))
        coefficients[:, c], _, rank, _ = lstsq(design, truth[:, c])
        LOGGER.debug(f"SH inversion channel {c}: rank {rank} of {basis.shape[1]}")
    coeffs = SHCoeffs(l_max, coefficients)

    raw_env = sh_eval(coeffs, grid.directions)
    rendered = RenderImage.from_covered(operator.apply(raw_env), operator.coverage)
    env = EnvironmentMap(grid, np.maximum(raw_env, 0.0))
    return coeffs, InversionResult(None, env, rendered, render_psnr(rendered, target))


def tone_map(rgb: np.ndarray, gamma: float = GAMMA) -> np.ndarray:
    """Reinhard x / (1 + x) followed by display gamma."""
    rgb = np.maximum(np.asarray(rgb, dtype=np.float64), 0.0)
    return (rgb / (1.0 + rgb)) ** (1.0 / gamma)


def write_preview(image: np.ndarray, path: str) -> None:
    """Tone-mapped PNG of an (rows, cols, 3) HDR image."""
    write_png(tone_map(image), path)
