#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Spherical Geometry Module

Equirectangular pixel/direction mapping, rotations about the vertical (y) axis
and the sin(theta) area weights used by every loss on the sphere.

Conventions: the world frame is y-up. Pixel (row i, col j) of an H x 2H image
has polar angle theta = pi (i + 0.5) / H measured from +y and azimuth
phi = 2 pi (j + 0.5) / W, and maps to d = (sin theta sin phi, cos theta,
sin theta cos phi). Pixel centres never touch the poles, so sin(theta) > 0.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from reni.utils.validation import ValidationError

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class DirectionGrid:
    """
    Row-major grid of unit directions for an equirectangular image.

    Attributes:
        height (int): Rows H.
        width (int): Columns W = 2H.
        directions (np.ndarray): (P, 3) unit vectors, P = 2H^2.
        sin_weights (np.ndarray): (P,) values of sin(theta).
        theta (np.ndarray): (P,) polar angles from +y.
        phi (np.ndarray): (P,) azimuths.
    """
    height: int
    width: int
    directions: np.ndarray = field(repr=False)
    sin_weights: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)

    @property
    def num_pixels(self) -> int:
        return self.height * self.width

    @property
    def pixel_area(self) -> float:
        """Parameter-space area (pi / H)(2 pi / W) of one pixel."""
        return (np.pi / self.height) * (2.0 * np.pi / self.width)

    @property
    def solid_angles(self) -> np.ndarray:
        """Per-pixel solid angle sin(theta) dtheta dphi."""
        return self.sin_weights * self.pixel_area


@dataclass(frozen=True)
class YRotation:
    """Rotation by angle psi (radians) about the vertical y axis."""
    angle: float

    @property
    def matrix(self) -> np.ndarray:
        return y_rotation_matrix(self.angle)

    def compose(self, other: "YRotation") -> "YRotation":
        return YRotation(self.angle + other.angle)

    def inverse(self) -> "YRotation":
        return YRotation(-self.angle)


def y_rotation_matrix(angle: float) -> np.ndarray:
    """
    Matrix of R_y(psi): (x, z) -> (cos psi x - sin psi z, sin psi x + cos psi z).

    Under this convention the azimuth of R_y(psi) d is phi(d) - psi.
    """
    c, s = np.cos(angle), np.sin(angle)
    return np.array([
        [c, 0.0, -s],
        [0.0, 1.0, 0.0],
        [s, 0.0, c],
    ])


def x_rotation_matrix(angle: float) -> np.ndarray:
    """Matrix of a rotation about the x axis (used to witness broken SO(3) invariance)."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([
        [1.0, 0.0, 0.0],
        [0.0, c, -s],
        [0.0, s, c],
    ])


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Draw a uniformly distributed rotation matrix from SO(3)."""
    return Rotation.random(random_state=rng).as_matrix()


@lru_cache(maxsize=16)
def equirect_grid(height: int) -> DirectionGrid:
    """
    Build the direction grid of an equirectangular image with H rows.

    Args:
        height (int): Number of rows H >= 1; width is 2H.

    Returns:
        DirectionGrid: Directions and sin(theta) weights in row-major order.

    Raises:
        ValidationError: If height < 1.
    """
    if int(height) != height or height < 1:
        raise ValidationError(f"Grid height must be a positive integer, got {height}")
    height = int(height)
    width = 2 * height

    theta_1d = np.pi * (np.arange(height) + 0.5) / height
    phi_1d = 2.0 * np.pi * (np.arange(width) + 0.5) / width
    theta, phi = np.meshgrid(theta_1d, phi_1d, indexing="ij")
    theta = theta.reshape(-1)
    phi = phi.reshape(-1)

    sin_theta = np.sin(theta)
    directions = np.stack([sin_theta * np.sin(phi), np.cos(theta), sin_theta * np.cos(phi)], axis=1)

    for arr in (directions, sin_theta, theta, phi):
        arr.setflags(write=False)
    return DirectionGrid(height, width, directions, sin_theta, theta, phi)


def rotate_direction(rotation: YRotation, d: np.ndarray) -> np.ndarray:
    """Apply R_y(psi) to a direction of shape (3,) or a batch of shape (P, 3)."""
    return np.asarray(d, dtype=np.float64) @ rotation.matrix.T


def rotate_latent(rotation: YRotation, Z: np.ndarray) -> np.ndarray:
    """Apply R_y(psi) to every column of a 3 x N latent code."""
    return rotation.matrix @ np.asarray(Z, dtype=np.float64)


def directions_to_angles(dirs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Return (theta, phi) for directions in the y-up frame, phi in [0, 2 pi)."""
    dirs = np.asarray(dirs, dtype=np.float64)
    theta = np.arccos(np.clip(dirs[..., 1], -1.0, 1.0))
    phi = np.mod(np.arctan2(dirs[..., 0], dirs[..., 2]), 2.0 * np.pi)
    return theta, phi


def area_downsample(values: np.ndarray, height_from: int, height_to: int) -> np.ndarray:
    """
    Downsample an equirectangular image by solid-angle weighted block averaging.

    Args:
        values (np.ndarray): (P, C) row-major pixels of an image with height_from rows.
        height_from (int): Source height.
        height_to (int): Target height; must divide height_from.

    Returns:
        np.ndarray: (2 height_to^2, C) downsampled pixels.
    """
    if height_to == height_from:
        return np.array(values, dtype=np.float64, copy=True)
    if height_to > height_from or height_from % height_to:
        raise ValidationError(f"Cannot area-downsample from H={height_from} to H={height_to}")

    factor = height_from // height_to
    src = np.asarray(values, dtype=np.float64)
    channels = src.shape[1]
    image = src.reshape(height_from, 2 * height_from, channels)
    weights = equirect_grid(height_from).sin_weights.reshape(height_from, 2 * height_from, 1)

    shape = (height_to, factor, 2 * height_to, factor)
    num = (image * weights).reshape(*shape, channels).sum(axis=(1, 3))
    den = np.broadcast_to(weights, image.shape[:2] + (1,)).reshape(*shape, 1).sum(axis=(1, 3))
    return (num / den).reshape(-1, channels)
