#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Spherical Harmonics Baseline

Real, orthonormal spherical harmonics without the Condon-Shortley phase, in the
renderer's y-up frame (theta from +y, phi = atan2(x, z)), so that the l = 1
band is proportional to (d_x, d_y, d_z). Coefficients are fitted in closed form
by sin(theta)-weighted linear least squares.
"""

import logging
from dataclasses import dataclass, field
from math import factorial
from typing import Any, Dict

import numpy as np
from scipy.linalg import lstsq
from scipy.special import lpmv

from reni.hdrio import EnvironmentMap
from reni.sphgeom import DirectionGrid, directions_to_angles
from reni.utils.validation import ValidationError, validate_directions

LOGGER = logging.getLogger(__name__)


def sh_terms(l_max: int) -> int:
    """Number (l_max + 1)^2 of basis functions up to order l_max."""
    return (l_max + 1) ** 2


def sh_index(l: int, m: int) -> int:
    return l * l + l + m


def _normalization(l: int, m: int) -> float:
    return np.sqrt((2 * l + 1) / (4.0 * np.pi) * factorial(l - m) / factorial(l + m))


def sh_basis(dirs: np.ndarray, l_max: int) -> np.ndarray:
    """
    Evaluate every real SH basis function up to l_max.

    Args:
        dirs (np.ndarray): (3,) or (P, 3) unit directions.
        l_max (int): Maximum order.

    Returns:
        np.ndarray: (P, (l_max + 1)^2) basis values, column l^2 + l + m for Y_l^m.
    """
    if l_max < 0:
        raise ValidationError(f"SH order must be non-negative, got {l_max}")
    dirs = validate_directions(dirs, tol=1e-6)
    theta, phi = directions_to_angles(dirs)
    cos_theta = np.cos(theta)
    basis = np.empty((dirs.shape[0], sh_terms(l_max)))
    for l in range(l_max + 1):
        for m in range(l + 1):
            # lpmv carries the (-1)^m phase; cancel it
            legendre = (-1.0) ** m * lpmv(m, l, cos_theta) * _normalization(l, m)
            if m == 0:
                basis[:, sh_index(l, 0)] = legendre
            else:
                basis[:, sh_index(l, m)] = np.sqrt(2.0) * legendre * np.cos(m * phi)
                basis[:, sh_index(l, -m)] = np.sqrt(2.0) * legendre * np.sin(m * phi)
    return basis


@dataclass
class SHCoeffs:
    """RGB spherical harmonic coefficients, shape ((l_max + 1)^2, 3)."""
    l_max: int
    coefficients: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=np.float64)
        if self.coefficients.shape != (sh_terms(self.l_max), 3):
            raise ValidationError(
                f"Order {self.l_max} needs {sh_terms(self.l_max)}x3 coefficients, got {self.coefficients.shape}"
            )
        if not np.all(np.isfinite(self.coefficients)):
            raise ValidationError("SH coefficients contain non-finite values")

    @property
    def dimension(self) -> int:
        return 3 * sh_terms(self.l_max)

    def to_dict(self) -> Dict[str, Any]:
        return {"type": "sh", "l_max": self.l_max, "coefficients": self.coefficients.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SHCoeffs":
        return cls(int(data["l_max"]), np.asarray(data["coefficients"]))


def sh_eval(coeffs: SHCoeffs, dirs: np.ndarray) -> np.ndarray:
    """RGB values (P, 3) of the expansion at the given directions."""
    return sh_basis(dirs, coeffs.l_max) @ coeffs.coefficients


def sh_fit_values(grid: DirectionGrid, values: np.ndarray, l_max: int) -> SHCoeffs:
    """
    Weighted least-squares SH fit of per-pixel values on an equirectangular grid.

    Raises:
        ValidationError: If the weighted design matrix is rank deficient.
    """
    values = np.asarray(values, dtype=np.float64).reshape(grid.num_pixels, -1)
    basis = sh_basis(grid.directions, l_max)
    sqrt_w = np.sqrt(grid.sin_weights)[:, None]
    solution, _, rank, _ = lstsq(sqrt_w * basis, sqrt_w * values)
    if rank < basis.shape[1]:
        raise ValidationError(
            f"SH order {l_max} is rank deficient on an H={grid.height} grid (rank {rank} < {basis.shape[1]})"
        )
    return SHCoeffs(l_max, solution)


def sh_fit(env: EnvironmentMap, l_max: int) -> SHCoeffs:
    """Fit RGB SH coefficients of order l_max to a linear HDR map."""
    coeffs = sh_fit_values(env.grid, env.rgb, l_max)
    LOGGER.debug(f"Fitted SH order {l_max} to H={env.height} map")
    return coeffs
