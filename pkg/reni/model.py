#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Conditional Spherical Field Module

Couples an invariant transform with the SIREN network and the dataset's
normalization stats. Given a latent code Z it decodes normalized log-HDR values
for any set of directions and pulls loss gradients back to Z and the weights.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np

from reni import siren
from reni.equivariant import BaseTransform, EquivarianceMode, InvariantFeatures, get_transform
from reni.hdrio import EnvironmentMap, NormStats, denormalize_log
from reni.siren import FieldGradients, FieldParams
from reni.sphgeom import DirectionGrid
from reni.utils.validation import ValidationError

LOGGER = logging.getLogger(__name__)


def vec_to_latent(vec: np.ndarray, n_latent: int) -> np.ndarray:
    """Reshape a flat 3N vector to a 3 x N code, entry (r, n) = vec[3n + r]."""
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (3 * n_latent,):
        raise ValidationError(f"Latent vector has shape {vec.shape}, expected ({3 * n_latent},)")
    return vec.reshape(n_latent, 3).T.copy()


def latent_to_vec(Z: np.ndarray) -> np.ndarray:
    """Inverse of vec_to_latent (column-major flattening)."""
    return np.asarray(Z, dtype=np.float64).T.reshape(-1).copy()


@dataclass
class FieldEvaluation:
    """Forward-pass context kept for the backward pass."""
    dirs: np.ndarray = field(repr=False)
    Z: np.ndarray = field(repr=False)
    feats: InvariantFeatures = field(repr=False)
    output: np.ndarray = field(repr=False)
    cache: tuple = field(repr=False)


class ReniField:
    """
    Rotation-equivariant conditional spherical neural field.

    Args:
        mode: Equivariance mode selecting the invariant transform.
        params (FieldParams): SIREN parameters sized for the transform's input width.
        n_latent (int): Number N of 3D latent vectors.
        stats (NormStats): Log-radiance range of the training set.
    """

    def __init__(self, mode: Union[str, EquivarianceMode], params: FieldParams, n_latent: int, stats: NormStats):
        self.transform: BaseTransform = get_transform(mode)
        self.mode = self.transform.mode
        self.params = params
        self.n_latent = int(n_latent)
        self.stats = stats
        expected = self.transform.input_width(self.n_latent)
        if params.input_width != expected:
            raise ValidationError(
                f"{self.mode.value} field with N={self.n_latent} needs input width {expected}, "
                f"params have {params.input_width}"
            )

    @property
    def latent_dim(self) -> int:
        """Model dimensionality D = 3N."""
        return 3 * self.n_latent

    def zero_latent(self) -> np.ndarray:
        return np.zeros((3, self.n_latent))

    def _directions(self, where: Union[DirectionGrid, np.ndarray]) -> np.ndarray:
        return where.directions if isinstance(where, DirectionGrid) else np.asarray(where, dtype=np.float64)

    def forward(self, Z: np.ndarray, where: Union[DirectionGrid, np.ndarray]) -> FieldEvaluation:
        """Evaluate the field and keep the context for backward()."""
        dirs = self._directions(where)
        feats = self.transform.features(dirs, Z)
        output, cache = siren.forward(self.params, feats, return_cache=True)
        return FieldEvaluation(self.transform.as_batch(dirs), np.asarray(Z, dtype=np.float64), feats, output, cache)

    def backward(self, evaluation: FieldEvaluation, upstream_grad: np.ndarray) -> Tuple[FieldGradients, np.ndarray]:
        """
        Gradients of sum(upstream_grad * output).

        Returns:
            Tuple[FieldGradients, np.ndarray]: Network gradients and dL/dZ (3, N).
        """
        grads = siren.backward(self.params, evaluation.feats, upstream_grad, evaluation.cache)
        grad_Z = self.transform.backward(evaluation.dirs, evaluation.Z, grads.dir_feat, grads.cond_feat)
        return grads, grad_Z

    def decode(self, Z: np.ndarray, where: Union[DirectionGrid, np.ndarray]) -> np.ndarray:
        """Normalized log-HDR values (P, 3) of latent Z at the given directions."""
        feats = self.transform.features(self._directions(where), Z)
        return siren.forward(self.params, feats)

    def decode_hdr(self, Z: np.ndarray, grid: DirectionGrid) -> EnvironmentMap:
        """
        Linear HDR environment map decoded from Z on an equirectangular grid.

        The network output is clamped to the normalized training range first, so
        decoded radiance never exceeds exp(log_max).
        """
        values = np.clip(self.decode(Z, grid), -1.0, 1.0)
        return EnvironmentMap(grid, denormalize_log(values, self.stats))


def decode(field_model: ReniField, Z: np.ndarray, grid: DirectionGrid) -> np.ndarray:
    return field_model.decode(Z, grid)


def decode_hdr(field_model: ReniField, Z: np.ndarray, grid: DirectionGrid) -> EnvironmentMap:
    return field_model.decode_hdr(Z, grid)


def latent_gradient(field_model: ReniField, Z: np.ndarray, where, upstream_grad: np.ndarray,
                    evaluation: Optional[FieldEvaluation] = None) -> np.ndarray:
    """dL/dZ for a loss whose gradient w.r.t. the field output is upstream_grad."""
    evaluation = evaluation or field_model.forward(Z, where)
    return field_model.backward(evaluation, upstream_grad)[1]
