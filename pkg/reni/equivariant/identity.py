#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Pass-through transform with no built-in symmetry: d' = d and Z' = vec(Z).

vec() here is column-major (entry (r, n) at index 3n + r), the same flattening
used for variational latents, so the augmentation baseline sees the raw code.
"""

import numpy as np

from reni.equivariant.base import BaseTransform, EquivarianceMode, InvariantFeatures


class IdentityTransform(BaseTransform):
    """Raw inputs; rotation handling must come from data augmentation."""

    mode = EquivarianceMode.NONE

    def dir_feature_size(self, n_latent: int) -> int:
        return 3

    def cond_feature_size(self, n_latent: int) -> int:
        return 3 * n_latent

    def _features(self, dirs: np.ndarray, Z: np.ndarray) -> InvariantFeatures:
        return InvariantFeatures(dirs.copy(), Z.T.reshape(-1).copy(), self.mode)

    def _backward(self, dirs, Z, grad_dir, grad_cond):
        return grad_cond.reshape(Z.shape[1], 3).T.copy()
