#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
SO(3) invariant transform: d' = Z^T d and Z' = vec(Z^T Z) (full Gram matrix, row-major).
"""

import numpy as np

from reni.equivariant.base import BaseTransform, EquivarianceMode, InvariantFeatures


class SO3Transform(BaseTransform):
    """Features invariant under any simultaneous rotation of d and Z."""

    mode = EquivarianceMode.SO3

    def dir_feature_size(self, n_latent: int) -> int:
        return n_latent

    def cond_feature_size(self, n_latent: int) -> int:
        return n_latent * n_latent

    def _features(self, dirs: np.ndarray, Z: np.ndarray) -> InvariantFeatures:
        return InvariantFeatures(dirs @ Z, (Z.T @ Z).reshape(-1), self.mode)

    def _backward(self, dirs, Z, grad_dir, grad_cond):
        n = Z.shape[1]
        gram_grad = grad_cond.reshape(n, n)
        return dirs.T @ grad_dir + Z @ (gram_grad + gram_grad.T)
