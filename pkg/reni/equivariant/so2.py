#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
SO(2) Transform Module

Features invariant only under rotations about the vertical axis. With S_xz
selecting the x and z rows and s_y the y row:

    d' = (s_y d, (S_xz Z)^T (S_xz d), ||S_xz d||)          length N + 2
    Z' = (s_y Z, vec((S_xz Z)^T (S_xz Z)))                   length N + N^2
"""

import numpy as np

from reni.equivariant.base import BaseTransform, EquivarianceMode, InvariantFeatures

XZ_ROWS = [0, 2]
Y_ROW = 1


class SO2Transform(BaseTransform):
    """Features invariant under simultaneous y-axis rotation of d and Z."""

    mode = EquivarianceMode.SO2

    def dir_feature_size(self, n_latent: int) -> int:
        return n_latent + 2

    def cond_feature_size(self, n_latent: int) -> int:
        return n_latent + n_latent * n_latent

    def _features(self, dirs: np.ndarray, Z: np.ndarray) -> InvariantFeatures:
        d_xz = dirs[:, XZ_ROWS]
        z_xz = Z[XZ_ROWS, :]
        dir_feat = np.concatenate([
            dirs[:, Y_ROW:Y_ROW + 1],
            d_xz @ z_xz,
            np.linalg.norm(d_xz, axis=1, keepdims=True),
        ], axis=1)
        cond_feat = np.concatenate([Z[Y_ROW, :], (z_xz.T @ z_xz).reshape(-1)])
        return InvariantFeatures(dir_feat, cond_feat, self.mode)

    def _backward(self, dirs, Z, grad_dir, grad_cond):
        n = Z.shape[1]
        z_xz = Z[XZ_ROWS, :]
        gram_grad = grad_cond[n:].reshape(n, n)

        grad = np.zeros_like(Z)
        grad[Y_ROW, :] = grad_cond[:n]
        grad[XZ_ROWS, :] = dirs[:, XZ_ROWS].T @ grad_dir[:, 1:n + 1] + z_xz @ (gram_grad + gram_grad.T)
        return grad
