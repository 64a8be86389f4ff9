#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Base Transform Module

This module defines the base class for the invariant input transforms that map
a query direction d and a latent code Z to network inputs (d', Z'). Every
transform provides the forward feature map and its exact backward pass to Z.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from reni.utils.validation import ValidationError, validate_latent

LOGGER = logging.getLogger(__name__)


class EquivarianceMode(str, Enum):
    """Symmetry group the field is built to respect."""
    SO3 = "SO3"
    SO2 = "SO2"
    NONE = "NONE"


@dataclass
class InvariantFeatures:
    """
    Network inputs produced by a transform.

    Attributes:
        dir_feat (np.ndarray): (P, a) per-direction features.
        cond_feat (np.ndarray): (b,) conditioning features shared by all directions.
        mode (EquivarianceMode): Transform that produced them.
    """
    dir_feat: np.ndarray = field(repr=False)
    cond_feat: np.ndarray = field(repr=False)
    mode: EquivarianceMode

    @property
    def num_directions(self) -> int:
        return self.dir_feat.shape[0]

    @property
    def width(self) -> int:
        return self.dir_feat.shape[1] + self.cond_feat.shape[0]

    def stacked(self) -> np.ndarray:
        """(P, a + b) matrix h0 = concat(dir_feat, cond_feat) per direction."""
        cond = np.broadcast_to(self.cond_feat, (self.num_directions, self.cond_feat.shape[0]))
        return np.concatenate([self.dir_feat, cond], axis=1)


class BaseTransform(ABC):
    """
    Base class for all invariant transforms.

    Subclasses fix the feature sizes, the forward map and its backward pass.
    """

    mode: EquivarianceMode = None

    def __init__(self):
        self.logger = logging.getLogger(self.__class__.__name__)

    @abstractmethod
    def dir_feature_size(self, n_latent: int) -> int:
        """Length of dir_feat for a latent with N columns."""
        raise NotImplementedError("Subclasses must implement dir_feature_size")

    @abstractmethod
    def cond_feature_size(self, n_latent: int) -> int:
        """Length of cond_feat for a latent with N columns."""
        raise NotImplementedError("Subclasses must implement cond_feature_size")

    def input_width(self, n_latent: int) -> int:
        return self.dir_feature_size(n_latent) + self.cond_feature_size(n_latent)

    def features(self, dirs: np.ndarray, Z: np.ndarray) -> InvariantFeatures:
        """
        Compute invariant features for one latent code and a batch of directions.

        Args:
            dirs (np.ndarray): Direction of shape (3,) or directions of shape (P, 3).
            Z (np.ndarray): Latent code of shape (3, N).

        Returns:
            InvariantFeatures: Features with dir_feat of shape (P, a).
        """
        dirs = self.as_batch(dirs)
        Z = validate_latent(Z)
        return self._features(dirs, Z)

    def backward(self, dirs: np.ndarray, Z: np.ndarray, grad_dir: np.ndarray, grad_cond: np.ndarray) -> np.ndarray:
        """
        Pull gradients w.r.t. the features back to the latent code.

        Args:
            dirs (np.ndarray): Directions used in the forward pass, (P, 3).
            Z (np.ndarray): Latent code, (3, N).
            grad_dir (np.ndarray): dL/d dir_feat, (P, a).
            grad_cond (np.ndarray): dL/d cond_feat summed over directions, (b,).

        Returns:
            np.ndarray: dL/dZ of shape (3, N).
        """
        dirs = self.as_batch(dirs)
        Z = np.asarray(Z, dtype=np.float64)
        n = Z.shape[1]
        if grad_dir.shape != (dirs.shape[0], self.dir_feature_size(n)):
            raise ValidationError(f"grad_dir has shape {grad_dir.shape}, expected {(dirs.shape[0], self.dir_feature_size(n))}")
        if grad_cond.shape != (self.cond_feature_size(n),):
            raise ValidationError(f"grad_cond has shape {grad_cond.shape}, expected {(self.cond_feature_size(n),)}")
        return self._backward(dirs, Z, grad_dir, grad_cond)

    @staticmethod
    def as_batch(dirs: np.ndarray) -> np.ndarray:
        arr = np.asarray(dirs, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValidationError(f"Directions must have shape (3,) or (P, 3), got {np.shape(dirs)}")
        return arr

    @abstractmethod
    def _features(self, dirs: np.ndarray, Z: np.ndarray) -> InvariantFeatures:
        raise NotImplementedError("Subclasses must implement _features")

    @abstractmethod
    def _backward(self, dirs: np.ndarray, Z: np.ndarray, grad_dir: np.ndarray, grad_cond: np.ndarray) -> np.ndarray:
        raise NotImplementedError("Subclasses must implement _backward")
