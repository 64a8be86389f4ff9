#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Parameter Validation Utilities

This module provides the exception types and small validation helpers shared by
the numerical modules: unit directions, latent codes, masks and scalar ranges.
"""

import logging
from typing import Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

MAX_LATENT_COUNT = 100


class ValidationError(Exception):
    """Custom exception for parameter validation errors."""
    pass


class NonFiniteLossError(RuntimeError):
    """Raised when an optimization produces a NaN or infinite loss."""

    def __init__(self, message: str, epoch: Optional[int] = None, image_id: Optional[str] = None):
        super().__init__(message)
        self.epoch = epoch
        self.image_id = image_id


def validate_positive(name: str, value: float, allow_zero: bool = False) -> None:
    """
    Validate that a scalar is positive (or non-negative).

    Args:
        name (str): Parameter name used in the error message.
        value (float): Value to validate.
        allow_zero (bool): Accept zero as valid.

    Raises:
        ValidationError: If value is not a finite number in range.
    """
    if not isinstance(value, (int, float, np.integer, np.floating)) or not np.isfinite(value):
        raise ValidationError(f"{name} must be a finite number, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = "non-negative" if allow_zero else "positive"
        raise ValidationError(f"{name} must be {bound}, got {value}")


def validate_range(name: str, value: float, low: float, high: float) -> None:
    """
    Validate that a scalar lies in the closed interval [low, high].

    Raises:
        ValidationError: If value is outside valid range.
    """
    if not np.isfinite(value) or value < low or value > high:
        raise ValidationError(f"{name} {value} is outside valid range [{low}, {high}]")


def validate_directions(dirs: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """
    Validate a direction or a batch of directions.

    Args:
        dirs (np.ndarray): Array of shape (3,) or (P, 3).
        tol (float): Allowed deviation of the norm from one.

    Returns:
        np.ndarray: The directions as a float64 array of shape (P, 3).

    Raises:
        ValidationError: If the shape is wrong or any direction is not unit-norm.
    """
    arr = np.asarray(dirs, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValidationError(f"Directions must have shape (3,) or (P, 3), got {np.shape(dirs)}")
    norms = np.linalg.norm(arr, axis=1)
    if not np.all(np.abs(norms - 1.0) <= tol):
        worst = float(np.max(np.abs(norms - 1.0)))
        raise ValidationError(f"Directions must be unit-norm (max deviation {worst:.3e})")
    return arr


def validate_latent(Z: np.ndarray) -> np.ndarray:
    """
    Validate a latent code of shape (3, N).

    Raises:
        ValidationError: If the shape is not (3, N) with 1 <= N <= 100 or entries are not finite.
    """
    arr = np.asarray(Z, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != 3:
        raise ValidationError(f"Latent code must have shape (3, N), got {arr.shape}")
    if not 1 <= arr.shape[1] <= MAX_LATENT_COUNT:
        raise ValidationError(f"Latent count N={arr.shape[1]} must be in [1, {MAX_LATENT_COUNT}]")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("Latent code contains non-finite entries")
    return arr


def validate_mask(mask: np.ndarray, num_pixels: int) -> np.ndarray:
    """
    Validate a boolean pixel mask.

    Raises:
        ValidationError: If the mask has the wrong length or selects no pixel.
    """
    arr = np.asarray(mask, dtype=bool).reshape(-1)
    if arr.shape[0] != num_pixels:
        raise ValidationError(f"Mask has {arr.shape[0]} entries, expected {num_pixels}")
    if not arr.any():
        raise ValidationError("Mask must select at least one pixel")
    return arr


def validate_schedule(schedule: Sequence[Sequence[int]]) -> None:
    """
    Validate a progressive resolution schedule of (height, epochs) pairs.

    Raises:
        ValidationError: If the schedule is empty or contains non-positive entries.
    """
    if not schedule:
        raise ValidationError("Resolution schedule must not be empty")
    for entry in schedule:
        if len(entry) != 2:
            raise ValidationError(f"Schedule entries must be (height, epochs) pairs, got {entry!r}")
        height, epochs = entry
        if int(height) < 1 or int(epochs) < 0:
            raise ValidationError(f"Invalid schedule entry (height={height}, epochs={epochs})")


def check_finite_loss(loss: float, epoch: Optional[int] = None, image_id: Optional[str] = None) -> None:
    """
    Abort an optimization on a non-finite loss.

    Raises:
        NonFiniteLossError: If loss is NaN or infinite.
    """
    if not np.isfinite(loss):
        message = f"Non-finite loss {loss} at epoch {epoch}"
        if image_id is not None:
            message += f" (image {image_id})"
        logger.error(message)
        raise NonFiniteLossError(message, epoch=epoch, image_id=image_id)
