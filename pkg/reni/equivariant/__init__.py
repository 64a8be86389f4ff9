"""
Equivariant Transforms Package

Invariant input transforms for the SO(3), SO(2) and no-equivariance variants
of the field, and a registry mapping a mode to its transform.
"""

from typing import Union

import numpy as np

from reni.equivariant.base import BaseTransform, EquivarianceMode, InvariantFeatures
from reni.equivariant.identity import IdentityTransform
from reni.equivariant.so2 import SO2Transform
from reni.equivariant.so3 import SO3Transform

TRANSFORM_CLASSES = {
    EquivarianceMode.SO3: SO3Transform,
    EquivarianceMode.SO2: SO2Transform,
    EquivarianceMode.NONE: IdentityTransform,
}

_instances = {}


def get_transform(mode: Union[str, EquivarianceMode]) -> BaseTransform:
    """
    Get the shared transform instance for a mode.

    Raises:
        ValueError: If the mode is unknown.
    """
    try:
        mode = EquivarianceMode(mode.upper() if isinstance(mode, str) else mode)
    except ValueError:
        raise ValueError(f"Unknown equivariance mode: {mode}")
    if mode not in _instances:
        _instances[mode] = TRANSFORM_CLASSES[mode]()
    return _instances[mode]


def transform_so3(d: np.ndarray, Z: np.ndarray) -> InvariantFeatures:
    return get_transform(EquivarianceMode.SO3).features(d, Z)


def transform_so2(d: np.ndarray, Z: np.ndarray) -> InvariantFeatures:
    return get_transform(EquivarianceMode.SO2).features(d, Z)


def transform_none(d: np.ndarray, Z: np.ndarray) -> InvariantFeatures:
    return get_transform(EquivarianceMode.NONE).features(d, Z)


__all__ = [
    'BaseTransform',
    'EquivarianceMode',
    'IdentityTransform',
    'InvariantFeatures',
    'SO2Transform',
    'SO3Transform',
    'get_transform',
    'transform_none',
    'transform_so2',
    'transform_so3',
]
