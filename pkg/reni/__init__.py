"""
Rotation-equivariant conditional spherical neural fields for HDR environment
illumination, with SH/SG baselines and a sphere renderer for inverse lighting.
"""

__version__ = "0.1.0"

from reni.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from reni.equivariant import EquivarianceMode
from reni.hdrio import EnvironmentMap, NormStats
from reni.model import ReniField
from reni.utils.validation import NonFiniteLossError, ValidationError

__all__ = [
    "Checkpoint",
    "EnvironmentMap",
    "EquivarianceMode",
    "NonFiniteLossError",
    "NormStats",
    "ReniField",
    "ValidationError",
    "load_checkpoint",
    "save_checkpoint",
]
