#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Configuration module for training, fitting and inverse rendering.

Hyperparameters live in TOML or JSON files so experiments are diffable
artifacts. Defaults are the full-scale training recipe; the desk-scale
config in config/ shrinks the schedule for CPU runs.
"""

import json
import logging
import os

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from typing import Any, Dict, List, Optional, Tuple, Type, TypeVar

from pydantic import BaseModel, Field, ValidationError as PydanticValidationError, field_validator

from reni.equivariant import EquivarianceMode
from reni.optim import LrSchedule
from reni.utils.validation import ValidationError, validate_schedule

logger = logging.getLogger(__name__)

ConfigT = TypeVar("ConfigT", bound=BaseModel)

DEFAULT_RESOLUTIONS = [(16, 800), (32, 800), (64, 400), (128, 400)]


def _check_resolutions(v):
    try:
        validate_schedule(v)
    except ValidationError as e:
        raise ValueError(str(e))
    if sum(epochs for _, epochs in v) < 1:
        raise ValueError("Schedule must contain at least one epoch")
    return v


class _ScheduledConfig(BaseModel):
    """Shared learning-rate and resolution fields."""
    lr_start: float = Field(default=1e-5, gt=0, description="Initial learning rate")
    lr_end: float = Field(default=1e-7, gt=0, description="Learning rate after the last epoch")
    resolutions: List[Tuple[int, int]] = Field(
        default_factory=lambda: list(DEFAULT_RESOLUTIONS),
        description="Progressive schedule of (height, epochs) pairs",
    )

    @field_validator("resolutions")
    @classmethod
    def validate_resolutions(cls, v):
        """Validate the progressive schedule."""
        return _check_resolutions(v)

    @property
    def total_epochs(self) -> int:
        return sum(epochs for _, epochs in self.resolutions)

    def lr_schedule(self) -> LrSchedule:
        return LrSchedule(self.lr_start, self.lr_end, self.total_epochs)


class TrainConfig(_ScheduledConfig):
    """Variational auto-decoder training settings."""
    mode: EquivarianceMode = Field(default=EquivarianceMode.SO2, description="SO3, SO2 or NONE")
    n_latent: int = Field(default=9, ge=1, le=100, description="Number N of 3D latent vectors (D = 3N)")
    num_layers: int = Field(default=5, ge=1, description="Number of sine layers")
    hidden_width: int = Field(default=128, ge=1, description="Hidden features per layer")
    omega0: float = Field(default=30.0, gt=0, description="SIREN frequency scale")
    beta: float = Field(default=1e-4, ge=0, description="KLD weight")
    seed: int = Field(default=0, description="Seed for initialization and reparameterization noise")
    floor: float = Field(default=1e-8, gt=0, description="Radiance floor before the log")
    log_every: int = Field(default=50, ge=1, description="Epochs between progress log lines")

    @field_validator("mode", mode="before")
    @classmethod
    def upper_mode(cls, v):
        return v.upper() if isinstance(v, str) else v


class FitConfig(_ScheduledConfig):
    """Test-time latent fitting settings (network frozen)."""
    rho: float = Field(default=1e-4, ge=0, description="Cosine-similarity loss weight")
    gamma: float = Field(default=1e-7, ge=0, description="Latent prior loss weight")
    lr_start: float = Field(default=1e-2, gt=0, description="Initial learning rate")
    lr_end: float = Field(default=1e-4, gt=0, description="Final learning rate")
    resolutions: Optional[List[Tuple[int, int]]] = Field(
        default=None, description="Schedule; None reuses the checkpoint's training schedule"
    )
    log_every: int = Field(default=100, ge=1, description="Epochs between progress log lines")

    @field_validator("resolutions")
    @classmethod
    def validate_resolutions(cls, v):
        if v is None:
            return v
        return _check_resolutions(v)

    def with_schedule(self, resolutions: List[Tuple[int, int]]) -> "FitConfig":
        """Copy with the schedule filled in when it was left empty."""
        if self.resolutions is not None:
            return self
        return self.model_copy(update={"resolutions": [tuple(r) for r in resolutions]})


class RenderFitConfig(BaseModel):
    """Inverse rendering settings (latent-only optimization through the shader)."""
    rho: float = Field(default=1e3, ge=0, description="Cosine-similarity loss weight in render space")
    gamma: float = Field(default=1e-4, ge=0, description="Latent prior loss weight")
    lr_start: float = Field(default=1e-2, gt=0, description="Initial learning rate")
    lr_end: float = Field(default=1e-4, gt=0, description="Final learning rate")
    epochs: int = Field(default=2400, ge=1, description="Optimization steps")
    env_height: int = Field(default=64, ge=1, description="Environment map height used for shading")
    log_every: int = Field(default=200, ge=1, description="Steps between progress log lines")

    def lr_schedule(self) -> LrSchedule:
        return LrSchedule(self.lr_start, self.lr_end, self.epochs)


class MaterialConfig(BaseModel):
    """Blinn-Phong material of the rendered sphere."""
    kd: Tuple[float, float, float] = Field(default=(0.8, 0.8, 0.8), description="Diffuse RGB albedo in [0, 1]")
    ks: float = Field(default=0.5, ge=0, le=1, description="Specular weight")
    shininess: float = Field(default=32.0, gt=0, description="Blinn-Phong exponent n")

    @field_validator("kd")
    @classmethod
    def validate_kd(cls, v):
        if any(not 0.0 <= c <= 1.0 for c in v):
            raise ValueError(f"Diffuse albedo must lie in [0, 1], got {v}")
        return v


class SGFitConfig(BaseModel):
    """Spherical Gaussian baseline fitting settings."""
    steps: int = Field(default=1500, ge=1, description="Adam steps")
    lr_start: float = Field(default=5e-2, gt=0, description="Initial learning rate")
    lr_end: float = Field(default=1e-3, gt=0, description="Final learning rate")
    init_sharpness: float = Field(default=10.0, gt=0, description="Initial lobe sharpness")

    def lr_schedule(self) -> LrSchedule:
        return LrSchedule(self.lr_start, self.lr_end, self.steps)


def load_config_file(config_path: str) -> Dict[str, Any]:
    """
    Load a TOML or JSON configuration file into a dictionary.

    Raises:
        ValidationError: If the file is missing, unparsable or of unknown type.
    """
    suffix = os.path.splitext(config_path)[1].lower()
    try:
        if suffix == ".toml":
            with open(config_path, "rb") as f:
                return tomllib.load(f)
        if suffix == ".json":
            with open(config_path, "r", encoding="utf-8") as f:
                return json.load(f)
    except FileNotFoundError:
        raise ValidationError(f"Config file {config_path} not found")
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        logger.error(f"Error parsing config file {config_path}: {e}")
        raise ValidationError(f"Error parsing config file {config_path}: {e}")
    raise ValidationError(f"Config file {config_path} must be .toml or .json")


def build_config(model: Type[ConfigT], values: Dict[str, Any], source: str = "<dict>") -> ConfigT:
    """Validate a dictionary against a config model, reporting the source on failure."""
    try:
        return model(**values)
    except PydanticValidationError as e:
        logger.error(f"Invalid configuration in {source}: {e}")
        raise ValidationError(f"Invalid configuration in {source}: {e}")


def load_train_config(config_path: str) -> TrainConfig:
    """Load a TrainConfig from TOML or JSON."""
    return build_config(TrainConfig, load_config_file(config_path), config_path)


def save_config_template(output_path: str, model: Type[BaseModel] = TrainConfig) -> None:
    """Save a configuration template file with every default filled in."""
    directory = os.path.dirname(output_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(output_path, "w", encoding="utf-8") as f:
        json.dump(model().model_dump(mode="json"), f, indent=2)
    logger.info(f"Configuration template saved to {output_path}")
