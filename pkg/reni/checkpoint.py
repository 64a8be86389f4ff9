#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Checkpoint Module

Versioned JSON container for a trained field: equivariance mode, network
shape, omega_0, normalization stats, all weights, every training latent
(mu, log sigma^2), the image ids, the per-epoch loss log and the training
config.
"""

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from reni.hdrio import NormStats
from reni.model import ReniField
from reni.siren import FieldParams
from reni.utils.data_processing import export_to_csv
from reni.utils.validation import ValidationError

LOGGER = logging.getLogger(__name__)

FORMAT_NAME = "reni-checkpoint"
FORMAT_VERSION = 1
LOSS_LOG_COLUMNS = ["epoch", "resolution", "recon", "kld", "lr"]


@dataclass
class Checkpoint:
    """
    A trained field and its training latents.

    Attributes:
        field_model (ReniField): Network, transform and stats.
        latents (list): One VariationalLatent per training image.
        image_ids (List[str]): Names of the training images.
        loss_log (List[Dict[str, float]]): Per-epoch rows of LOSS_LOG_COLUMNS.
        config (Dict[str, Any]): TrainConfig as plain JSON data.
    """
    field_model: ReniField
    latents: list = field(repr=False)
    image_ids: List[str] = field(default_factory=list)
    loss_log: List[Dict[str, float]] = field(default_factory=list, repr=False)
    config: Dict[str, Any] = field(default_factory=dict)

    @property
    def stats(self) -> NormStats:
        return self.field_model.stats

    @property
    def n_latent(self) -> int:
        return self.field_model.n_latent

    def resolutions(self) -> List[Tuple[int, int]]:
        """Training schedule, or a single 64-row stage when none was recorded."""
        return [tuple(r) for r in self.config.get("resolutions", [(64, 400)])]

    def latent_for(self, image_id: str) -> np.ndarray:
        """Mean latent of a training image."""
        try:
            return self.latents[self.image_ids.index(str(image_id))].mean_latent()
        except ValueError:
            raise ValidationError(f"Image id {image_id!r} is not in the checkpoint")

    def to_dict(self) -> Dict[str, Any]:
        params = self.field_model.params
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "mode": self.field_model.mode.value,
            "num_layers": params.num_layers,
            "hidden_width": params.hidden_width,
            "n_latent": self.n_latent,
            "omega0": params.omega0,
            "stats": {"log_min": self.stats.log_min, "log_max": self.stats.log_max},
            "weights": [w.tolist() for w in params.weights],
            "biases": [b.tolist() for b in params.biases],
            "latents": [{"mu": v.mu.tolist(), "log_var": v.log_var.tolist()} for v in self.latents],
            "image_ids": list(self.image_ids),
            "loss_log": self.loss_log,
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Checkpoint":
        from reni.vad import VariationalLatent

        if data.get("format") != FORMAT_NAME:
            raise ValidationError(f"Not a checkpoint (format={data.get('format')!r})")
        if data.get("version") != FORMAT_VERSION:
            raise ValidationError(f"Unsupported checkpoint version {data.get('version')}")
        try:
            params = FieldParams(
                [np.asarray(w, dtype=np.float64) for w in data["weights"]],
                [np.asarray(b, dtype=np.float64) for b in data["biases"]],
                float(data["omega0"]),
            )
            stats = NormStats(float(data["stats"]["log_min"]), float(data["stats"]["log_max"]))
            field_model = ReniField(data["mode"], params, int(data["n_latent"]), stats)
            latents = [VariationalLatent(v["mu"], v["log_var"]) for v in data["latents"]]
        except (KeyError, TypeError, ValueError) as e:
            raise ValidationError(f"Checkpoint is missing or has malformed field: {e}")
        if params.num_layers != data.get("num_layers", params.num_layers):
            raise ValidationError("Checkpoint layer count does not match its weights")
        return cls(field_model, latents, list(data.get("image_ids", [])),
                   list(data.get("loss_log", [])), dict(data.get("config", {})))


def save_checkpoint(checkpoint: Checkpoint, path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(checkpoint.to_dict(), f)
    LOGGER.info(f"Checkpoint saved to {path}")


def load_checkpoint(path: str) -> Checkpoint:
    """
    Load a checkpoint written by save_checkpoint.

    Raises:
        ValidationError: Missing file, bad JSON or an incompatible container.
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ValidationError(f"Checkpoint {path} not found")
    except json.JSONDecodeError as e:
        raise ValidationError(f"Checkpoint {path} is not valid JSON: {e}")
    checkpoint = Checkpoint.from_dict(data)
    LOGGER.info(
        f"Loaded {checkpoint.field_model.mode.value} checkpoint N={checkpoint.n_latent} "
        f"with {len(checkpoint.latents)} training latents from {path}"
    )
    return checkpoint


def export_loss_log(checkpoint: Checkpoint, path: str) -> None:
    """Write the training log CSV: epoch, resolution, recon, kld, lr."""
    export_to_csv(checkpoint.loss_log, path, LOSS_LOG_COLUMNS)
