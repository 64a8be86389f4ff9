#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Dataset Module

Procedural HDR skies for desk-scale experiments, exact azimuthal rotation of
equirectangular maps, and dataset directories of PFM/RGBE files described by
a JSON manifest.
"""

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from jsonschema import ValidationError as SchemaValidationError, validate
from pydantic import BaseModel, Field, field_validator

from reni.hdrio import EnvironmentMap, read_environment, write_pfm
from reni.sphgeom import equirect_grid
from reni.utils.validation import ValidationError

LOGGER = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1
DEFAULT_MANIFEST_SCHEMA = Path(__file__).resolve().parents[1] / "config" / "manifest_schema.json"
DEFAULT_ROTATION_STEP = 0.785
DEFAULT_SUPERSAMPLE = 8
NOISE_TERMS = 6
HORIZON_BLEND = 0.05
GROUND_NOISE = 0.3


class SkyParams(BaseModel):
    """Parameters of a procedural sky: gradient, sun disk and a noisy ground."""
    sun_azimuth: float = Field(default=0.0, description="Sun azimuth phi in radians")
    sun_elevation: float = Field(default=0.6, ge=0.0, le=np.pi / 2, description="Sun elevation above the horizon")
    sun_intensity: float = Field(default=1000.0, gt=0, description="Sun radiance as a multiple of the sky behind it")
    sun_radius: float = Field(default=0.06, gt=0, le=0.5, description="Angular radius of the sun core in radians")
    zenith_color: Tuple[float, float, float] = Field(default=(0.25, 0.45, 1.0), description="Sky colour at the zenith")
    horizon_color: Tuple[float, float, float] = Field(default=(0.85, 0.9, 1.0), description="Sky colour at the horizon")
    ground_color: Tuple[float, float, float] = Field(default=(0.3, 0.25, 0.2), description="Mean ground colour")
    noise_seed: int = Field(default=0, description="Seed of the ground noise")

    @field_validator("zenith_color", "horizon_color", "ground_color")
    @classmethod
    def validate_color(cls, v):
        if any(c <= 0 for c in v):
            raise ValueError(f"Colours must be strictly positive, got {v}")
        return v

    def sun_direction(self) -> np.ndarray:
        c = np.cos(self.sun_elevation)
        return np.array([c * np.sin(self.sun_azimuth), np.sin(self.sun_elevation), c * np.cos(self.sun_azimuth)])


def random_sky_params(rng: np.random.Generator) -> SkyParams:
    """Draw sky parameters spanning a range of sun positions and brightness."""
    tint = rng.uniform(0.8, 1.2, size=3)
    return SkyParams(
        sun_azimuth=float(rng.uniform(0.0, 2.0 * np.pi)),
        sun_elevation=float(rng.uniform(0.05, 1.4)),
        sun_intensity=float(10.0 ** rng.uniform(2.0, 4.0)),
        sun_radius=float(rng.uniform(0.04, 0.09)),
        zenith_color=tuple(float(c) for c in np.array([0.25, 0.45, 1.0]) * tint),
        horizon_color=tuple(float(c) for c in np.array([0.85, 0.9, 1.0]) * rng.uniform(0.9, 1.1, size=3)),
        ground_color=tuple(float(c) for c in np.array([0.3, 0.25, 0.2]) * rng.uniform(0.6, 1.4, size=3)),
        noise_seed=int(rng.integers(0, 2 ** 31 - 1)),
    )


def _smoothstep(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def _ground_noise(dirs: np.ndarray, seed: int) -> np.ndarray:
    """Low-frequency noise in [-1, 1]: a few random plane waves over the sphere."""
    rng = np.random.default_rng(seed)
    freqs = rng.normal(0.0, 1.5, size=(NOISE_TERMS, 3))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=NOISE_TERMS)
    amps = rng.uniform(0.5, 1.0, size=NOISE_TERMS)
    return np.sin(dirs @ freqs.T + phases) @ amps / amps.sum()


def sun_profile(params: SkyParams, dirs: np.ndarray) -> np.ndarray:
    """1 inside the sun core, smoothly falling to 0 at twice its radius."""
    cos_angle = dirs @ params.sun_direction()
    inner, outer = np.cos(params.sun_radius), np.cos(2.0 * params.sun_radius)
    return _smoothstep((cos_angle - outer) / (inner - outer))


def base_radiance(params: SkyParams, dirs: np.ndarray) -> np.ndarray:
    """Sky gradient blended into the noisy ground, without the sun."""
    y = dirs[:, 1]
    height = np.sqrt(np.clip(y, 0.0, 1.0))[:, None]
    sky = np.asarray(params.horizon_color) + (np.asarray(params.zenith_color) - np.asarray(params.horizon_color)) * height
    ground = np.asarray(params.ground_color) * (1.0 + GROUND_NOISE * _ground_noise(dirs, params.noise_seed))[:, None]
    blend = _smoothstep((y + HORIZON_BLEND) / (2.0 * HORIZON_BLEND))[:, None]
    return blend * sky + (1.0 - blend) * ground


def sky_radiance(params: SkyParams, dirs: np.ndarray) -> np.ndarray:
    """Radiance (P, 3): the base sky scaled by sun_intensity inside the sun core."""
    dirs = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    sun = sun_profile(params, dirs)[:, None]
    return base_radiance(params, dirs) * (1.0 + (params.sun_intensity - 1.0) * sun)


def generate_sky(params: SkyParams, height: int, supersample: int = DEFAULT_SUPERSAMPLE) -> EnvironmentMap:
    """
    Render a procedural sky to an equirectangular map.

    Each pixel is the solid-angle weighted mean of supersample x supersample
    sub-pixel samples, so maps of different heights agree under area
    downsampling.
    """
    grid = equirect_grid(height)
    s = int(supersample)
    offsets = (np.arange(s) + 0.5) / s
    rows = (np.arange(height)[:, None] + offsets[None, :]).reshape(-1)
    cols = (np.arange(grid.width)[:, None] + offsets[None, :]).reshape(-1)
    theta = np.pi * rows / height
    phi = 2.0 * np.pi * cols / grid.width
    theta_g, phi_g = np.meshgrid(theta, phi, indexing="ij")
    sin_t = np.sin(theta_g)
    dirs = np.stack([sin_t * np.sin(phi_g), np.cos(theta_g), sin_t * np.cos(phi_g)], axis=-1).reshape(-1, 3)

    values = sky_radiance(params, dirs).reshape(height, s, grid.width, s, 3)
    weights = sin_t.reshape(height, s, grid.width, s, 1)
    rgb = (values * weights).sum(axis=(1, 3)) / weights.sum(axis=(1, 3))
    return EnvironmentMap(grid, rgb.reshape(-1, 3))


def rotate_map(env: EnvironmentMap, psi: float) -> EnvironmentMap:
    """
    Rotate a map about the vertical axis by a whole number of columns.

    The result is the map decoded from R_y(psi) Z when env is decoded from Z:
    new[:, j] = old[:, j + round(psi W / 2 pi)].
    """
    image = env.to_image()
    shift = int(np.round(psi * env.grid.width / (2.0 * np.pi)))
    return EnvironmentMap(env.grid, np.roll(image, -shift, axis=1).reshape(-1, 3))


def augment_rotations(maps: Sequence[EnvironmentMap], image_ids: Sequence[str],
                      step: float = DEFAULT_ROTATION_STEP) -> Tuple[List[EnvironmentMap], List[str]]:
    """Every map rotated by multiples of step below 2 pi (the identity included)."""
    if step <= 0:
        raise ValidationError(f"Rotation step must be positive, got {step}")
    # angles within a hair of 2 pi duplicate the identity
    angles = step * np.arange(int(np.ceil(2.0 * np.pi / step - 0.01)))
    out_maps, out_ids = [], []
    for env, image_id in zip(maps, image_ids):
        for k, psi in enumerate(angles):
            out_maps.append(rotate_map(env, psi))
            out_ids.append(f"{image_id}@rot{k}")
    LOGGER.info(f"Augmented {len(maps)} maps to {len(out_maps)} with {len(angles)} rotations each")
    return out_maps, out_ids


# =============================================================================
# Dataset directories

@dataclass
class Dataset:
    """Maps loaded from a dataset directory, in manifest order."""
    maps: List[EnvironmentMap] = field(repr=False)
    image_ids: List[str]
    sky_params: List[Optional[SkyParams]] = field(default_factory=list, repr=False)

    def __len__(self) -> int:
        return len(self.maps)

    def subset(self, ids: Sequence[str]) -> "Dataset":
        index = [self.image_ids.index(i) for i in ids]
        return Dataset([self.maps[i] for i in index], [self.image_ids[i] for i in index],
                       [self.sky_params[i] for i in index] if self.sky_params else [])


def validate_manifest(manifest: Dict[str, Any], schema_file: Optional[str] = None) -> None:
    """
    Validate a manifest against the JSON schema.

    Raises:
        ValidationError: With the offending path when the manifest does not conform.
    """
    with open(schema_file or DEFAULT_MANIFEST_SCHEMA, "r", encoding="utf-8") as f:
        schema = json.load(f)
    try:
        validate(instance=manifest, schema=schema)
    except SchemaValidationError as e:
        message = f"Manifest validation error: {e.message}"
        if e.path:
            message += " at: " + " -> ".join(str(p) for p in e.path)
        raise ValidationError(message)


def load_dataset(directory: str) -> Dataset:
    """
    Load a dataset directory.

    Reads manifest.json when present; otherwise every .pfm/.hdr file in name
    order, with the file stem as id.
    """
    root = Path(directory)
    if not root.is_dir():
        raise ValidationError(f"Dataset directory {directory} not found")
    manifest_path = root / MANIFEST_NAME

    if manifest_path.exists():
        try:
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ValidationError(f"Invalid JSON in {manifest_path}: {e}")
        validate_manifest(manifest)
        entries = manifest["images"]
    else:
        LOGGER.warning(f"No {MANIFEST_NAME} in {directory}; loading every PFM/HDR file")
        files = sorted(p for p in root.iterdir() if p.suffix.lower() in (".pfm", ".hdr"))
        if not files:
            raise ValidationError(f"Dataset directory {directory} contains no PFM or HDR files")
        entries = [{"id": p.stem, "path": p.name} for p in files]

    ids = [entry["id"] for entry in entries]
    if len(set(ids)) != len(ids):
        raise ValidationError(f"Duplicate image ids in {directory}")
    maps = [read_environment(str(root / entry["path"])) for entry in entries]
    params = [SkyParams(**entry["sky_params"]) if "sky_params" in entry else None for entry in entries]
    LOGGER.info(f"Loaded {len(maps)} maps from {directory}")
    return Dataset(maps, ids, params)


def write_dataset(directory: str, maps: Sequence[EnvironmentMap], image_ids: Sequence[str],
                  sky_params: Optional[Sequence[Optional[SkyParams]]] = None) -> str:
    """Write maps as PFM files plus manifest.json; returns the manifest path."""
    if len(maps) != len(image_ids):
        raise ValidationError("Every map needs an image id")
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for index, (env, image_id) in enumerate(zip(maps, image_ids)):
        name = f"{image_id}.pfm"
        write_pfm(env, str(root / name))
        entry: Dict[str, Any] = {"id": str(image_id), "path": name}
        if sky_params and sky_params[index] is not None:
            entry["sky_params"] = sky_params[index].model_dump(mode="json")
        entries.append(entry)

    manifest = {"version": MANIFEST_VERSION, "images": entries}
    if maps:
        manifest["height"] = maps[0].height
    validate_manifest(manifest)
    manifest_path = os.path.join(directory, MANIFEST_NAME)
    with open(manifest_path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2)
    LOGGER.info(f"Wrote {len(entries)} maps to {directory}")
    return manifest_path


def generate_dataset(count: int, height: int, seed: int) -> Dataset:
    """Procedural skies with ids sky_000, sky_001, ..."""
    if count < 1:
        raise ValidationError(f"Dataset size must be positive, got {count}")
    rng = np.random.default_rng(seed)
    params = [random_sky_params(rng) for _ in range(count)]
    maps = [generate_sky(p, height) for p in params]
    return Dataset(maps, [f"sky_{i:03d}" for i in range(count)], params)
