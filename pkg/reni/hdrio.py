#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
HDR Image I/O Module

Reads and writes equirectangular HDR environment maps (PFM read/write, Radiance
RGBE read-only) and manages the log-domain normalization used by the field:
values are mapped through ln(max(rgb, floor)) and scaled to [-1, 1] with the
minimum and maximum of a training set.
"""

import logging
import os
import re
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Tuple

import numpy as np

from reni.sphgeom import DirectionGrid, equirect_grid
from reni.utils.validation import ValidationError

LOGGER = logging.getLogger(__name__)

DEFAULT_FLOOR = 1e-8
RGBE_FORMAT = "32-bit_rle_rgbe"


class HDRFormatError(ValidationError):
    """Raised for malformed or unsupported HDR files."""
    pass


@dataclass
class EnvironmentMap:
    """
    Equirectangular HDR radiance on a DirectionGrid.

    Attributes:
        grid (DirectionGrid): Pixel directions, P = 2H^2.
        rgb (np.ndarray): (P, 3) linear radiance, finite and non-negative.
    """
    grid: DirectionGrid
    rgb: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.rgb = np.asarray(self.rgb, dtype=np.float64).reshape(-1, 3)
        if self.rgb.shape[0] != self.grid.num_pixels:
            raise ValidationError(
                f"Map has {self.rgb.shape[0]} pixels, grid H={self.grid.height} expects {self.grid.num_pixels}"
            )
        if not np.all(np.isfinite(self.rgb)):
            raise ValidationError("Environment map contains non-finite values")
        if np.any(self.rgb < 0):
            raise ValidationError("Environment map contains negative radiance")

    @property
    def height(self) -> int:
        return self.grid.height

    @classmethod
    def from_image(cls, image: np.ndarray) -> "EnvironmentMap":
        """Wrap an (H, 2H, 3) array whose first row is the top (+y) of the sphere."""
        image = np.asarray(image, dtype=np.float64)
        if image.ndim != 3 or image.shape[2] != 3:
            raise ValidationError(f"Expected an (H, W, 3) image, got shape {image.shape}")
        height, width = image.shape[:2]
        if width != 2 * height:
            raise ValidationError(f"Image {width}x{height} is not equirectangular (width must be 2*height)")
        return cls(equirect_grid(height), image.reshape(-1, 3))

    def to_image(self) -> np.ndarray:
        return self.rgb.reshape(self.grid.height, self.grid.width, 3)


@dataclass(frozen=True)
class NormStats:
    """Log-radiance range used to map ln(HDR) to [-1, 1]."""
    log_min: float
    log_max: float

    def __post_init__(self):
        if not (np.isfinite(self.log_min) and np.isfinite(self.log_max)):
            raise ValidationError(f"Normalization stats must be finite, got {self.log_min}, {self.log_max}")
        if not self.log_max > self.log_min:
            raise ValidationError(
                f"Normalization stats need log_max > log_min, got [{self.log_min}, {self.log_max}]"
            )

    @property
    def span(self) -> float:
        return self.log_max - self.log_min


# =============================================================================
# PFM

def _read_line(f: BinaryIO, path: str) -> str:
    line = f.readline()
    if not line:
        raise HDRFormatError(f"{path}: unexpected end of file in header")
    return line.decode("ascii", errors="replace").strip()


def read_pfm_array(path: str) -> np.ndarray:
    """
    Read any PFM file into an array of shape (rows, cols, channels), top row first.

    Raises:
        HDRFormatError: If the header or payload is malformed.
    """
    with open(path, "rb") as f:
        identifier = _read_line(f, path)
        if identifier == "PF":
            channels = 3
        elif identifier == "Pf":
            channels = 1
        else:
            raise HDRFormatError(f"{path}: unrecognized PFM identifier {identifier!r}")

        dims = _read_line(f, path).split()
        if len(dims) != 2:
            raise HDRFormatError(f"{path}: could not parse PFM dimensions line {' '.join(dims)!r}")
        try:
            width, height = int(dims[0]), int(dims[1])
            scale = float(_read_line(f, path))
        except ValueError as e:
            raise HDRFormatError(f"{path}: malformed PFM header ({e})")
        if width <= 0 or height <= 0 or scale == 0.0:
            raise HDRFormatError(f"{path}: invalid PFM header values width={width} height={height} scale={scale}")

        dtype = "<f4" if scale < 0 else ">f4"
        count = width * height * channels
        payload = f.read(count * 4)
        if len(payload) < count * 4:
            raise HDRFormatError(f"{path}: truncated PFM payload ({len(payload)} of {count * 4} bytes)")

    data = np.frombuffer(payload, dtype=dtype, count=count).reshape(height, width, channels)
    # PFM stores rows bottom-to-top
    return np.flipud(data).astype(np.float32)


def read_pfm(path: str) -> EnvironmentMap:
    """
    Read a colour PFM equirectangular environment map.

    Raises:
        HDRFormatError: Malformed header, non-equirectangular size or non-finite pixels.
    """
    data = read_pfm_array(path)
    height, width, channels = data.shape
    if channels != 3:
        raise HDRFormatError(f"{path}: expected a colour (PF) file")
    if width != 2 * height:
        raise HDRFormatError(f"{path}: {width}x{height} image is not equirectangular (width must be 2*height)")
    if not np.all(np.isfinite(data)):
        raise HDRFormatError(f"{path}: PFM contains non-finite pixels")
    LOGGER.debug(f"Read PFM {path} ({width}x{height})")
    return EnvironmentMap.from_image(data.astype(np.float64))


def write_pfm_array(image: np.ndarray, path: str) -> None:
    """Write an (rows, cols, 3) or (rows, cols) array as little-endian float32 PFM."""
    data = np.asarray(image, dtype=np.float32)
    if data.ndim == 2:
        identifier, data = "Pf", data[..., None]
    elif data.ndim == 3 and data.shape[2] == 3:
        identifier = "PF"
    else:
        raise ValidationError(f"Cannot write array of shape {data.shape} as PFM")
    if not np.all(np.isfinite(data)):
        raise HDRFormatError(f"{path}: refusing to write non-finite pixels")

    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    height, width = data.shape[:2]
    with open(path, "wb") as f:
        f.write(f"{identifier}\n{width} {height}\n-1.0\n".encode("ascii"))
        f.write(np.ascontiguousarray(np.flipud(data)).astype("<f4").tobytes())


def write_pfm(env: EnvironmentMap, path: str) -> None:
    """Write an environment map as PFM."""
    write_pfm_array(env.to_image(), path)
    LOGGER.debug(f"Wrote PFM {path} (H={env.height})")


# =============================================================================
# Radiance RGBE

def rgbe_to_float(rgbe: np.ndarray) -> np.ndarray:
    """Decode (..., 4) uint8 RGBE quadruples: (mantissa + 0.5) / 256 * 2^(e - 128), zero when e == 0."""
    rgbe = np.asarray(rgbe, dtype=np.uint8)
    mantissa = rgbe[..., :3].astype(np.float64)
    exponent = rgbe[..., 3:].astype(np.int32)
    rgb = (mantissa + 0.5) / 256.0 * np.ldexp(1.0, exponent - 128)
    return np.where(exponent == 0, 0.0, rgb)


def _parse_rgbe_header(f: BinaryIO, path: str) -> Tuple[int, int]:
    first = f.readline()
    if not first.startswith(b"#?"):
        raise HDRFormatError(f"{path}: missing Radiance '#?' signature")
    fmt = None
    while True:
        line = f.readline()
        if not line:
            raise HDRFormatError(f"{path}: unexpected end of file in header")
        text = line.decode("ascii", errors="replace").strip()
        if not text:
            break
        if text.startswith("FORMAT="):
            fmt = text[len("FORMAT="):]
    if fmt is None:
        LOGGER.warning(f"{path}: header has no FORMAT line, assuming {RGBE_FORMAT}")
    elif fmt != RGBE_FORMAT:
        raise HDRFormatError(f"{path}: unsupported format {fmt!r}, expected {RGBE_FORMAT}")

    resolution = f.readline().decode("ascii", errors="replace").strip()
    match = re.fullmatch(r"([+-][XY]) (\d+) ([+-][XY]) (\d+)", resolution)
    if not match:
        raise HDRFormatError(f"{path}: malformed resolution line {resolution!r}")
    if (match.group(1), match.group(3)) != ("-Y", "+X"):
        raise HDRFormatError(
            f"{path}: unsupported orientation {match.group(1)} {match.group(3)} in {resolution!r}, "
            "only top-down rows (-Y H +X W) are read"
        )
    height, width = int(match.group(2)), int(match.group(4))
    return width, height


def _read_exact(f: BinaryIO, count: int, path: str, row: int) -> bytes:
    data = f.read(count)
    if len(data) != count:
        raise HDRFormatError(f"{path}: truncated scanline {row}")
    return data


def _read_scanline(f: BinaryIO, width: int, path: str, row: int) -> np.ndarray:
    head = _read_exact(f, 4, path, row)
    adaptive = 8 <= width <= 0x7FFF and head[0] == 2 and head[1] == 2 and not head[2] & 0x80
    if not adaptive:
        rest = _read_exact(f, 4 * (width - 1), path, row)
        return np.frombuffer(head + rest, dtype=np.uint8).reshape(width, 4)

    if (head[2] << 8) + head[3] != width:
        raise HDRFormatError(f"{path}: scanline {row} width mismatch")
    line = np.zeros((width, 4), dtype=np.uint8)
    for channel in range(4):
        i = 0
        while i < width:
            count = _read_exact(f, 1, path, row)[0]
            if count > 128:
                count -= 128
                if i + count > width:
                    raise HDRFormatError(f"{path}: bad run length in scanline {row}")
                line[i:i + count, channel] = _read_exact(f, 1, path, row)[0]
            else:
                if count == 0 or i + count > width:
                    raise HDRFormatError(f"{path}: bad literal length in scanline {row}")
                line[i:i + count, channel] = np.frombuffer(_read_exact(f, count, path, row), dtype=np.uint8)
            i += count
    return line


def read_rgbe_array(path: str) -> np.ndarray:
    """Read a Radiance .hdr file into a float64 (rows, cols, 3) array."""
    with open(path, "rb") as f:
        width, height = _parse_rgbe_header(f, path)
        rgbe = np.stack([_read_scanline(f, width, path, row) for row in range(height)])
    return rgbe_to_float(rgbe)


def read_rgbe(path: str) -> EnvironmentMap:
    """
    Read a Radiance RGBE (.hdr) equirectangular environment map.

    Raises:
        HDRFormatError: Unknown format string, truncated scanline or non-equirectangular size.
    """
    image = read_rgbe_array(path)
    height, width = image.shape[:2]
    if width != 2 * height:
        raise HDRFormatError(f"{path}: {width}x{height} image is not equirectangular (width must be 2*height)")
    LOGGER.debug(f"Read RGBE {path} ({width}x{height})")
    return EnvironmentMap.from_image(image)


def read_environment(path: str) -> EnvironmentMap:
    """Read a PFM or Radiance HDR file based on its suffix."""
    suffix = os.path.splitext(path)[1].lower()
    if suffix == ".pfm":
        return read_pfm(path)
    if suffix in (".hdr", ".rgbe", ".pic"):
        return read_rgbe(path)
    raise HDRFormatError(f"{path}: unsupported HDR file type {suffix!r}")


# =============================================================================
# Log normalization

def compute_stats(maps: Iterable[EnvironmentMap], floor: float = DEFAULT_FLOOR) -> NormStats:
    """
    Minimum and maximum of ln(max(rgb, floor)) over all pixels and channels of a dataset.

    Raises:
        ValidationError: If the list is empty or the range is degenerate.
    """
    maps = list(maps)
    if not maps:
        raise ValidationError("Cannot compute normalization stats of an empty dataset")
    log_min = min(float(np.log(np.maximum(m.rgb, floor)).min()) for m in maps)
    log_max = max(float(np.log(np.maximum(m.rgb, floor)).max()) for m in maps)
    if not log_max > log_min:
        raise ValidationError(f"Degenerate dataset: every value has log radiance {log_min}")
    return NormStats(log_min, log_max)


def normalize_log(rgb: np.ndarray, stats: NormStats, floor: float = DEFAULT_FLOOR) -> np.ndarray:
    """Map linear radiance to 2 (ln(max(rgb, floor)) - log_min) / span - 1, clamped to [-1, 1]."""
    if isinstance(rgb, EnvironmentMap):
        rgb = rgb.rgb
    logs = np.log(np.maximum(np.asarray(rgb, dtype=np.float64), floor))
    return np.clip(2.0 * (logs - stats.log_min) / stats.span - 1.0, -1.0, 1.0)


def denormalize_log(values: np.ndarray, stats: NormStats) -> np.ndarray:
    """Inverse of normalize_log: exp(0.5 (v + 1) span + log_min)."""
    return np.exp(0.5 * (np.asarray(values, dtype=np.float64) + 1.0) * stats.span + stats.log_min)
