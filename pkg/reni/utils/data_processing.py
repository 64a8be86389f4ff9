#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Data Processing Utilities

This module provides functions for exporting experiment reports (CSV, JSON)
and LDR image previews.
"""

import json
import logging
import math
import os
from datetime import datetime
from typing import Any, Dict, List

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


def _jsonable(value: Any) -> Any:
    """Convert numpy containers and non-finite floats to JSON-safe values."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return value
    return value


def export_to_csv(rows: List[Dict[str, Any]], filepath: str, columns: List[str]) -> None:
    """
    Export report rows to a CSV file.

    Args:
        rows (List[Dict[str, Any]]): One dictionary per row
        filepath (str): Output file path
        columns (List[str]): Column order; missing keys are written empty
    """
    directory = os.path.dirname(filepath)
    if directory:
        os.makedirs(directory, exist_ok=True)
    df = pd.DataFrame(rows, columns=columns)
    df.to_csv(filepath, index=False)
    logger.info(f"Wrote {len(df)} rows to {filepath}")


def save_report(data: Dict[str, Any], filepath: str) -> None:
    """
    Save a report dictionary to a JSON file.

    Args:
        data (Dict[str, Any]): Data to save
        filepath (str): Output file path
    """
    directory = os.path.dirname(filepath)
    if directory:
        os.makedirs(directory, exist_ok=True)

    payload = dict(data)
    payload["metadata"] = {
        "timestamp": datetime.now().isoformat(),
        "version": "1.0",
    }
    with open(filepath, "w", encoding="utf-8") as f:
        json.dump(_jsonable(payload), f, indent=2)
    logger.info(f"Report saved to {filepath}")


def load_report(filepath: str) -> Dict[str, Any]:
    """Load a JSON report written by save_report."""
    with open(filepath, "r", encoding="utf-8") as f:
        return json.load(f)


def write_png(image: np.ndarray, filepath: str) -> None:
    """
    Write an LDR image with values in [0, 1] as PNG.

    Args:
        image (np.ndarray): Array of shape (rows, cols, 3)
        filepath (str): Output file path
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    directory = os.path.dirname(filepath)
    if directory:
        os.makedirs(directory, exist_ok=True)
    plt.imsave(filepath, np.clip(image, 0.0, 1.0))
    logger.debug(f"Preview written to {filepath}")


def read_png_gray(filepath: str) -> np.ndarray:
    """Read a PNG and return a (rows, cols) grayscale array in [0, 1]."""
    import matplotlib.image as mpimg

    image = np.asarray(mpimg.imread(filepath), dtype=np.float64)
    if image.ndim == 3:
        image = image[..., :3].mean(axis=2)
    if image.max() > 1.0:
        image = image / 255.0
    return image
