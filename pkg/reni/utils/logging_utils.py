#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Logging setup shared by the command-line tools.

The YAML file in config/ describes handlers and levels; environment variables
(optionally loaded from a .env file) override the file location and root level.
"""

import logging
import logging.config
import os
from pathlib import Path
from typing import Optional, Union

import yaml
from dotenv import load_dotenv

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DEFAULT_LOGGING_CONFIG = Path(__file__).resolve().parents[2] / "config" / "logging_config.yaml"


def setup_logging(config_path: Optional[Union[str, Path]] = None, level: Optional[str] = None) -> None:
    """
    Configure logging for the process.

    Args:
        config_path: YAML dictConfig file. Defaults to RENI_LOG_CONFIG or config/logging_config.yaml.
        level: Root level override. Defaults to RENI_LOG_LEVEL when set.
    """
    load_dotenv()
    path = Path(config_path or os.getenv("RENI_LOG_CONFIG") or DEFAULT_LOGGING_CONFIG)
    level = level or os.getenv("RENI_LOG_LEVEL")

    if path.exists():
        try:
            with open(path, "r", encoding="utf-8") as f:
                config = yaml.safe_load(f)
            for handler in config.get("handlers", {}).values():
                filename = handler.get("filename")
                if filename:
                    Path(filename).parent.mkdir(parents=True, exist_ok=True)
            logging.config.dictConfig(config)
        except (OSError, ValueError, yaml.YAMLError) as e:
            logging.basicConfig(level=logging.INFO, format=LOG_FORMAT)
            logging.getLogger(__name__).warning(f"Failed to load logging config from {path}: {e}")
    else:
        logging.basicConfig(level=logging.INFO, format=LOG_FORMAT)

    if level:
        logging.getLogger().setLevel(level.upper())
        logging.getLogger("reni").setLevel(level.upper())
