"""
Test helpers: small randomly initialized fields and checkpoints, and a log
capture context manager.
"""

import logging
from io import StringIO

import numpy as np

from reni.checkpoint import Checkpoint
from reni.equivariant import get_transform
from reni.hdrio import NormStats
from reni.model import ReniField
from reni.siren import init_params
from reni.vad import init_latents


class LogCapture:
    """
    Collect log records inside a with-block.

    Listens on the root logger, and on the package logger too once a logging
    config has stopped it from propagating.
    """

    def __init__(self, level=logging.DEBUG):
        self.level = level
        self.handler = None
        self.loggers = []
        self.log_output = StringIO()

    def __enter__(self):
        self.handler = logging.StreamHandler(self.log_output)
        self.handler.setLevel(self.level)
        package = logging.getLogger("reni")
        self.loggers = [logging.getLogger()] + ([] if package.propagate else [package])
        for logger in self.loggers:
            logger.addHandler(self.handler)
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        for logger in self.loggers:
            logger.removeHandler(self.handler)

    def get_logs(self):
        return self.log_output.getvalue()


def make_field(mode="SO2", n_latent=3, num_layers=3, hidden_width=8, seed=0,
               stats=NormStats(-2.0, 3.0), omega0=30.0):
    params = init_params(num_layers, hidden_width, get_transform(mode).input_width(n_latent), seed, omega0)
    return ReniField(mode, params, n_latent, stats)


def make_checkpoint(mode="SO2", n_latent=3, num_layers=3, hidden_width=8, seed=0, resolutions=((8, 50),)):
    field_model = make_field(mode, n_latent, num_layers, hidden_width, seed)
    latents = init_latents(2, n_latent, np.random.default_rng(seed))
    config = {"resolutions": [list(r) for r in resolutions], "floor": 1e-8}
    return Checkpoint(field_model, latents, ["a", "b"], [], config)


def random_directions(rng, count):
    dirs = rng.normal(size=(count, 3))
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
