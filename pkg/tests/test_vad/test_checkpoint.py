import json
import os
import tempfile

import numpy as np
import pandas as pd
import pytest

from reni.checkpoint import Checkpoint, export_loss_log, load_checkpoint, save_checkpoint
from reni.sphgeom import equirect_grid
from reni.utils.validation import ValidationError


def test_save_and_load_preserve_decoding(small_checkpoint, rng):
    small_checkpoint.loss_log = [{"epoch": 0, "resolution": 8, "recon": 0.5, "kld": 1.0, "lr": 1e-3}]
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "run", "ckpt.json")
        save_checkpoint(small_checkpoint, path)
        loaded = load_checkpoint(path)
    Z = rng.normal(size=(3, small_checkpoint.n_latent))
    grid = equirect_grid(4)
    np.testing.assert_array_equal(loaded.field_model.decode(Z, grid), small_checkpoint.field_model.decode(Z, grid))
    assert loaded.image_ids == small_checkpoint.image_ids
    assert loaded.stats == small_checkpoint.stats
    assert loaded.loss_log == small_checkpoint.loss_log
    np.testing.assert_array_equal(loaded.latent_for("b"), small_checkpoint.latents[1].mean_latent())


def test_schedule_lookup(small_checkpoint):
    assert small_checkpoint.resolutions() == [(8, 50)]
    bare = Checkpoint(small_checkpoint.field_model, small_checkpoint.latents)
    assert bare.resolutions() == [(64, 400)]
    with pytest.raises(ValidationError):
        small_checkpoint.latent_for("missing")


def test_rejects_foreign_files(small_checkpoint):
    with tempfile.TemporaryDirectory() as d:
        with pytest.raises(ValidationError):
            load_checkpoint(os.path.join(d, "absent.json"))
        for name, payload in (("foreign.json", {"format": "other"}),
                              ("future.json", dict(small_checkpoint.to_dict(), version=99)),
                              ("partial.json", {"format": "reni-checkpoint", "version": 1})):
            path = os.path.join(d, name)
            with open(path, "w", encoding="utf-8") as f:
                json.dump(payload, f)
            with pytest.raises(ValidationError):
                load_checkpoint(path)


def test_loss_log_export(small_checkpoint):
    small_checkpoint.loss_log = [{"epoch": e, "resolution": 8, "recon": 1.0 / (e + 1), "kld": 0.1, "lr": 1e-3}
                                 for e in range(3)]
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "loss.csv")
        export_loss_log(small_checkpoint, path)
        table = pd.read_csv(path)
    assert list(table.columns) == ["epoch", "resolution", "recon", "kld", "lr"]
    assert table["epoch"].tolist() == [0, 1, 2]
