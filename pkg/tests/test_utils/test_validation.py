import numpy as np
import pytest

from reni.utils.validation import (
    NonFiniteLossError,
    ValidationError,
    check_finite_loss,
    validate_directions,
    validate_latent,
    validate_mask,
    validate_positive,
    validate_range,
    validate_schedule,
)


def test_positive_validation():
    """Test that positive validation catches zero, negatives and non-numbers."""
    validate_positive("beta", 1e-4)
    validate_positive("beta", 0.0, allow_zero=True)
    for value in (0.0, -1.0, float("nan"), "1"):
        with pytest.raises(ValidationError):
            validate_positive("beta", value)


def test_range_validation():
    validate_range("ks", 0.0, 0.0, 1.0)
    with pytest.raises(ValidationError):
        validate_range("ks", 1.5, 0.0, 1.0)


def test_direction_validation():
    assert validate_directions([0.0, 1.0, 0.0]).shape == (1, 3)
    with pytest.raises(ValidationError):
        validate_directions([0.0, 2.0, 0.0])
    with pytest.raises(ValidationError):
        validate_directions(np.ones((4, 2)))


def test_latent_validation():
    assert validate_latent(np.zeros((3, 9))).shape == (3, 9)
    for bad in (np.zeros((2, 9)), np.zeros((3, 0)), np.zeros((3, 101)), np.full((3, 2), np.nan)):
        with pytest.raises(ValidationError):
            validate_latent(bad)


def test_mask_validation():
    assert validate_mask([True, False], 2).dtype == bool
    with pytest.raises(ValidationError):
        validate_mask([True, False], 3)
    with pytest.raises(ValidationError):
        validate_mask([False, False], 2)


def test_schedule_validation():
    validate_schedule([(16, 800), (32, 0)])
    for bad in ([], [(0, 10)], [(16, -1)], [(16, 10, 1)]):
        with pytest.raises(ValidationError):
            validate_schedule(bad)


def test_non_finite_loss_carries_context():
    check_finite_loss(1.0)
    with pytest.raises(NonFiniteLossError) as info:
        check_finite_loss(float("nan"), epoch=7, image_id="sky_003")
    assert info.value.epoch == 7
    assert info.value.image_id == "sky_003"
    assert "sky_003" in str(info.value)
