import numpy as np
import pytest

from reni.dataset import (
    SkyParams,
    augment_rotations,
    base_radiance,
    generate_sky,
    random_sky_params,
    rotate_map,
    sky_radiance,
)
from reni.hdrio import EnvironmentMap
from reni.sphgeom import area_downsample, equirect_grid, y_rotation_matrix
from tests.helpers import make_field


def test_sun_core_is_scaled_by_intensity():
    params = SkyParams(sun_azimuth=1.0, sun_elevation=0.4, sun_intensity=500.0)
    sun = params.sun_direction()[None, :]
    assert np.linalg.norm(sun) == pytest.approx(1.0)
    np.testing.assert_allclose(sky_radiance(params, sun), 500.0 * base_radiance(params, sun))


def test_sky_is_plain_outside_sun_halo():
    params = SkyParams(sun_elevation=0.4, sun_radius=0.05)
    away = -params.sun_direction()[None, :]
    np.testing.assert_allclose(sky_radiance(params, away), base_radiance(params, away))


def test_overhead_sun_lights_the_top_row():
    env = generate_sky(SkyParams(sun_elevation=np.pi / 2, sun_intensity=1e3), 16)
    brightest_row = np.argmax(env.to_image().sum(axis=2).max(axis=1))
    assert brightest_row == 0


def test_noise_seed_only_changes_the_ground():
    a = generate_sky(SkyParams(noise_seed=1), 16).to_image()
    b = generate_sky(SkyParams(noise_seed=2), 16).to_image()
    np.testing.assert_allclose(a[:6], b[:6])
    assert not np.allclose(a[10:], b[10:])


def test_resolutions_agree_under_downsampling():
    params = SkyParams(sun_radius=0.3, sun_intensity=50.0, sun_elevation=0.7)
    fine = generate_sky(params, 32)
    coarse = generate_sky(params, 16)
    downsampled = area_downsample(fine.rgb, 32, 16)
    rms = np.sqrt(np.mean((downsampled - coarse.rgb) ** 2)) / np.sqrt(np.mean(coarse.rgb ** 2))
    assert rms < 0.02


def test_random_params_are_valid(rng):
    for _ in range(5):
        env = generate_sky(random_sky_params(rng), 4, supersample=2)
        assert np.all(env.rgb > 0)


def test_rotate_full_turn_is_identity(rng):
    env = EnvironmentMap(equirect_grid(4), rng.uniform(size=(32, 3)))
    np.testing.assert_array_equal(rotate_map(env, 2.0 * np.pi).rgb, env.rgb)


def test_rotate_half_turn_shifts_columns():
    image = np.arange(2 * 4 * 3, dtype=np.float64).reshape(2, 4, 3)
    rotated = rotate_map(EnvironmentMap.from_image(image), np.pi).to_image()
    np.testing.assert_array_equal(rotated[:, 0], image[:, 2])
    np.testing.assert_array_equal(rotated[:, 3], image[:, 1])


def test_rotate_round_trip_and_multiset(rng):
    env = EnvironmentMap(equirect_grid(8), rng.uniform(size=(128, 3)))
    psi = 3 * 2.0 * np.pi / 16
    np.testing.assert_array_equal(rotate_map(rotate_map(env, psi), -psi).rgb, env.rgb)
    odd = rotate_map(env, 1.234)
    np.testing.assert_array_equal(np.sort(odd.rgb, axis=0), np.sort(env.rgb, axis=0))


def test_rotate_matches_latent_rotation(rng):
    field_model = make_field("SO2", n_latent=2)
    grid = equirect_grid(8)
    Z = rng.normal(size=(3, 2))
    psi = 5 * 2.0 * np.pi / grid.width
    rotated_code = field_model.decode_hdr(y_rotation_matrix(psi) @ Z, grid)
    np.testing.assert_allclose(rotate_map(field_model.decode_hdr(Z, grid), psi).rgb, rotated_code.rgb, rtol=1e-9)


def test_augment_rotations():
    maps = [generate_sky(SkyParams(), 4, supersample=2), generate_sky(SkyParams(sun_azimuth=2.0), 4, supersample=2)]
    out_maps, out_ids = augment_rotations(maps, ["a", "b"])
    assert len(out_maps) == 16
    assert out_ids[:2] == ["a@rot0", "a@rot1"]
    assert out_ids[8] == "b@rot0"
    np.testing.assert_array_equal(out_maps[0].rgb, maps[0].rgb)
    _, ids = augment_rotations(maps[:1], ["a"], step=2.0 * np.pi / 4)
    assert len(ids) == 4
