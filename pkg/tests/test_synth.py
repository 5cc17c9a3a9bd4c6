import dataclasses

import numpy as np
import pytest

from plumeseg.radiometry import planck_excitance, radiance_to_emissivity, wavelength_to_wavenumber
from plumeseg.synth import (Plume, Region, SceneSpec, frame_rng, generate, parse_key_values,
                            points_in_polygon, spectrum_from_spec)


def square(W, H):
    return ((0, 0), (W, 0), (W, H), (0, H))


def test_pure_blackbody():
    spec = SceneSpec(frames=2, height=3, width=4, bands=5, plume=None, noise_std=0.0,
                     regions=(Region(square(4, 3), 288.0, "const:1"),))
    cube, gt = generate(spec)
    bb = planck_excitance(wavelength_to_wavenumber(spec.wavelengths), 288.0)
    assert np.array_equal(cube.data, np.broadcast_to(bb, cube.shape))
    assert not gt.masks.any()


def test_same_seed_identical(default_scene):
    spec, cube, _ = default_scene
    again, _ = generate(spec)
    assert again.data.tobytes() == cube.data.tobytes()
    other, _ = generate(dataclasses.replace(spec, seed=1))
    assert not np.array_equal(other.data, cube.data)


def test_frames_independent_of_count():
    # per-frame streams: frame t is the same whatever T is
    a, _ = generate(SceneSpec(frames=12))
    b, _ = generate(SceneSpec(frames=15))
    assert np.array_equal(a.data, b.data[:12])


def test_frame_rng_streams_differ():
    assert frame_rng(0, 1).random() != frame_rng(0, 2).random()
    assert frame_rng(3, 1).random() == frame_rng(3, 1).random()


def test_full_concentration_gives_signature():
    plume = Plume(t0=0, x0=2.5, y0=2.5, vx=0, vy=0, spread0=1.0, spread_rate=0.0, peak=1.0,
                  decay=0.0)
    spec = SceneSpec(frames=1, height=5, width=5, bands=6, noise_std=0.0, plume=plume,
                     regions=(Region(square(5, 5), 300.0, "const:0.8"),))
    cube, gt = generate(spec)
    assert gt.concentration[0, 2, 2] == 1.0
    eps = radiance_to_emissivity(cube, 300.0).cube.data
    assert np.allclose(eps[0, 2, 2], gt.signature, rtol=1e-14, atol=0)


def test_band_means_match_mixture(default_scene):
    spec, cube, gt = default_scene
    # closed form mean of eps * B(nu, T): mix background and signature by concentration
    nu = 1e9 / spec.wavelengths
    h, c, k = 6.62607015e-34, 299792458.0, 1.380649e-23
    bb = 2 * h * c * c * nu ** 3 / np.expm1(h * c * nu[None, :] / (k * gt.temperatures[:, None]))
    eps_bg = gt.background_emissivity[gt.region_map]
    mean = np.zeros(spec.bands)
    for t in range(spec.frames):
        c_t = gt.concentration[t][..., None]
        mean += np.mean((eps_bg * (1 - c_t) + c_t * gt.signature) * bb[gt.region_map], axis=(0, 1))
    mean /= spec.frames
    got = cube.data.mean(axis=(0, 1, 2))
    tol = 3 * spec.noise_std / np.sqrt(spec.height * spec.width)
    assert np.all(np.abs(got - mean) < tol)


def test_masks_empty_before_release(default_scene):
    spec, _, gt = default_scene
    assert not gt.masks[:spec.plume.t0].any()
    assert gt.masks[spec.plume.t0:].any(axis=(1, 2)).all()


def test_mask_is_relative_cutoff(default_scene):
    spec, _, gt = default_scene
    for t in range(spec.plume.t0, spec.frames):
        amp = spec.plume.amplitude(t)
        assert np.array_equal(gt.masks[t], gt.concentration[t] >= 0.1 * amp)


def test_default_geometry(default_scene):
    spec, cube, gt = default_scene
    assert cube.shape == (40, 32, 64, 32)
    assert spec.wavelengths[0] == 7830.0 and np.all(np.diff(spec.wavelengths) == 30.0)
    # three regions, all present, partitioning the frame
    assert set(np.unique(gt.region_map)) == {0, 1, 2}


@pytest.mark.parametrize("field", ["frames", "height", "width", "bands"])
def test_degenerate_dims_rejected(field):
    with pytest.raises(ValueError):
        SceneSpec(**{field: 0})


def test_spec_invariants():
    with pytest.raises(ValueError):
        SceneSpec(frames=5, plume=Plume(t0=5))
    with pytest.raises(ValueError):
        SceneSpec(noise_std=-1.0)
    with pytest.raises(ValueError):
        SceneSpec(regions=(Region(((0, 0), (1, 0), (1, 1)), 300.0, "const:1"),)).region_map()


def test_config_roundtrip():
    spec = SceneSpec(frames=17, noise_std=1e-4, seed=9)
    back = SceneSpec.from_config(spec.to_config())
    assert back == spec
    none = SceneSpec.from_config("plume = none\nframes = 3\n")
    assert none.plume is None and none.frames == 3


def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown"):
        SceneSpec.from_config("colour = blue\n")
    with pytest.raises(ValueError):
        SceneSpec.from_config("plume.wind = 3\n")
    with pytest.raises(ValueError, match="duplicate"):
        parse_key_values("a = 1\na = 2\n")


def test_spectrum_generators():
    wl = np.array([8000.0, 8100.0, 8200.0])
    assert np.array_equal(spectrum_from_spec("const:0.5", wl), [0.5] * 3)
    assert np.allclose(spectrum_from_spec("linear:0.1,0.3", wl), [0.1, 0.2, 0.3])
    band = spectrum_from_spec("band:0.9,0.2,8100,50", wl)
    assert band[1] == pytest.approx(0.7) and band[0] == band[2]
    assert np.array_equal(spectrum_from_spec("values:1,2,3", wl), [1, 2, 3])
    with pytest.raises(ValueError):
        spectrum_from_spec("spline:1", wl)


def test_points_in_polygon():
    tri = ((0, 0), (4, 0), (0, 4))
    x = np.array([0.5, 3.0, 1.0])
    y = np.array([0.5, 3.0, 1.0])
    assert list(points_in_polygon(x, y, tri)) == [True, False, True]
