import numpy as np
import pytest

from lfslice.generate import PRESETS, generate, two_plane_alphas

DIMS = (32, 32, 4, 4)


@pytest.mark.parametrize("preset", PRESETS)
def test_presets_shape_and_finiteness(preset):
    lf = generate(preset, *DIMS, seed=3)
    assert lf.dims == DIMS
    assert lf.samples.shape == DIMS + (3,)
    assert np.all(np.isfinite(lf.samples))
    assert np.all(lf.samples >= 0.0)


@pytest.mark.parametrize("preset", PRESETS)
def test_same_seed_is_byte_identical(preset):
    a = generate(preset, *DIMS, seed=7)
    b = generate(preset, *DIMS, seed=7)
    assert a.samples.tobytes() == b.samples.tobytes()
    if a.depth_map is not None:
        assert a.depth_map.tobytes() == b.depth_map.tobytes()


def test_different_seed_differs():
    a = generate("two-plane", *DIMS, seed=1)
    b = generate("two-plane", *DIMS, seed=2)
    assert a.samples.tobytes() != b.samples.tobytes()


def test_two_plane_depth_map_has_two_values():
    lf = generate("two-plane", *DIMS, seed=0)
    assert lf.depth_map is not None
    values = np.unique(lf.depth_map)
    assert values.shape[0] == 2
    np.testing.assert_allclose(sorted(values), sorted(two_plane_alphas()),
                               rtol=1e-6)


def test_gaussian_preset_degenerate_dims():
    lf = generate("gaussian", ny=1, nx=64, nv=1, nu=8, seed=0)
    assert lf.dims == (1, 64, 1, 8)
    # peak at the center of every axis
    peak = np.unravel_index(np.argmax(lf.samples[..., 0]), lf.samples.shape[:4])
    assert peak[1] in (31, 32) and peak[3] in (3, 4)


def test_gaussian_preset_is_separable_blob():
    lf = generate("gaussian", *DIMS, seed=0)
    f = lf.samples[..., 0]
    # channels identical, symmetric under spatial flip
    np.testing.assert_allclose(lf.samples[..., 1], f, rtol=1e-7)
    np.testing.assert_allclose(f, f[::-1, ::-1], rtol=1e-6, atol=1e-7)


def test_unknown_preset_raises():
    with pytest.raises(ValueError):
        generate("vermeer", *DIMS)
