"""Deterministic synthetic light-field presets for tests and benchmarks."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter, map_coordinates

from .lightfield import LightField4D

PRESETS = ("gaussian", "two-plane", "noise-edges")

# scene-plane slopes of the two-plane preset; the plane with slope s is in
# focus at alpha = 1 / (1 + s)
TWO_PLANE_SLOPES = (0.25, -0.2)


def two_plane_alphas() -> tuple[float, float]:
    """(left, right) in-focus alpha values of the two-plane preset."""
    return tuple(1.0 / (1.0 + s) for s in TWO_PLANE_SLOPES)


def _texture(ny: int, nx: int, rng: np.random.Generator,
             smooth: float = 1.0) -> np.ndarray:
    """Positive broadband RGB texture with smoothed noise plus hard edges."""
    tex = gaussian_filter(rng.standard_normal((ny, nx, 3)),
                          sigma=(smooth, smooth, 0))
    tex -= tex.min()
    tex /= max(tex.max(), 1e-12)
    for _ in range(6):  # constant rectangles create step edges at all scales
        y, x = rng.integers(0, ny), rng.integers(0, nx)
        h, w = rng.integers(ny // 8, ny // 2), rng.integers(nx // 8, nx // 2)
        tex[y:y + h, x:x + w] = rng.random(3)
    return 0.05 + 0.95 * tex


def _plane_field(tex: np.ndarray, slope: float, ny, nx, nv, nu) -> np.ndarray:
    """l(y, x, v, u) = T(y + s v_c, x + s u_c) with centered angular coords."""
    y = np.arange(ny, dtype=np.float64)
    x = np.arange(nx, dtype=np.float64)
    v_c = np.arange(nv) - (nv - 1) / 2
    u_c = np.arange(nu) - (nu - 1) / 2
    ys = y[:, None, None, None] + slope * v_c[None, None, :, None]
    xs = x[None, :, None, None] + slope * u_c[None, None, None, :]
    ys, xs = np.broadcast_arrays(ys, xs)
    out = np.empty((ny, nx, nv, nu, 3), dtype=np.float64)
    for ch in range(3):
        out[..., ch] = map_coordinates(tex[..., ch], [ys.ravel(), xs.ravel()],
                                       order=1, mode="nearest").reshape(ys.shape)
    return out


def generate(preset: str, ny: int = 64, nx: int = 64, nv: int = 8, nu: int = 8,
             seed: int = 0) -> LightField4D:
    """Build a named synthetic light field; identical seeds give identical fields."""
    rng = np.random.default_rng(seed)
    if preset == "gaussian":
        sigma_s, sigma_a = nx / 8.0, max(nu / 3.0, 1.0)
        y = (np.arange(ny) - (ny - 1) / 2)[:, None, None, None]
        x = (np.arange(nx) - (nx - 1) / 2)[None, :, None, None]
        v = (np.arange(nv) - (nv - 1) / 2)[None, None, :, None]
        u = (np.arange(nu) - (nu - 1) / 2)[None, None, None, :]
        blob = np.exp(-(x * x + y * y) / (2 * sigma_s ** 2)
                      - (u * u + v * v) / (2 * sigma_a ** 2))
        samples = np.repeat(blob[..., None], 3, axis=-1)
        return LightField4D(samples=samples.astype(np.float32))
    if preset == "two-plane":
        s_left, s_right = TWO_PLANE_SLOPES
        left = _plane_field(_texture(ny, nx, rng), s_left, ny, nx, nv, nu)
        right = _plane_field(_texture(ny, nx, rng), s_right, ny, nx, nv, nu)
        half = nx // 2
        samples = np.concatenate([left[:, :half], right[:, half:]], axis=1)
        a_left, a_right = two_plane_alphas()
        depth = np.full((ny, nx), a_left, dtype=np.float32)
        depth[:, half:] = a_right
        return LightField4D(samples=samples.astype(np.float32), depth_map=depth)
    if preset == "noise-edges":
        base = _texture(ny, nx, rng, smooth=1.5)
        samples = _plane_field(base, 0.1, ny, nx, nv, nu)
        samples += 0.05 * rng.standard_normal(samples.shape)
        return LightField4D(samples=np.clip(samples, 0.0, None).astype(np.float32))
    raise ValueError(f"unknown preset {preset!r} (choose from {PRESETS})")
