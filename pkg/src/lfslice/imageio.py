"""Raster I/O: portable float maps (PFM) and tone-mapped 8-bit PNG."""

from __future__ import annotations

import io

import numpy as np
from PIL import Image as PILImage

REINHARD_KEY = 0.18  # fixed tone-map key for display output


def write_pfm(path, data: np.ndarray) -> None:
    """Write a (H, W) or (H, W, 3) float32 array as a little-endian PFM."""
    data = np.asarray(data, dtype=np.float32)
    if data.ndim == 2:
        header = b"Pf"
    elif data.ndim == 3 and data.shape[2] == 3:
        header = b"PF"
    else:
        raise ValueError("PFM supports 1- or 3-channel rasters")
    h, w = data.shape[:2]
    with open(path, "wb") as f:
        f.write(header + b"\n")
        f.write(f"{w} {h}\n".encode())
        f.write(b"-1.0\n")  # negative scale = little-endian
        f.write(np.flipud(data).tobytes())  # PFM stores rows bottom-up


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        header = f.readline().strip()
        if header not in (b"Pf", b"PF"):
            raise ValueError("not a PFM file")
        w, h = map(int, f.readline().split())
        scale = float(f.readline())
        count = w * h * (3 if header == b"PF" else 1)
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(f.read(count * 4), dtype=dtype, count=count)
    shape = (h, w, 3) if header == b"PF" else (h, w)
    return np.flipud(data.reshape(shape)).astype(np.float32)


def tone_map(linear: np.ndarray, key: float = REINHARD_KEY) -> np.ndarray:
    """Reinhard global operator on linear radiance; returns uint8 RGB."""
    rgb = np.clip(np.asarray(linear, dtype=np.float64), 0.0, None)
    if rgb.ndim == 2:
        rgb = np.repeat(rgb[..., None], 3, axis=-1)
    lum = 0.2126 * rgb[..., 0] + 0.7152 * rgb[..., 1] + 0.0722 * rgb[..., 2]
    mean = np.exp(np.mean(np.log(lum + 1e-8)))
    scaled = rgb * (key / max(mean, 1e-12))
    mapped = scaled / (1.0 + scaled)
    return np.clip(np.rint(mapped ** (1.0 / 2.2) * 255.0), 0, 255).astype(np.uint8)


def write_png(path, linear: np.ndarray) -> None:
    PILImage.fromarray(tone_map(linear)).save(path, format="PNG")


def png_bytes(linear: np.ndarray, width: int | None = None) -> bytes:
    img = PILImage.fromarray(tone_map(linear))
    if width is not None and width != img.width:
        height = max(1, round(img.height * width / img.width))
        img = img.resize((width, height), PILImage.LANCZOS)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def read_image(path) -> np.ndarray:
    """Load a raster (PNG/common formats or PFM) as float32, shape (H, W, 3).

    8-bit integer formats are treated as already-linear radiance scaled to
    [0, 1] (synthetic inputs; no gamma assumption is made for test data).
    """
    path = str(path)
    if path.lower().endswith(".pfm"):
        data = read_pfm(path)
        if data.ndim == 2:
            data = np.repeat(data[..., None], 3, axis=-1)
        return data
    img = PILImage.open(path).convert("RGB")
    return np.asarray(img, dtype=np.float32) / 255.0
