"""Reference implementations used to validate the kernel-space reconstruction.

Everything here works directly on samples (pixel-space quadrature, classical
Fourier-slice interpolation, closed forms) and shares the same image-formation
conventions as :mod:`lfslice.reconstruct`:

* output pixel t sits at sensor coordinate c + alpha (t - c), c = (N-1)/2,
* the 4D image integral carries a 1/alpha^2 prefactor,
* pure 2D projections int l(x/alpha + (1 - 1/alpha) u, u) du carry none.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import map_coordinates

from .lightfield import LightField4D


def shear_project_pixel(lf: LightField4D, alpha: float,
                        region: tuple[int, int, int, int] | None = None,
                        rate: int = 1) -> np.ndarray:
    """Pixel-space refocusing: bilinear resampling + aperture sum, 1/alpha^2.

    Angular samples are summed with unit weight (the zero-extension of the
    aperture), matching the zero-padded angular model of ``analyze``.  With
    ``rate`` > 1 the x axis is supersampled at rate positions per pixel and
    box-averaged, mirroring the reconstruction's sampling-rate convention.
    """
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    if rate < 1:
        raise ValueError("rate must be >= 1")
    ny, nx, nv, nu = lf.dims
    y0, y1, x0, x1 = region if region is not None else (0, ny, 0, nx)
    cx, cy = (nx - 1) / 2, (ny - 1) / 2
    t_x = x0 + (np.arange((x1 - x0) * rate) + 0.5) / rate - 0.5
    t_y = np.arange(y0, y1, dtype=np.float64)
    # sensor position / alpha re-expressed: x_src = c/alpha + (t - c) + (1 - 1/alpha) u
    base_x = cx / alpha + (t_x - cx)
    base_y = cy / alpha + (t_y - cy)
    out = np.zeros((y1 - y0, (x1 - x0) * rate, 3))
    shear = 1.0 - 1.0 / alpha
    samples = lf.samples.astype(np.float64)
    for v in range(nv):
        ys = base_y + shear * v
        for u in range(nu):
            xs = base_x + shear * u
            grid = np.meshgrid(ys, xs, indexing="ij")
            for ch in range(3):
                out[:, :, ch] += map_coordinates(samples[:, :, v, u, ch], grid,
                                                 order=1, cval=0.0)
    out /= alpha * alpha
    if rate > 1:
        out = out.reshape(y1 - y0, x1 - x0, rate, 3).mean(axis=2)
    return out


def fourier_slice_classic(signal: np.ndarray, alpha: float,
                          order: int = 1) -> np.ndarray:
    """Classical Fourier-slice projection of a 2D (x, u) field.

    Takes the centered 2D DFT, interpolates it along the line
    (nu, (1 - 1/alpha) nu) with the requested spline order (zero outside
    Nyquist), and inverse-transforms onto the alpha-magnified output raster.
    """
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    signal = np.asarray(signal, dtype=np.float64)
    nx, nu = signal.shape
    spec = np.fft.fftshift(np.fft.fft2(signal))
    # output frequencies in centered order
    nu_c = 2.0 * np.pi * (np.arange(nx) - nx // 2) / nx
    a_idx = np.arange(nx, dtype=np.float64)
    b_idx = (1.0 - 1.0 / alpha) * nu_c / (2.0 * np.pi / nu) + nu // 2
    coords = np.stack([a_idx, b_idx])
    sliced = (map_coordinates(spec.real, coords, order=order, cval=0.0)
              + 1j * map_coordinates(spec.imag, coords, order=order, cval=0.0))
    # shift to the centered, alpha-magnified output raster
    c = (nx - 1) / 2
    phase = np.exp(1j * nu_c * (c / alpha - c))
    return np.fft.ifft(np.fft.ifftshift(sliced * phase)).real


def gaussian_sheared_analytic(x: np.ndarray, sigma: float, alpha: float) -> np.ndarray:
    """Closed-form sheared projection of l(x, u) = exp(-(x^2 + u^2)/(2 sigma^2)).

    int exp(-((x/alpha + (1 - 1/alpha) u)^2 + u^2) / (2 sigma^2)) du
      = sqrt(2 pi) sigma (alpha / c_alpha) exp(-x^2 / (2 sigma^2 c_alpha^2)).
    """
    c2 = alpha * alpha + (1.0 - alpha) ** 2
    x = np.asarray(x, dtype=np.float64)
    return math.sqrt(2.0 * np.pi) * sigma * alpha / math.sqrt(c2) \
        * np.exp(-x * x / (2.0 * sigma * sigma * c2))


@dataclass
class ErrorReport:
    """L1/L2/Linf errors, absolute and relative (Linf relative to the
    reference dynamic range, L1/L2 to the reference norms)."""

    l1: float
    l2: float
    linf: float
    rel_l1: float
    rel_l2: float
    rel_linf: float
    rmse: float
    n_samples: int
    per_channel: tuple = ()

    @property
    def max_abs(self) -> float:
        return self.linf

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def _norms(diff: np.ndarray, ref: np.ndarray) -> tuple[float, float, float, float, float, float]:
    l1 = float(np.sum(np.abs(diff)))
    l2 = math.sqrt(float(np.sum(diff ** 2)))
    linf = float(np.max(np.abs(diff))) if diff.size else 0.0
    ref_l1 = float(np.sum(np.abs(ref)))
    ref_l2 = math.sqrt(float(np.sum(ref ** 2)))
    ref_range = float(np.max(ref) - np.min(ref)) if ref.size else 0.0
    return (l1, l2, linf,
            l1 / ref_l1 if ref_l1 > 0 else math.inf,
            l2 / ref_l2 if ref_l2 > 0 else math.inf,
            linf / ref_range if ref_range > 0 else math.inf)


def compare(result: np.ndarray, reference: np.ndarray,
            margin: int = 0) -> ErrorReport:
    """Error metrics of ``result`` against ``reference``.

    ``margin`` excludes a border that many pixels wide (leading two axes)
    from the comparison, e.g. to skip apron-affected rows.
    """
    a = np.asarray(result, dtype=np.float64)
    b = np.asarray(reference, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("shape mismatch between result and reference")
    if margin:
        a = a[margin:-margin, margin:-margin]
        b = b[margin:-margin, margin:-margin]
    diff = a - b
    l1, l2, linf, rl1, rl2, rlinf = _norms(diff, b)
    per_channel = ()
    if diff.ndim == 3:
        per_channel = tuple(_norms(diff[..., ch], b[..., ch])
                            for ch in range(diff.shape[-1]))
    return ErrorReport(l1=l1, l2=l2, linf=linf,
                       rel_l1=rl1, rel_l2=rl2, rel_linf=rlinf,
                       rmse=l2 / math.sqrt(max(diff.size, 1)),
                       n_samples=int(diff.size), per_channel=per_channel)
