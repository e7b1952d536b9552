"""Sparse polar-wavelet light-field compression and refocusing."""

from .generate import generate, two_plane_alphas
from .lightfield import (
    LightField4D,
    SparseLightField,
    analyze,
    ingest,
    load_sparse,
    save_sparse,
    synthesize,
    threshold,
)
from .oracle import (
    ErrorReport,
    compare,
    fourier_slice_classic,
    gaussian_sheared_analytic,
    shear_project_pixel,
)
from .polarwavelet import (
    FrameConfig,
    WaveletIndex,
    forward_transform_1d,
    forward_transform_2d,
    inverse_transform_1d,
    inverse_transform_2d,
    radial_window,
    scaling_window,
    wavelet_hat,
    wavelet_spatial,
)
from .reconstruct import (
    Image,
    ReconstructionRequest,
    SparseImage,
    project_2d,
    refocus,
    refocus_all_focus,
    refocus_to_sparse,
)
from .slicekernel import KernelCache

__all__ = [
    "ErrorReport",
    "FrameConfig",
    "Image",
    "KernelCache",
    "LightField4D",
    "ReconstructionRequest",
    "SparseImage",
    "SparseLightField",
    "WaveletIndex",
    "analyze",
    "compare",
    "forward_transform_1d",
    "forward_transform_2d",
    "fourier_slice_classic",
    "gaussian_sheared_analytic",
    "generate",
    "ingest",
    "inverse_transform_1d",
    "inverse_transform_2d",
    "load_sparse",
    "project_2d",
    "radial_window",
    "refocus",
    "refocus_all_focus",
    "refocus_to_sparse",
    "save_sparse",
    "scaling_window",
    "shear_project_pixel",
    "synthesize",
    "threshold",
    "two_plane_alphas",
    "wavelet_hat",
    "wavelet_spatial",
]

__version__ = "0.1.0"
