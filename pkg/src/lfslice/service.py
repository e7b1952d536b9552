"""HTTP service for interactive refocusing over one loaded sparse field.

Endpoints: GET /metadata, GET /refocus, GET /allfocus.  Responses are PNG
bytes with timing/sparsity headers; errors are JSON bodies {code, message}.
The field is immutable after load; rendered responses are cached under a
fixed byte budget with LRU eviction (alpha quantized to 1e-3 in cache keys).
"""

from __future__ import annotations

import threading
import time
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from .imageio import png_bytes, read_pfm
from .lightfield import SparseLightField, load_sparse
from .reconstruct import ReconstructionRequest, refocus, refocus_all_focus
from .slicekernel import KernelCache

ALPHA_RANGE = (0.5, 1.5)
ALPHA_KEY_QUANTUM = 1e-3
CACHE_BYTE_BUDGET = 32 * 1024 * 1024
MAX_WIDTH = 1024


@dataclass
class RenderCache:
    """LRU cache of rendered responses under a total byte budget."""

    budget: int = CACHE_BYTE_BUDGET
    _entries: OrderedDict = field(default_factory=OrderedDict)
    _bytes: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def get(self, key):
        with self._lock:
            entry = self._entries.get(key)
            if entry is not None:
                self._entries.move_to_end(key)
            return entry

    def put(self, key, value) -> None:
        size = len(value[0])
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = value
            self._bytes += size
            while self._bytes > self.budget and len(self._entries) > 1:
                _, (old_png, _) = self._entries.popitem(last=False)
                self._bytes -= len(old_png)


@dataclass
class Engine:
    """Immutable loaded field plus shared kernel and render caches."""

    slf: SparseLightField | None = None
    depth_map: np.ndarray | None = None
    kernels: KernelCache = field(default_factory=KernelCache)
    renders: RenderCache = field(default_factory=RenderCache)
    _retained: dict = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def retained(self, eps: float) -> SparseLightField:
        with self._lock:
            sub = self._retained.get(eps)
            if sub is None:
                sub = (self.slf if eps <= self.slf.threshold_eps
                       else self.slf.retain(eps))
                self._retained[eps] = sub
            return sub


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse({"code": code, "message": message}, status_code=status)


def _sharpness(img: np.ndarray) -> tuple[float, float]:
    """Mean gradient energy of the left and right halves (luma)."""
    luma = img.mean(axis=2)
    gy, gx = np.gradient(luma)
    energy = gy * gy + gx * gx
    half = energy.shape[1] // 2
    return float(energy[:, :half].mean()), float(energy[:, half:].mean())


def create_app(lfsw_path=None, depth_path=None,
               slf: SparseLightField | None = None,
               depth_map: np.ndarray | None = None) -> FastAPI:
    """Build the service app; the field may come from disk or be injected."""
    engine = Engine()
    if lfsw_path is not None:
        slf = load_sparse(lfsw_path)
    if depth_path is not None:
        depth_map = read_pfm(depth_path)
        if depth_map.ndim == 3:
            depth_map = depth_map[..., 0]
    engine.slf = slf
    engine.depth_map = depth_map

    app = FastAPI(title="lfslice refocus service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["GET"], allow_headers=["*"],
                       expose_headers=["*"])
    app.state.engine = engine

    @app.get("/metadata")
    def metadata():
        if engine.slf is None:
            return _error(503, "no_field", "no light field loaded")
        s = engine.slf
        return {
            "dims": list(s.dims),
            "j_max": s.frame_x.j_max,
            "orientations": list(s.frame_x.orientations),
            "nnz": s.nnz,
            "cr": s.compression_rate,
            "eps": s.threshold_eps,
            "alpha_range": list(ALPHA_RANGE),
            "has_depth_map": engine.depth_map is not None,
        }

    def _render(key, build) -> Response:
        cached = engine.renders.get(key)
        if cached is not None:
            png, headers = cached
            headers = dict(headers, **{"X-Cache": "cached"})
            return Response(png, media_type="image/png", headers=headers)
        t0 = time.perf_counter()
        img, width = build()
        ms = (time.perf_counter() - t0) * 1000.0
        png = png_bytes(img.data, width=width)
        left, right = _sharpness(img.data.astype(np.float64))
        headers = {
            "X-Compute-Ms": f"{ms:.2f}",
            "X-Cache": "miss",
            "X-Nnz-Used": str(img.provenance.get("nnz_used", 0)),
            "X-Sharpness-Left": f"{left:.6e}",
            "X-Sharpness-Right": f"{right:.6e}",
        }
        engine.renders.put(key, (png, headers))
        return Response(png, media_type="image/png", headers=headers)

    @app.get("/refocus")
    def refocus_endpoint(request: Request, alpha: float = 1.0,
                         eps: float | None = None, levels: int | None = None,
                         width: int | None = None):
        if engine.slf is None:
            return _error(503, "no_field", "no light field loaded")
        if not ALPHA_RANGE[0] <= alpha <= ALPHA_RANGE[1]:
            return _error(400, "bad_alpha",
                          f"alpha must be in [{ALPHA_RANGE[0]}, {ALPHA_RANGE[1]}]")
        stored = engine.slf.threshold_eps
        if eps is None:
            eps = stored
        if eps < stored:
            return _error(400, "bad_eps",
                          f"eps must be >= stored threshold {stored}")
        if width is not None and not 16 <= width <= MAX_WIDTH:
            return _error(400, "bad_width",
                          f"width must be in [16, {MAX_WIDTH}]")
        hp = engine.slf.frame_x.highpass_level
        if levels is not None and not -1 <= levels <= hp:
            return _error(400, "bad_levels",
                          f"levels must be in [-1, {hp}]")
        alpha_q = round(alpha / ALPHA_KEY_QUANTUM) * ALPHA_KEY_QUANTUM
        key = ("refocus", alpha_q, eps, levels, width)

        def build():
            sub = engine.retained(eps)
            req = ReconstructionRequest(alpha=alpha_q, levels=levels)
            return refocus(sub, req, cache=engine.kernels), width

        return _render(key, build)

    @app.get("/allfocus")
    def allfocus_endpoint(width: int | None = None):
        if engine.slf is None:
            return _error(503, "no_field", "no light field loaded")
        if engine.depth_map is None:
            return _error(409, "no_depth_map", "no depth map loaded")
        if width is not None and not 16 <= width <= MAX_WIDTH:
            return _error(400, "bad_width",
                          f"width must be in [16, {MAX_WIDTH}]")
        key = ("allfocus", width)

        def build():
            req = ReconstructionRequest(alpha_mode="depth",
                                        depth_map=engine.depth_map,
                                        depth_to_alpha=(0.0, 1.0),
                                        alpha_clamp=ALPHA_RANGE)
            return refocus_all_focus(engine.slf, req,
                                     cache=engine.kernels), width

        return _render(key, build)

    return app
