"""4D light-field model: ingestion, separable wavelet analysis, thresholding,
and the LFSW sparse coefficient file format."""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .imageio import read_image, read_pfm
from .polarwavelet import (
    FrameCoefficients2D,
    FrameConfig,
    forward_transform_2d,
    inverse_transform_2d,
    padded_extent,
)

LFSW_MAGIC = b"LFSW"
LFSW_VERSION = 1
HP_LEVEL_CODE = 15  # packed-key level nibble reserved for the highpass band


# ---------------------------------------------------------------------------
# Dense light field
# ---------------------------------------------------------------------------

@dataclass
class LightField4D:
    """Dense two-plane light field; samples indexed (y, x, v, u, channel)."""

    samples: np.ndarray
    meta: dict = field(default_factory=dict)
    depth_map: np.ndarray | None = None

    def __post_init__(self):
        if self.samples.ndim != 5 or self.samples.shape[4] != 3:
            raise ValueError("samples must have shape (ny, nx, nv, nu, 3)")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("light field contains non-finite samples")

    @property
    def dims(self) -> tuple[int, int, int, int]:
        ny, nx, nv, nu, _ = self.samples.shape
        return ny, nx, nv, nu

    def norm_l2(self) -> float:
        return float(np.sqrt(np.sum(self.samples.astype(np.float64) ** 2)))


def ingest(manifest_path) -> LightField4D:
    """Load a light field described by a JSON manifest (views or raw layout)."""
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot read manifest: {exc}") from exc
    for key in ("type", "nx", "ny", "nu", "nv"):
        if key not in manifest:
            raise ValueError(f"manifest missing field {key!r}")
    ny, nx = manifest["ny"], manifest["nx"]
    nv, nu = manifest["nv"], manifest["nu"]
    base = manifest_path.parent

    if manifest["type"] == "views":
        files = manifest.get("files")
        if files is None or len(files) != nv * nu:
            raise ValueError("manifest must list nv*nu view files")
        samples = np.empty((ny, nx, nv, nu, 3), dtype=np.float32)
        for v in range(nv):
            for u in range(nu):
                name = files[v * nu + u]
                if name is None or not (base / name).exists():
                    raise ValueError(f"missing view ({u},{v})")
                img = read_image(base / name)
                if img.shape[:2] != (ny, nx):
                    raise ValueError(
                        f"view ({u},{v}) has resolution {img.shape[1]}x"
                        f"{img.shape[0]}, expected {nx}x{ny}")
                samples[:, :, v, u, :] = img
    elif manifest["type"] == "raw":
        path = base / manifest["file"]
        if manifest.get("layout", "y,x,v,u,c") != "y,x,v,u,c":
            raise ValueError("unsupported raw layout")
        channels = manifest.get("channels", 3)
        count = ny * nx * nv * nu * channels
        data = np.fromfile(path, dtype="<f4")
        if data.size != count:
            raise ValueError(f"raw file has {data.size} floats, expected {count}")
        samples = data.reshape(ny, nx, nv, nu, channels)
        if channels == 1:
            samples = np.repeat(samples, 3, axis=4)
    else:
        raise ValueError(f"unknown manifest type {manifest['type']!r}")

    if not np.all(np.isfinite(samples)):
        raise ValueError("light field contains non-finite samples")
    depth = None
    if manifest.get("depth_map"):
        depth = read_pfm(base / manifest["depth_map"])
        if depth.ndim == 3:
            depth = depth[..., 0]
    return LightField4D(samples=np.ascontiguousarray(samples, dtype=np.float32),
                        meta=manifest.get("meta", {}), depth_map=depth)


# ---------------------------------------------------------------------------
# Separable analysis
# ---------------------------------------------------------------------------

def clamp_frame(frame: FrameConfig, n_spatial: int, n_angular: int) -> FrameConfig:
    """Clamp j_max to the plane's resolution (limited angular sampling)."""
    j_cap = int(math.floor(math.log2(min(n_spatial, n_angular))))
    if j_cap >= frame.j_max:
        return frame
    return replace(frame, j_max=j_cap, orientations=frame.orientations[:j_cap + 1])


@dataclass
class DenseCoefficients4D:
    """Dense separable coefficients l_sr, grouped per band pair.

    bands[((j_s, t_s), (j_r, t_r))] has shape (3, a, b, e, f): channel, then
    the (x, u) lattice of s, then the (y, v) lattice of r, all on the padded
    grids of the respective planes.
    """

    frame_x: FrameConfig
    frame_y: FrameConfig
    bands: dict
    dims: tuple[int, int, int, int]
    norm_l2: float

    def pair_count(self) -> int:
        return sum(int(np.prod(b.shape[1:])) for b in self.bands.values())


def plane_padding(frame: FrameConfig, n_spatial: int, n_angular: int):
    """((padded_spatial, lo_spatial), (padded_angular, lo_angular)) for a plane."""
    return padded_extent(n_spatial, frame), padded_extent(n_angular, frame)


def analyze(lf: LightField4D, frame: FrameConfig,
            angular_pad: str = "zero") -> DenseCoefficients4D:
    """Tensor-product analysis: (x,u) planes first, then (y,v) planes.

    Spatial axes are edge-replicated; angular axes default to zero padding so
    that the synthesized continuous model integrates to the true aperture sum
    (edge-replicating the aperture would add spurious mass to every projection).
    """
    ny, nx, nv, nu = lf.dims
    frame_x = clamp_frame(frame, nx, nu)
    frame_y = clamp_frame(frame, ny, nv)
    work = lf.samples.astype(np.float64).transpose(0, 2, 4, 1, 3)  # (y,v,c,x,u)
    stage1 = forward_transform_2d(work, frame_x, pad_modes=("edge", angular_pad))
    bands = {}
    for s_key, arr in stage1.bands.items():
        # (y,v,c,a,b) -> (c,a,b,y,v)
        arr2 = arr.transpose(2, 3, 4, 0, 1)
        stage2 = forward_transform_2d(arr2, frame_y, pad_modes=("edge", angular_pad))
        for r_key, out in stage2.bands.items():
            bands[(s_key, r_key)] = out
    return DenseCoefficients4D(frame_x=frame_x, frame_y=frame_y, bands=bands,
                               dims=lf.dims, norm_l2=lf.norm_l2())


def synthesize(dense: DenseCoefficients4D) -> np.ndarray:
    """Inverse of analyze; returns samples (ny, nx, nv, nu, 3)."""
    ny, nx, nv, nu = dense.dims
    (py, lo_y), (pv, lo_v) = plane_padding(dense.frame_y, ny, nv)
    (px, lo_x), (pu, lo_u) = plane_padding(dense.frame_x, nx, nu)
    stage1_bands = {}
    s_keys = sorted({s for s, _ in dense.bands}, key=str)
    for s_key in s_keys:
        sub = {r_key: arr for (s, r_key), arr in dense.bands.items() if s == s_key}
        coeffs = FrameCoefficients2D(dense.frame_y, sub, (ny, nv),
                                     (lo_y, lo_v), (py, pv))
        rec = inverse_transform_2d(coeffs)  # (c,a,b,y,v)
        stage1_bands[s_key] = rec.transpose(3, 4, 0, 1, 2)  # (y,v,c,a,b)
    coeffs1 = FrameCoefficients2D(dense.frame_x, stage1_bands, (nx, nu),
                                  (lo_x, lo_u), (px, pu))
    rec = inverse_transform_2d(coeffs1)  # (y,v,c,x,u)
    return rec.transpose(0, 3, 1, 4, 2)  # (y,x,v,u,c)


# ---------------------------------------------------------------------------
# Packed keys
# ---------------------------------------------------------------------------

def level_code(j: int, frame: FrameConfig) -> int:
    if j == frame.highpass_level:
        return HP_LEVEL_CODE
    return j + 1  # scaling (-1) -> 0


def code_level(code: int, frame: FrameConfig) -> int:
    if code == HP_LEVEL_CODE:
        return frame.highpass_level
    return code - 1


def pack_keys(j: int, t: int, k1: np.ndarray, k2: np.ndarray,
              frame: FrameConfig) -> np.ndarray:
    code = level_code(j, frame)
    return ((np.uint64(code) << np.uint64(60))
            | (np.uint64(t) << np.uint64(54))
            | (k1.astype(np.uint64) << np.uint64(27))
            | k2.astype(np.uint64))


def unpack_keys(keys: np.ndarray, frame: FrameConfig):
    """Returns (j, t, k1, k2) integer arrays."""
    codes = (keys >> np.uint64(60)).astype(np.int64)
    t = ((keys >> np.uint64(54)) & np.uint64(0x3F)).astype(np.int64)
    k1 = ((keys >> np.uint64(27)) & np.uint64((1 << 27) - 1)).astype(np.int64)
    k2 = (keys & np.uint64((1 << 27) - 1)).astype(np.int64)
    j = np.where(codes == HP_LEVEL_CODE, frame.highpass_level, codes - 1)
    return j, t, k1, k2


# ---------------------------------------------------------------------------
# Sparse light field
# ---------------------------------------------------------------------------

@dataclass
class SparseLightField:
    """Thresholded separable coefficients as a sorted coordinate list."""

    frame_x: FrameConfig
    frame_y: FrameConfig
    keys_s: np.ndarray   # u64, packed (level, t, k1, k2) on the (x,u) plane
    keys_r: np.ndarray   # u64, same on the (y,v) plane
    values: np.ndarray   # (n, 3) float32
    threshold_eps: float
    coeff_rms: float     # |l|_2 / sqrt(M) used by the threshold
    dims: tuple[int, int, int, int]
    dense_count: int

    @property
    def nnz(self) -> int:
        return int(self.keys_s.shape[0])

    @property
    def compression_rate(self) -> float:
        return self.dense_count / max(self.nnz, 1) if self.nnz else float("inf")

    def plane_paddings(self):
        ny, nx, nv, nu = self.dims
        return (plane_padding(self.frame_x, nx, nu),
                plane_padding(self.frame_y, ny, nv))

    def retain(self, eps_rel: float) -> "SparseLightField":
        """Re-threshold at a (typically larger) eps without reanalysis."""
        peak = np.max(np.abs(self.values), axis=1)
        keep = peak >= eps_rel * self.coeff_rms
        if eps_rel > 0:
            keep &= peak > 0
        return replace_entries(self, self.keys_s[keep], self.keys_r[keep],
                               self.values[keep], eps_rel)


def replace_entries(slf: SparseLightField, keys_s, keys_r, values,
                    eps: float) -> SparseLightField:
    return SparseLightField(frame_x=slf.frame_x, frame_y=slf.frame_y,
                            keys_s=keys_s, keys_r=keys_r, values=values,
                            threshold_eps=eps, coeff_rms=slf.coeff_rms,
                            dims=slf.dims, dense_count=slf.dense_count)


def threshold(dense: DenseCoefficients4D, eps_rel: float) -> SparseLightField:
    """Hard-threshold: keep (s,r) iff max-channel |l_sr| >= eps_rel * RMS."""
    if eps_rel < 0:
        raise ValueError("eps_rel must be >= 0")
    n_pairs = dense.pair_count()
    rms = dense.norm_l2 / math.sqrt(n_pairs * 3)
    cut = eps_rel * rms
    all_s, all_r, all_v = [], [], []
    for ((j_s, t_s), (j_r, t_r)), arr in dense.bands.items():
        _, a, b, e, f = arr.shape
        flat = arr.reshape(3, -1)
        peak = np.max(np.abs(flat), axis=0)
        mask = peak >= cut
        if eps_rel > 0:  # a positive threshold never retains exact zeros
            mask &= peak > 0
        if math.isinf(eps_rel):
            mask[:] = False
        idx = np.nonzero(mask)[0]
        if idx.size == 0:
            continue
        ks1, ks2, kr1, kr2 = np.unravel_index(idx, (a, b, e, f))
        all_s.append(pack_keys(j_s, t_s, ks1, ks2, dense.frame_x))
        all_r.append(pack_keys(j_r, t_r, kr1, kr2, dense.frame_y))
        all_v.append(flat[:, idx].T.astype(np.float32))
    if all_s:
        keys_s = np.concatenate(all_s)
        keys_r = np.concatenate(all_r)
        values = np.concatenate(all_v)
        order = np.lexsort((keys_r, keys_s))
        keys_s, keys_r, values = keys_s[order], keys_r[order], values[order]
    else:
        keys_s = np.zeros(0, dtype=np.uint64)
        keys_r = np.zeros(0, dtype=np.uint64)
        values = np.zeros((0, 3), dtype=np.float32)
    return SparseLightField(frame_x=dense.frame_x, frame_y=dense.frame_y,
                            keys_s=keys_s, keys_r=keys_r, values=values,
                            threshold_eps=float(eps_rel), coeff_rms=rms,
                            dims=dense.dims, dense_count=n_pairs)


def scatter_to_dense(slf: SparseLightField) -> DenseCoefficients4D:
    """Expand the coordinate list back to (zero-filled) dense band arrays."""
    ny, nx, nv, nu = slf.dims
    (px, lo_x), (pu, lo_u) = plane_padding(slf.frame_x, nx, nu)
    (py, lo_y), (pv, lo_v) = plane_padding(slf.frame_y, ny, nv)
    bands = {}
    for s_key in slf.frame_x.bands():
        d_s = slf.frame_x.lattice_step(s_key[0])
        for r_key in slf.frame_y.bands():
            d_r = slf.frame_y.lattice_step(r_key[0])
            shape = (3, px // d_s, pu // d_s, py // d_r, pv // d_r)
            bands[(s_key, r_key)] = np.zeros(shape)
    js, ts, ks1, ks2 = unpack_keys(slf.keys_s, slf.frame_x)
    jr, tr, kr1, kr2 = unpack_keys(slf.keys_r, slf.frame_y)
    for key, arr in bands.items():
        (j_s, t_s), (j_r, t_r) = key
        m = (js == j_s) & (ts == t_s) & (jr == j_r) & (tr == t_r)
        if not np.any(m):
            continue
        arr[:, ks1[m], ks2[m], kr1[m], kr2[m]] = slf.values[m].T
    return DenseCoefficients4D(frame_x=slf.frame_x, frame_y=slf.frame_y,
                               bands=bands, dims=slf.dims,
                               norm_l2=slf.coeff_rms * math.sqrt(
                                   sum(int(np.prod(b.shape[1:])) for b in bands.values()) * 3))


# ---------------------------------------------------------------------------
# LFSW file format
# ---------------------------------------------------------------------------

def _serialize_header(slf: SparseLightField) -> bytes:
    parts = [struct.pack("<4I", *slf.dims), struct.pack("<I", 3)]
    parts.append(struct.pack("<ddQ", slf.threshold_eps, slf.coeff_rms,
                             slf.dense_count))
    for cfg in (slf.frame_x, slf.frame_y):
        doc = cfg.to_json().encode()
        parts.append(struct.pack("<I", len(doc)) + doc)
    parts.append(struct.pack("<Q", slf.nnz))
    return b"".join(parts)


def save_sparse(slf: SparseLightField, path) -> None:
    header = _serialize_header(slf)
    entries = np.zeros(slf.nnz, dtype=[("s", "<u8"), ("r", "<u8"), ("v", "<f4", 3)])
    entries["s"] = slf.keys_s
    entries["r"] = slf.keys_r
    entries["v"] = slf.values
    payload = header + entries.tobytes()
    checksum = hashlib.blake2b(payload, digest_size=8).digest()
    with open(path, "wb") as f:
        f.write(LFSW_MAGIC + struct.pack("<I", LFSW_VERSION) + payload + checksum)


def load_sparse(path) -> SparseLightField:
    blob = Path(path).read_bytes()
    if blob[:4] != LFSW_MAGIC:
        raise ValueError("not an LFSW file")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != LFSW_VERSION:
        raise ValueError(f"unsupported LFSW version {version}")
    payload, checksum = blob[8:-8], blob[-8:]
    if hashlib.blake2b(payload, digest_size=8).digest() != checksum:
        raise ValueError("LFSW checksum mismatch")
    off = 0
    ny, nx, nv, nu, channels = struct.unpack_from("<5I", payload, off)
    off += 20
    eps, rms, dense_count = struct.unpack_from("<ddQ", payload, off)
    off += 24
    frames = []
    for _ in range(2):
        (n,) = struct.unpack_from("<I", payload, off)
        off += 4
        frames.append(FrameConfig.from_json(payload[off:off + n].decode()))
        off += n
    (nnz,) = struct.unpack_from("<Q", payload, off)
    off += 8
    entry_dtype = np.dtype([("s", "<u8"), ("r", "<u8"), ("v", "<f4", 3)])
    expected = off + nnz * entry_dtype.itemsize
    if len(payload) != expected:
        raise ValueError("truncated LFSW file")
    entries = np.frombuffer(payload, dtype=entry_dtype, count=nnz, offset=off)
    return SparseLightField(frame_x=frames[0], frame_y=frames[1],
                            keys_s=entries["s"].copy(), keys_r=entries["r"].copy(),
                            values=entries["v"].copy(), threshold_eps=eps,
                            coeff_rms=rms, dims=(ny, nx, nv, nu),
                            dense_count=dense_count)
