import json
import math

import numpy as np
import pytest

from lfslice.imageio import write_pfm
from lfslice.lightfield import (
    DenseCoefficients4D,
    LightField4D,
    analyze,
    clamp_frame,
    ingest,
    load_sparse,
    pack_keys,
    plane_padding,
    save_sparse,
    scatter_to_dense,
    synthesize,
    threshold,
    unpack_keys,
)
from lfslice.polarwavelet import FrameConfig, WaveletIndex, wavelet_hat

rng = np.random.default_rng(23)


def random_field(ny=8, nx=8, nv=4, nu=4, interior=False):
    samples = rng.standard_normal((ny, nx, nv, nu, 3))
    if interior:  # zero near all boundaries so pad-mode choices cannot matter
        w = np.zeros((ny, nx, nv, nu, 1))
        w[2:-2, 2:-2, 1:-1, 1:-1] = 1.0
        samples = samples * w
    return LightField4D(samples=samples.astype(np.float32))


# ---------------------------------------------------------------------------
# Ingest
# ---------------------------------------------------------------------------

def test_ingest_views_pfm(tmp_path):
    ny, nx, nv, nu = 8, 10, 2, 3
    views = rng.random((nv, nu, ny, nx, 3)).astype(np.float32)
    files = []
    for v in range(nv):
        for u in range(nu):
            name = f"view_{v}_{u}.pfm"
            write_pfm(tmp_path / name, views[v, u])
            files.append(name)
    manifest = {"type": "views", "nx": nx, "ny": ny, "nu": nu, "nv": nv,
                "channels": 3, "files": files}
    (tmp_path / "field.json").write_text(json.dumps(manifest))
    lf = ingest(tmp_path / "field.json")
    assert lf.dims == (ny, nx, nv, nu)
    np.testing.assert_allclose(lf.samples[:, :, 1, 2], views[1, 2], atol=1e-7)


def test_ingest_missing_view(tmp_path):
    manifest = {"type": "views", "nx": 4, "ny": 4, "nu": 4, "nv": 6,
                "files": [None] * 24}
    (tmp_path / "field.json").write_text(json.dumps(manifest))
    with pytest.raises(ValueError, match=r"missing view \(0,0\)"):
        ingest(tmp_path / "field.json")


def test_ingest_raw_round_trip(tmp_path):
    lf = random_field(4, 6, 2, 3)
    raw = tmp_path / "field.raw"
    lf.samples.astype("<f4").tofile(raw)
    manifest = {"type": "raw", "nx": 6, "ny": 4, "nu": 3, "nv": 2,
                "channels": 3, "file": "field.raw", "layout": "y,x,v,u,c"}
    (tmp_path / "field.json").write_text(json.dumps(manifest))
    lf2 = ingest(tmp_path / "field.json")
    assert np.array_equal(lf2.samples, lf.samples)


def test_ingest_rejects_nonfinite(tmp_path):
    data = np.full((2, 2, 2, 2, 3), np.nan, dtype="<f4")
    data.tofile(tmp_path / "bad.raw")
    manifest = {"type": "raw", "nx": 2, "ny": 2, "nu": 2, "nv": 2,
                "file": "bad.raw"}
    (tmp_path / "field.json").write_text(json.dumps(manifest))
    with pytest.raises(ValueError, match="non-finite"):
        ingest(tmp_path / "field.json")


def test_ingest_bad_manifest(tmp_path):
    (tmp_path / "field.json").write_text(json.dumps({"type": "views"}))
    with pytest.raises(ValueError, match="missing field"):
        ingest(tmp_path / "field.json")


# ---------------------------------------------------------------------------
# Analysis
# ---------------------------------------------------------------------------

def test_clamp_frame_limited_angular_resolution():
    frame = FrameConfig.isotropic(j_max=4)
    clamped = clamp_frame(frame, 64, 8)
    assert clamped.j_max == 3
    assert clamp_frame(frame, 64, 64).j_max == 4


def test_analyze_constant_field_scaling_only():
    # with edge-replicated angular padding a constant field is constant on the
    # whole padded domain, so wavelet bands vanish identically
    lf = LightField4D(samples=np.full((8, 8, 4, 4, 3), 2.5, dtype=np.float32))
    dense = analyze(lf, FrameConfig.isotropic(j_max=2), angular_pad="edge")
    for ((j_s, _), (j_r, _)), arr in dense.bands.items():
        if j_s == -1 and j_r == -1:
            assert np.max(np.abs(arr)) > 1.0
        else:
            assert np.max(np.abs(arr)) < 1e-9 * 2.5


def test_analyze_parseval_per_channel():
    lf = random_field(16, 16, 8, 8, interior=True)
    dense = analyze(lf, FrameConfig.isotropic(j_max=2))
    for ch in range(3):
        coeff_energy = sum(float(np.sum(arr[ch] ** 2))
                           for arr in dense.bands.values())
        sig_energy = float(np.sum(lf.samples[..., ch].astype(np.float64) ** 2))
        assert coeff_energy == pytest.approx(sig_energy, rel=1e-10)


def test_analyze_matches_brute_force_inner_products():
    lf = random_field(8, 8, 4, 4, interior=True)
    frame = FrameConfig.isotropic(j_max=2)
    dense = analyze(lf, frame)
    (px, lo_x), (pu, lo_u) = plane_padding(dense.frame_x, 8, 4)
    (py, lo_y), (pv, lo_v) = plane_padding(dense.frame_y, 8, 4)
    padded = np.zeros((py, px, pv, pu, 3))
    padded[lo_y:lo_y + 8, lo_x:lo_x + 8, lo_v:lo_v + 4, lo_u:lo_u + 4] = lf.samples

    def atom(cfg, shape, j, t, k):
        w1 = 2 * np.pi * np.fft.fftfreq(shape[0])[:, None]
        w2 = 2 * np.pi * np.fft.fftfreq(shape[1])[None, :]
        xi = np.stack(np.broadcast_arrays(w1, w2), axis=-1)
        spec = wavelet_hat(WaveletIndex(j=j, k=k, t=t), xi, cfg)
        return np.fft.ifft2(spec).real * shape[0] * shape[1] / (shape[0] * shape[1])

    checks = [((-1, 0, (1, 0)), (-1, 0, (1, 0))),
              ((0, 0, (3, 1)), (1, 0, (2, 1))),
              ((2, 0, (9, 5)), (-1, 0, (1, 0))),
              ((1, 0, (4, 2)), (2, 0, (10, 4)))]
    for (j_s, t_s, k_s), (j_r, t_r, k_r) in checks:
        psi_s = atom(dense.frame_x, (px, pu), j_s, t_s, k_s)
        psi_r = atom(dense.frame_y, (py, pv), j_r, t_r, k_r)
        brute = np.einsum("yxvuc,xu,yv->c", padded, psi_s, psi_r)
        got = dense.bands[((j_s, t_s), (j_r, t_r))][:, k_s[0], k_s[1], k_r[0], k_r[1]]
        np.testing.assert_allclose(got, brute, rtol=1e-5, atol=1e-10)


def test_analyze_synthesize_round_trip():
    lf = random_field(8, 12, 4, 4)
    dense = analyze(lf, FrameConfig.isotropic(j_max=2))
    rec = synthesize(dense)
    np.testing.assert_allclose(rec, lf.samples, atol=1e-10)


# ---------------------------------------------------------------------------
# Thresholding
# ---------------------------------------------------------------------------

def test_threshold_zero_eps_keeps_everything():
    dense = analyze(random_field(), FrameConfig.isotropic(j_max=1))
    slf = threshold(dense, 0.0)
    assert slf.nnz == dense.pair_count()
    assert slf.compression_rate == 1.0


def test_threshold_drop_all():
    dense = analyze(random_field(), FrameConfig.isotropic(j_max=1))
    slf = threshold(dense, math.inf)
    assert slf.nnz == 0
    assert np.max(np.abs(synthesize(scatter_to_dense(slf)))) == 0.0


def test_threshold_monotone_sweep():
    dense = analyze(random_field(16, 16, 4, 4), FrameConfig.isotropic(j_max=2))
    counts = [threshold(dense, eps).nnz
              for eps in np.logspace(-4, 1, 10)]
    assert all(a >= b for a, b in zip(counts, counts[1:]))


def test_threshold_consistency_and_retain():
    dense = analyze(random_field(16, 16, 4, 4), FrameConfig.isotropic(j_max=2))
    slf = threshold(dense, 0.5)
    assert slf.compression_rate * slf.nnz == pytest.approx(slf.dense_count)
    again = threshold(dense, 2.0)
    re = slf.retain(2.0)
    assert re.nnz == again.nnz
    assert np.array_equal(np.sort(re.keys_s), np.sort(again.keys_s))


def test_discarded_energy_bounds_reconstruction_error():
    frame = FrameConfig.isotropic(j_max=2)
    for _ in range(5):
        lf = random_field(16, 16, 4, 4)
        dense = analyze(lf, frame)
        full = synthesize(dense)
        slf = threshold(dense, 1.0)
        sparse_rec = synthesize(scatter_to_dense(slf))
        total2 = sum(float(np.sum(a ** 2)) for a in dense.bands.values())
        kept2 = float(np.sum(slf.values.astype(np.float64) ** 2))
        discarded = math.sqrt(max(total2 - kept2, 0.0))
        err = math.sqrt(float(np.sum((full - sparse_rec) ** 2)))
        assert err <= discarded * (1 + 1e-6) + 1e-9


# ---------------------------------------------------------------------------
# Key packing / LFSW format
# ---------------------------------------------------------------------------

def test_pack_unpack_round_trip():
    frame = FrameConfig.isotropic(j_max=3)
    js = np.array([-1, 0, 2, 3, frame.highpass_level])
    for j in js:
        k1 = rng.integers(0, 2 ** 27, size=5)
        k2 = rng.integers(0, 2 ** 27, size=5)
        keys = pack_keys(int(j), 0, k1, k2, frame)
        j2, t2, k1b, k2b = unpack_keys(keys, frame)
        assert np.all(j2 == j) and np.all(t2 == 0)
        assert np.array_equal(k1b, k1) and np.array_equal(k2b, k2)


def test_save_load_round_trip(tmp_path):
    dense = analyze(random_field(16, 16, 4, 4), FrameConfig.isotropic(j_max=2))
    slf = threshold(dense, 0.3)
    path = tmp_path / "field.lfsw"
    save_sparse(slf, path)
    loaded = load_sparse(path)
    assert loaded.dims == slf.dims
    assert loaded.threshold_eps == slf.threshold_eps
    assert loaded.coeff_rms == slf.coeff_rms
    assert loaded.frame_x == slf.frame_x
    assert np.array_equal(loaded.keys_s, slf.keys_s)
    assert np.array_equal(loaded.values, slf.values)
    # byte-identical re-serialization
    save_sparse(loaded, tmp_path / "again.lfsw")
    assert (tmp_path / "again.lfsw").read_bytes() == path.read_bytes()


def test_save_load_errors(tmp_path):
    dense = analyze(random_field(), FrameConfig.isotropic(j_max=1))
    slf = threshold(dense, 1.0)
    path = tmp_path / "field.lfsw"
    save_sparse(slf, path)
    blob = bytearray(path.read_bytes())

    bad = tmp_path / "bad.lfsw"
    bad.write_bytes(b"XXXX" + bytes(blob[4:]))
    with pytest.raises(ValueError, match="not an LFSW file"):
        load_sparse(bad)
    bad.write_bytes(bytes(blob[:-40]))
    with pytest.raises(ValueError, match="checksum|truncated"):
        load_sparse(bad)
    flipped = bytearray(blob)
    flipped[60] ^= 0xFF
    bad.write_bytes(bytes(flipped))
    with pytest.raises(ValueError, match="checksum"):
        load_sparse(bad)


def test_file_size_arithmetic(tmp_path):
    dense = analyze(random_field(16, 16, 4, 4), FrameConfig.isotropic(j_max=2))
    slf = threshold(dense, 0.0)
    path = tmp_path / "field.lfsw"
    save_sparse(slf, path)
    size = path.stat().st_size
    # 8+8+12 = 28 bytes per entry plus a fixed-size header
    header = size - 28 * slf.nnz
    assert 0 < header < 1024
