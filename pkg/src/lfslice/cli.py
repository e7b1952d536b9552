"""Command-line tool: generate, compress, refocus, sweep, bench, compare, serve.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical-check failure.
Every command prints a machine-readable JSON document to stdout; progress and
human-oriented notes go to stderr.  CSV outputs use fixed, documented headers.
"""

from __future__ import annotations

import csv
import json
import sys
import time
from pathlib import Path

import click
import numpy as np

from .generate import PRESETS, generate
from .imageio import read_pfm, write_pfm, write_png
from .lightfield import analyze, ingest, load_sparse, save_sparse, threshold
from .oracle import compare as compare_images
from .polarwavelet import FrameConfig
from .reconstruct import (
    ReconstructionRequest,
    refocus,
    refocus_all_focus,
)
from .slicekernel import KernelCache

SWEEP_CSV_HEADER = ["alpha", "eps", "nnz", "cr", "l1", "l2", "linf", "ms"]
BENCH_CSV_HEADER = ["alpha", "y0", "y1", "x0", "x1", "rate", "nnz_used", "ms"]
COMPRESS_CSV_HEADER = ["eps", "nnz", "cr"]

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_CHECK = 3


class CheckFailure(Exception):
    """A --check numerical assertion failed (exit code 3)."""


def _emit(doc: dict) -> None:
    click.echo(json.dumps(doc, indent=2))


def _note(msg: str) -> None:
    click.echo(msg, err=True)


def _parse_floats(text: str) -> list[float]:
    """Comma list ("0.8,1.0") or range ("0.8:1.2:5") of floats."""
    if ":" in text:
        lo, hi, n = text.split(":")
        return [float(v) for v in np.linspace(float(lo), float(hi), int(n))]
    return [float(v) for v in text.split(",")]


def _parse_region(text: str | None):
    if text is None:
        return None
    parts = [int(v) for v in text.split(",")]
    if len(parts) != 4:
        raise click.UsageError("region must be y0,y1,x0,x1")
    return tuple(parts)


def _write_csv(path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


@click.group()
def cli():
    """Sparse light-field compression and refocusing toolkit."""


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------

@cli.command("gen")
@click.option("--preset", type=click.Choice(PRESETS), required=True)
@click.option("--ny", default=64, show_default=True)
@click.option("--nx", default=64, show_default=True)
@click.option("--nv", default=8, show_default=True)
@click.option("--nu", default=8, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True,
              help="Output directory for field.raw + manifest.json.")
def cmd_gen(preset, ny, nx, nv, nu, seed, out_dir):
    """Write a deterministic synthetic light field (raw floats + manifest)."""
    lf = generate(preset, ny=ny, nx=nx, nv=nv, nu=nu, seed=seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lf.samples.astype("<f4").tofile(out / "field.raw")
    manifest = {"type": "raw", "file": "field.raw", "layout": "y,x,v,u,c",
                "channels": 3, "ny": ny, "nx": nx, "nv": nv, "nu": nu,
                "meta": {"preset": preset, "seed": seed}}
    if lf.depth_map is not None:
        write_pfm(out / "depth.pfm", lf.depth_map)
        manifest["depth_map"] = "depth.pfm"
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    _emit({"manifest": str(out / "manifest.json"), "dims": [ny, nx, nv, nu],
           "preset": preset, "seed": seed,
           "depth_map": lf.depth_map is not None})


# ---------------------------------------------------------------------------
# compress
# ---------------------------------------------------------------------------

@cli.command("compress")
@click.argument("manifest", type=click.Path(exists=True))
@click.option("--eps", default=0.0, show_default=True,
              help="Relative hard threshold (fraction of coefficient RMS).")
@click.option("--j-max", default=2, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--sweep-eps", default=None,
              help="Comma list of eps values; writes an eps,nnz,cr CSV.")
@click.option("--csv", "csv_path", type=click.Path(), default=None)
def cmd_compress(manifest, eps, j_max, out_path, sweep_eps, csv_path):
    """Analyze a light field and store thresholded coefficients (.lfsw)."""
    t0 = time.perf_counter()
    lf = ingest(manifest)
    dense = analyze(lf, FrameConfig.isotropic(j_max=j_max))
    slf = threshold(dense, eps)
    save_sparse(slf, out_path)
    elapsed = (time.perf_counter() - t0) * 1000.0
    doc = {"out": str(out_path), "nnz": slf.nnz, "cr": slf.compression_rate,
           "eps": eps, "dims": list(slf.dims), "ms": elapsed}
    if sweep_eps is not None:
        rows = []
        for e in _parse_floats(sweep_eps):
            s = threshold(dense, e)
            rows.append([e, s.nnz, s.compression_rate])
        target = csv_path or (str(out_path) + ".sweep.csv")
        _write_csv(target, COMPRESS_CSV_HEADER, rows)
        doc["sweep_csv"] = str(target)
    _emit(doc)


# ---------------------------------------------------------------------------
# refocus
# ---------------------------------------------------------------------------

@cli.command("refocus")
@click.argument("lfsw", type=click.Path(exists=True))
@click.option("--alpha", default=1.0, show_default=True)
@click.option("--region", default=None, help="y0,y1,x0,x1 in output pixels.")
@click.option("--rate", default=1, show_default=True)
@click.option("--levels", default=None, type=int,
              help="Inclusive per-plane level cap.")
@click.option("--depth-map", type=click.Path(exists=True), default=None,
              help="PFM of per-pixel alpha; switches to all-focus mode.")
@click.option("--out", "out_path", type=click.Path(), required=True,
              help="Output PFM path.")
@click.option("--png", "png_path", type=click.Path(), default=None,
              help="Also write a tone-mapped PNG (Reinhard, key 0.18).")
def cmd_refocus(lfsw, alpha, region, rate, levels, depth_map, out_path, png_path):
    """Reconstruct a refocused (or depth-driven all-focus) image."""
    slf = load_sparse(lfsw)
    cache = KernelCache()
    if depth_map is not None:
        depth = read_pfm(depth_map)
        if depth.ndim == 3:
            depth = depth[..., 0]
        req = ReconstructionRequest(region=_parse_region(region), rate=rate,
                                    levels=levels, alpha_mode="depth",
                                    depth_map=depth, depth_to_alpha=(0.0, 1.0),
                                    alpha_clamp=(0.5, 1.5))
        img = refocus_all_focus(slf, req, cache=cache)
    else:
        req = ReconstructionRequest(alpha=alpha, region=_parse_region(region),
                                    rate=rate, levels=levels)
        img = refocus(slf, req, cache=cache)
    write_pfm(out_path, img.data)
    if png_path is not None:
        write_png(png_path, img.data)
    report = dict(img.provenance)
    report["out"] = str(out_path)
    Path(str(out_path) + ".json").write_text(json.dumps(report, indent=2))
    _emit(report)


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------

@cli.command("compare")
@click.argument("result", type=click.Path(exists=True))
@click.argument("reference", type=click.Path(exists=True))
@click.option("--margin", default=0, show_default=True)
@click.option("--diff", "diff_path", type=click.Path(), default=None,
              help="Write the x25-magnified difference image as PFM.")
@click.option("--max-rel-l2", default=None, type=float,
              help="Fail (exit 3) when relative L2 exceeds this bound.")
def cmd_compare(result, reference, margin, diff_path, max_rel_l2):
    """Compare two PFM rasters; optionally enforce an error bound."""
    a, b = read_pfm(result), read_pfm(reference)
    report = compare_images(a, b, margin=margin)
    if diff_path is not None:
        write_pfm(diff_path, np.abs(a - b) * 25.0)
    _emit(json.loads(report.to_json()))
    if max_rel_l2 is not None and report.rel_l2 > max_rel_l2:
        raise CheckFailure(
            f"relative L2 {report.rel_l2:.3e} exceeds bound {max_rel_l2:.3e}")


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

@cli.command("sweep")
@click.argument("lfsw", type=click.Path(exists=True))
@click.option("--alphas", default="1.0", show_default=True,
              help="Comma list or lo:hi:n range.")
@click.option("--eps", "eps_list", default="0", show_default=True,
              help="Comma list of re-threshold values (>= stored eps).")
@click.option("--csv", "csv_path", type=click.Path(), required=True)
def cmd_sweep(lfsw, alphas, eps_list, csv_path):
    """Error-vs-sparsity curves: reconstruct at each (alpha, eps) and compare
    against the eps = 0 (all stored entries) reconstruction."""
    slf = load_sparse(lfsw)
    cache = KernelCache()
    rows = []
    for alpha in _parse_floats(alphas):
        req = ReconstructionRequest(alpha=alpha)
        baseline = refocus(slf, req, cache=cache)
        for eps in _parse_floats(eps_list):
            sub = slf.retain(eps) if eps > slf.threshold_eps else slf
            t0 = time.perf_counter()
            img = refocus(sub, req, cache=cache)
            ms = (time.perf_counter() - t0) * 1000.0
            rep = compare_images(img.data, baseline.data)
            rows.append([alpha, eps, sub.nnz, sub.compression_rate,
                         rep.l1, rep.l2, rep.linf, ms])
            _note(f"alpha={alpha:.4g} eps={eps:.4g} nnz={sub.nnz} "
                  f"rel_l2={rep.rel_l2:.3e} ({ms:.0f} ms)")
    _write_csv(csv_path, SWEEP_CSV_HEADER, rows)
    _emit({"csv": str(csv_path), "rows": len(rows)})


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

@cli.command("bench")
@click.argument("lfsw", type=click.Path(exists=True))
@click.option("--alphas", default="1.0", show_default=True)
@click.option("--regions", default=None,
              help="Semicolon list of y0,y1,x0,x1 rectangles.")
@click.option("--rates", default="1", show_default=True)
@click.option("--csv", "csv_path", type=click.Path(), required=True)
@click.option("--check", is_flag=True,
              help="Assert linear scaling in region area and rate (exit 3).")
@click.option("--repeat", default=1, show_default=True)
def cmd_bench(lfsw, alphas, regions, rates, csv_path, check, repeat):
    """Wall-time measurements of reconstruction cost."""
    slf = load_sparse(lfsw)
    cache = KernelCache()
    ny, nx, _, _ = slf.dims
    region_list = ([_parse_region(r) for r in regions.split(";")]
                   if regions else [(0, ny, 0, nx)])
    rate_list = [int(v) for v in rates.split(",")]
    rows = []
    for alpha in _parse_floats(alphas):
        for region in region_list:
            for rate in rate_list:
                req = ReconstructionRequest(alpha=alpha, region=region,
                                            rate=rate)
                refocus(slf, req, cache=cache)  # warm the kernel tables
                best = float("inf")
                nnz_used = 0
                for _ in range(repeat):
                    t0 = time.perf_counter()
                    img = refocus(slf, req, cache=cache)
                    best = min(best, (time.perf_counter() - t0) * 1000.0)
                    nnz_used = img.provenance["nnz_used"]
                rows.append([alpha, *region, rate, nnz_used, best])
                _note(f"alpha={alpha:.4g} region={region} rate={rate} "
                      f"{best:.1f} ms")
    _write_csv(csv_path, BENCH_CSV_HEADER, rows)
    doc = {"csv": str(csv_path), "rows": len(rows)}
    if check:
        doc["checks"] = _bench_checks(rows)
    _emit(doc)
    if check and not all(c["ok"] for c in doc["checks"]):
        raise CheckFailure("bench scaling checks failed")


def _area(row) -> int:
    return (row[2] - row[1]) * (row[4] - row[3])


def _bench_checks(rows) -> list[dict]:
    """Region-doubling and rate-doubling time ratios must land in [1.6, 2.4]."""
    checks = []
    by_key: dict = {}
    for row in rows:
        by_key.setdefault((row[0], row[5]), []).append(row)  # (alpha, rate)
    for (alpha, rate), group in by_key.items():
        group = sorted(group, key=_area)
        for a, b in zip(group, group[1:]):
            if _area(b) == 2 * _area(a):
                ratio = b[7] / a[7]
                checks.append({"kind": "region-doubling", "alpha": alpha,
                               "rate": rate, "ratio": ratio,
                               "ok": 1.6 <= ratio <= 2.4})
    by_reg: dict = {}
    for row in rows:
        by_reg.setdefault((row[0], tuple(row[1:5])), []).append(row)
    for key, group in by_reg.items():
        group = sorted(group, key=lambda r: r[5])
        for a, b in zip(group, group[1:]):
            if b[5] == 2 * a[5]:
                ratio = b[7] / a[7]
                checks.append({"kind": "rate-doubling", "alpha": key[0],
                               "ratio": ratio, "ok": 1.6 <= ratio <= 2.4})
    return checks


# ---------------------------------------------------------------------------
# serve
# ---------------------------------------------------------------------------

@cli.command("serve")
@click.argument("lfsw", type=click.Path(exists=True))
@click.option("--depth-map", type=click.Path(exists=True), default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8417, show_default=True)
def cmd_serve(lfsw, depth_map, host, port):
    """Serve /metadata, /refocus and /allfocus over HTTP."""
    import uvicorn

    from .service import create_app
    app = create_app(lfsw_path=lfsw, depth_path=depth_map)
    _note(f"serving {lfsw} on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


# ---------------------------------------------------------------------------
# entry point with the documented exit-code mapping
# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        _note(f"usage error: {exc.format_message()}")
        return EXIT_USAGE
    except click.Abort:
        return EXIT_USAGE
    except click.ClickException as exc:
        _note(f"error: {exc.format_message()}")
        return EXIT_DATA
    except CheckFailure as exc:
        _note(f"check failed: {exc}")
        return EXIT_CHECK
    except (ValueError, OSError) as exc:
        _note(f"data error: {exc}")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
