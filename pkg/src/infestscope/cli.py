"""Command-line entry point.

Every subcommand reads its declared inputs, writes artifacts atomically into
``--out`` and records a ``manifest_<subcommand>.json`` with the parameters
and SHA-256 digests of inputs and outputs. Failures print one JSON line
``{"error": ..., "subcommand": ...}`` on stderr and exit with status 1.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import blocks as blk
from .artifacts import atomic_write, canonical_json, read_json, write_json, write_manifest
from .detections import (
    AnnotationError,
    TreeClass,
    csv_has_scores,
    load_csv,
    load_voc_dir,
    save_csv,
    to_points,
)
from .fem import build_tofi, ngbdi, vdvi
from .metrics import evaluate as evaluate_metrics
from .raster import Raster, load_image, save_image, tile as tile_raster
from .situation.clustering import DEFAULT_MIN_PTS, default_eps, protection_areas
from .situation.density import DEFAULT_GRID, DensityField, PlotExtent, find_peaks, kde
from .situation.risk import DEFAULT_RADIUS, risk_scores, thread_count
from .situation.sizeclass import size_class_stats
from .synth import SceneSpec, generate, render

EVALUATION_FILE = "evaluation.json"
DENSITY_FILE = "density.json"
RISK_FILE = "risk.csv"
PROTECT_FILE = "protection_areas.json"
SIZECLASS_FILE = "sizeclass.json"
TRUTH_FILE = "truth.json"
REPORT_FILE = "report.json"

REPORT_SECTIONS = {
    "metrics": EVALUATION_FILE,
    "density": DENSITY_FILE,
    "risk": RISK_FILE,
    "protection_areas": PROTECT_FILE,
    "size_classes": SIZECLASS_FILE,
    "truth": TRUTH_FILE,
}


class CommandError(Exception):
    pass


def _fail(subcommand: str, message: str):
    click.echo(json.dumps({"error": message, "subcommand": subcommand}, sort_keys=True), err=True)
    sys.exit(1)


def reports_errors(name: str):
    """Turn library errors into the single-line JSON error contract."""

    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except (CommandError, ValueError, OSError, KeyError) as exc:
                msg = str(exc) if not isinstance(exc, KeyError) else f"missing key {exc}"
                _fail(name, " ".join(msg.split()))

        return wrapper

    return deco


def _out_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _pixel_extent(trees) -> PlotExtent:
    # whole-pixel bounds survive the 9-digit JSON round-trip, so boundary trees stay inside
    e = PlotExtent.around(trees)
    return PlotExtent(math.floor(e.x_min), math.floor(e.y_min), math.ceil(e.x_max), math.ceil(e.y_max))


def _parse_extent(text: str | None):
    if text is None:
        return None
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise CommandError(f"--extent must be four comma-separated numbers, got {text!r}") from None
    if len(vals) != 4:
        raise CommandError(f"--extent must be four comma-separated numbers, got {text!r}")
    return PlotExtent(*vals)


def _load_trees(path, score_thr: float = 0.0):
    """Tree points from an annotation or detection CSV (schema auto-detected)."""
    if csv_has_scores(path):
        records = [d for d in load_csv(path, with_scores=True) if d.score >= score_thr]
    else:
        records = load_csv(path, with_scores=False)
    return to_points(records)


def _render_gray(values: np.ndarray) -> tuple[Raster, dict]:
    lo, hi = float(values.min()), float(values.max())
    scaled = np.zeros_like(values) if hi <= lo else (values - lo) / (hi - lo)
    return Raster(scaled), {"min": lo, "max": hi, "mapping": "min-max to 8-bit"}


# --------------------------------------------------------------------------


@click.group()
@click.version_option(package_name="infestscope")
def cli():
    """Forest-infestation analytics: tiling, feature enhancement, detection
    metrics and pest-situation analysis."""


@cli.command()
@click.argument("input_path", metavar="INPUT", type=click.Path(dir_okay=False))
@click.option("--tile-size", default=1024, show_default=True, type=int)
@click.option("--overlap", default=0, show_default=True, type=int, help="Pixels shared by neighbouring tiles.")
@click.option("--out", "out", required=True, type=click.Path(file_okay=False))
@reports_errors("tile")
def tile(input_path, tile_size, overlap, out):
    """Cut INPUT into square tiles (zero-padded at the right/bottom edge)."""
    out = _out_dir(out)
    src = load_image(input_path)
    grid = tile_raster(src, tile_size, overlap)
    ext = ".ppm" if src.channels == 3 else ".pgm"
    names = [f"tile_r{row:03d}_c{col:03d}{ext}" for row, col, _ in grid.tiles]
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        list(pool.map(lambda item: save_image(item[1][2], out / item[0]), zip(names, grid.tiles)))
    meta = {
        "source": Path(input_path).name,
        "source_width": src.width,
        "source_height": src.height,
        "channels": src.channels,
        "tile_size": tile_size,
        "overlap": overlap,
        "cols": grid.cols,
        "rows": grid.rows,
        "pad_right": grid.pad_right,
        "pad_bottom": grid.pad_bottom,
        "tiles": [{"row": r, "col": c, "file": n} for (r, c, _), n in zip(grid.tiles, names)],
    }
    write_json(out / "tiles.json", meta)
    write_manifest(out, "tile", {"tile_size": tile_size, "overlap": overlap}, [input_path],
                   [out / "tiles.json"] + [out / n for n in names])
    click.echo(f"{grid.rows}x{grid.cols} tiles written to {out}")


@cli.command()
@click.argument("input_path", metavar="INPUT", type=click.Path(dir_okay=False))
@click.option("--out", "out", required=True, type=click.Path(file_okay=False))
@click.option("--clip-percentile", default=99.0, show_default=True, type=float)
@reports_errors("fem")
def fem(input_path, out, clip_percentile):
    """Compute VDVI, Laplacian texture and NGBDI channels of an RGB image."""
    out = _out_dir(out)
    rgb = load_image(input_path)
    tofi = build_tofi(rgb, clip_percentile)
    files = {
        "vdvi.pgm": Raster((vdvi(rgb) + 1.0) / 2.0),
        "texture.pgm": Raster(tofi.texture),
        "ngbdi.pgm": Raster((ngbdi(rgb) + 1.0) / 2.0),
        "tofi.ppm": tofi.base,
    }
    for name, r in files.items():
        save_image(r, out / name)
    sidecar = {"source": Path(input_path).name, "width": rgb.width, "height": rgb.height,
               "channels": ["vdvi", "texture", "ngbdi"], "norm_meta": tofi.norm_meta}
    write_json(out / "tofi.json", sidecar)
    write_manifest(out, "fem", {"clip_percentile": clip_percentile}, [input_path],
                   [out / n for n in files] + [out / "tofi.json"])
    click.echo(f"TOFI written to {out}")


# --------------------------------------------------------------------------


@cli.group()
def blocks():
    """Forward-only fusion and channel-attention blocks."""


def _as_features(r: Raster, max_side: int) -> np.ndarray:
    step = max(1, math.ceil(max(r.width, r.height) / max_side))
    return np.ascontiguousarray(r.data[::step, ::step].transpose(2, 0, 1))


def _params_from_flat(flat, c_rgb, c_fem, c_out):
    k = blk.eca_kernel_size(c_out)
    need = c_out * c_rgb + c_out * c_fem + 2 + k
    flat = np.asarray(flat, dtype=np.float64).ravel()
    if flat.size != need:
        raise CommandError(
            f"parameter file holds {flat.size} numbers; {need} expected "
            f"(proj_rgb {c_out}x{c_rgb}, proj_fem {c_out}x{c_fem}, 2 logits, {k} ECA weights)"
        )
    a = c_out * c_rgb
    b = a + c_out * c_fem
    p = blk.AmfmParams(flat[:a].reshape(c_out, c_rgb), flat[a:b].reshape(c_out, c_fem), tuple(flat[b : b + 2]))
    return p, flat[b + 2 :]


def run_block_checks(rgb_feat, fem_feat, params: blk.AmfmParams, eca_w, rng) -> list[dict]:
    checks = []

    def record(name, ok, detail=None):
        checks.append({"check": name, "pass": bool(ok), "detail": detail})

    w = params.weights
    record("amfm_weights_sum_to_one", abs(w.sum() - 1.0) <= 1e-12, float(w.sum()))
    record("amfm_weights_positive", bool(np.all(w > 0)), w.tolist())
    fused = blk.amfm_fuse(rgb_feat, fem_feat, params)
    zero = np.zeros_like(rgb_feat)
    base = blk.amfm_fuse(zero, fem_feat, params)
    lin = blk.amfm_fuse(2.0 * rgb_feat, fem_feat, params) - base
    err = float(np.max(np.abs(lin - 2.0 * (fused - base)))) if fused.size else 0.0
    record("amfm_linear_in_rgb_branch", err <= 1e-9 * max(1.0, float(np.max(np.abs(fused)))), err)

    gains = blk.eca_gains(fused, eca_w)
    record("eca_gains_in_open_unit_interval", bool(np.all((gains > 0) & (gains < 1))), [float(gains.min()), float(gains.max())])
    out = blk.eca_forward(fused, eca_w)
    record("eca_output_bounded_by_input", bool(np.all(np.abs(out) <= np.abs(fused))))
    halved = blk.eca_forward(fused, np.zeros_like(eca_w))
    record("eca_zero_weights_halve", bool(np.array_equal(halved, fused * 0.5)))
    c, h, wd = fused.shape
    perm = rng.permutation(h * wd)
    permuted_in = fused.reshape(c, -1)[:, perm].reshape(c, h, wd)
    permuted_out = out.reshape(c, -1)[:, perm].reshape(c, h, wd)
    record("eca_commutes_with_pixel_permutation", bool(np.array_equal(blk.eca_forward(permuted_in, eca_w), permuted_out)))
    return checks


@blocks.command("demo")
@click.option("--rgb", "rgb_path", required=True, type=click.Path(dir_okay=False))
@click.option("--tofi", "tofi_path", type=click.Path(dir_okay=False), help="Precomputed TOFI image; computed from --rgb when omitted.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out-channels", default=8, show_default=True, type=int)
@click.option("--params", "params_path", type=click.Path(dir_okay=False), help="Flat JSON array: proj_rgb, proj_fem, logits, ECA weights.")
@click.option("--max-side", default=128, show_default=True, type=int, help="Subsample inputs to at most this many pixels per side.")
@click.option("--out", "out", type=click.Path(file_okay=False))
@reports_errors("blocks")
def blocks_demo(rgb_path, tofi_path, seed, out_channels, params_path, max_side, out):
    """Run AMFM fusion and ECA on an RGB/TOFI pair and check their invariants."""
    rgb = load_image(rgb_path)
    tofi = load_image(tofi_path) if tofi_path else build_tofi(rgb).base
    if (tofi.width, tofi.height) != (rgb.width, rgb.height):
        raise CommandError("RGB and TOFI images differ in size")
    x_rgb = _as_features(rgb, max_side)
    x_fem = _as_features(tofi, max_side)
    rng = np.random.Generator(np.random.Philox(seed))
    if params_path:
        params, eca_w = _params_from_flat(read_json(params_path), x_rgb.shape[0], x_fem.shape[0], out_channels)
    else:
        params = blk.AmfmParams.random(x_rgb.shape[0], x_fem.shape[0], out_channels, rng)
        eca_w = rng.normal(0.0, 1.0, size=blk.eca_kernel_size(out_channels))
    checks = run_block_checks(x_rgb, x_fem, params, eca_w, rng)
    for c in checks:
        click.echo(json.dumps(c, sort_keys=True))
    if out:
        out = _out_dir(out)
        write_json(out / "blocks_demo.json", {"checks": checks, "out_channels": out_channels,
                                              "eca_kernel_size": len(eca_w), "amfm_weights": params.weights.tolist()})
        write_manifest(out, "blocks", {"seed": seed, "out_channels": out_channels, "max_side": max_side},
                       [p for p in (rgb_path, tofi_path, params_path) if p], [out / "blocks_demo.json"])
    if not all(c["pass"] for c in checks):
        raise CommandError("one or more block invariants failed")


# --------------------------------------------------------------------------


@cli.command()
@click.option("--dets", "dets_path", required=True, type=click.Path(dir_okay=False))
@click.option("--gts", "gts_path", type=click.Path(dir_okay=False))
@click.option("--voc", "voc_dir", type=click.Path(file_okay=False), help="Directory of Pascal-VOC XML ground truth.")
@click.option("--score-thr", default=0.0, show_default=True, type=float, help="Minimum score counted in precision/recall.")
@click.option("--per-class", is_flag=True, help="Include the full AP table per class and IoU threshold.")
@click.option("--out", "out", type=click.Path(file_okay=False))
@reports_errors("evaluate")
def evaluate(dets_path, gts_path, voc_dir, score_thr, per_class, out):
    """Precision, recall and mAP of detections against ground truth."""
    if bool(gts_path) == bool(voc_dir):
        raise CommandError("pass exactly one of --gts or --voc")
    dets = load_csv(dets_path, with_scores=True)
    gts = load_csv(gts_path, with_scores=False) if gts_path else load_voc_dir(voc_dir)
    report = evaluate_metrics(dets, gts, score_thr=score_thr).to_dict(per_class=per_class)
    if out:
        out = _out_dir(out)
        write_json(out / EVALUATION_FILE, report)
        inputs = [dets_path] + ([gts_path] if gts_path else sorted(Path(voc_dir).glob("*.xml")))
        write_manifest(out, "evaluate", {"score_thr": score_thr, "per_class": per_class}, inputs, [out / EVALUATION_FILE])
    click.echo(canonical_json(report).decode("utf-8"), nl=False)


@cli.command()
@click.option("--input", "input_path", required=True, type=click.Path(dir_okay=False), help="Annotation or detection CSV.")
@click.option("--extent", "extent_text", help="x_min,y_min,x_max,y_max in pixels; default: bounds of all trees.")
@click.option("--grid-w", default=DEFAULT_GRID[0], show_default=True, type=int)
@click.option("--grid-h", default=DEFAULT_GRID[1], show_default=True, type=int)
@click.option("--scott-bandwidth", is_flag=True, help="Scale the bandwidth by the per-axis standard deviation.")
@click.option("--peaks", default=5, show_default=True, type=int, help="Number of local maxima to report.")
@click.option("--score-thr", default=0.0, show_default=True, type=float)
@click.option("--out", "out", required=True, type=click.Path(file_okay=False))
@reports_errors("density")
def density(input_path, extent_text, grid_w, grid_h, scott_bandwidth, peaks, score_thr, out):
    """Kernel density field of infected trees."""
    trees = _load_trees(input_path, score_thr)
    infected = [t for t in trees if t.cls == TreeClass.INFECTED]
    if not infected:
        raise CommandError("empty infected set")
    extent = _parse_extent(extent_text) or _pixel_extent(trees)
    field = kde(infected, extent, (grid_w, grid_h), scott=scott_bandwidth)
    out = _out_dir(out)
    doc = field.to_dict()
    doc["peaks"] = find_peaks(field, peaks)
    img, scale = _render_gray(field.values)
    doc["render"] = scale
    write_json(out / DENSITY_FILE, doc)
    save_image(img, out / "density.pgm")
    params = {"extent": extent.as_list(), "grid_w": grid_w, "grid_h": grid_h,
              "scott_bandwidth": scott_bandwidth, "peaks": peaks, "score_thr": score_thr}
    write_manifest(out, "density", params, [input_path], [out / DENSITY_FILE, out / "density.pgm"])
    click.echo(f"density field {grid_w}x{grid_h} over {len(infected)} infected trees, h={field.bandwidth:.6g}")


@cli.command()
@click.option("--input", "input_path", required=True, type=click.Path(dir_okay=False))
@click.option("--density", "density_path", required=True, type=click.Path(dir_okay=False))
@click.option("--radius", default=DEFAULT_RADIUS, show_default=True, type=float,
              help="Neighbourhood radius in normalized extent units; set it from pest dispersal data.")
@click.option("--score-thr", default=0.0, show_default=True, type=float)
@click.option("--out", "out", required=True, type=click.Path(file_okay=False))
@reports_errors("risk")
def risk(input_path, density_path, radius, score_thr, out):
    """Risk index of every healthy tree from a density field."""
    field = DensityField.from_dict(read_json(density_path))
    healthy = [t for t in _load_trees(input_path, score_thr) if t.cls == TreeClass.HEALTHY]
    table = risk_scores(healthy, field, radius)
    out = _out_dir(out)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x", "y", "risk"])
    for tree, r in table.entries:
        writer.writerow([repr(float(tree.x)), repr(float(tree.y)), f"{r:.9g}"])
    atomic_write(out / RISK_FILE, buf.getvalue().encode("utf-8"))
    write_manifest(out, "risk", {"radius": radius, "score_thr": score_thr}, [input_path, density_path], [out / RISK_FILE])
    click.echo(f"{len(table.entries)} healthy trees scored")


def _draw_overlay(trees, areas, extent: PlotExtent, max_side: int = 1024) -> Raster:
    scale = max_side / max(extent.width, extent.height)
    w = max(1, int(math.ceil(extent.width * scale)))
    h = max(1, int(math.ceil(extent.height * scale)))
    img = np.ones((h, w, 3))

    def put(x, y, color):
        i = int((y - extent.y_min) * scale)
        j = int((x - extent.x_min) * scale)
        if 0 <= i < h and 0 <= j < w:
            img[i, j] = color

    for t in trees:
        put(t.x, t.y, (0.1, 0.5, 0.1) if t.cls == TreeClass.HEALTHY else (0.8, 0.1, 0.1))
    for a in areas:
        e = a.ellipse
        steps = max(64, int(2 * math.pi * e.semi_major * scale))
        t = np.linspace(0, 2 * math.pi, steps, endpoint=False)
        ca, sa = math.cos(e.angle), math.sin(e.angle)
        xs = e.center[0] + e.semi_major * np.cos(t) * ca - e.semi_minor * np.sin(t) * sa
        ys = e.center[1] + e.semi_major * np.cos(t) * sa + e.semi_minor * np.sin(t) * ca
        for x, y in zip(xs, ys):
            put(x, y, (0.1, 0.2, 0.8))
    return Raster(img)


@cli.command()
@click.option("--input", "input_path", required=True, type=click.Path(dir_okay=False))
@click.option("--eps", type=float, help="Neighbourhood radius in pixels; default: median k-th neighbour distance.")
@click.option("--min-pts", default=DEFAULT_MIN_PTS, show_default=True, type=int)
@click.option("--score-thr", default=0.0, show_default=True, type=float)
@click.option("--out", "out", required=True, type=click.Path(file_okay=False))
@reports_errors("protect")
def protect(input_path, eps, min_pts, score_thr, out):
    """Protection areas: DBSCAN clusters of healthy trees with fitted ellipses."""
    trees = _load_trees(input_path, score_thr)
    healthy = [t for t in trees if t.cls == TreeClass.HEALTHY]
    if eps is None and len(healthy) >= 2:
        eps = default_eps(healthy, min_pts)
    areas = protection_areas(healthy, eps, min_pts) if healthy else []
    out = _out_dir(out)
    doc = {"eps": eps, "min_pts": min_pts, "n_healthy": len(healthy), "areas": [a.to_dict() for a in areas]}
    write_json(out / PROTECT_FILE, doc)
    artifacts = [out / PROTECT_FILE]
    if len(trees) >= 2:
        try:
            extent = PlotExtent.around(trees)
        except ValueError:
            extent = None
        if extent is not None:
            save_image(_draw_overlay(trees, areas, extent), out / "protection_areas.ppm")
            artifacts.append(out / "protection_areas.ppm")
    write_manifest(out, "protect", {"eps": eps, "min_pts": min_pts, "score_thr": score_thr}, [input_path], artifacts)
    click.echo(f"{len(areas)} protection area(s)")


@cli.command()
@click.option("--input", "input_path", required=True, type=click.Path(dir_okay=False))
@click.option("--tertiles", is_flag=True, help="Equal-count classes instead of equal-width intervals.")
@click.option("--score-thr", default=0.0, show_default=True, type=float)
@click.option("--out", "out", required=True, type=click.Path(file_okay=False))
@reports_errors("sizeclass")
def sizeclass(input_path, tertiles, score_thr, out):
    """Crown-size class statistics with infection share per class."""
    trees = _load_trees(input_path, score_thr)
    stats = size_class_stats(trees, tertiles=tertiles)
    out = _out_dir(out)
    write_json(out / SIZECLASS_FILE, stats.to_dict())
    write_manifest(out, "sizeclass", {"tertiles": tertiles, "score_thr": score_thr}, [input_path], [out / SIZECLASS_FILE])
    click.echo(canonical_json(stats.to_dict()).decode("utf-8"), nl=False)


@cli.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out", "out", required=True, type=click.Path(file_okay=False))
@click.option("--render", "do_render", is_flag=True, help="Also paint the scene as an RGB image.")
@click.option("--ppm", default=1.0, show_default=True, type=float, help="Render resolution, pixels per scene unit.")
@reports_errors("synth")
def synth(spec_path, out, do_render, ppm):
    """Generate a synthetic scene: annotations, detections and ground truth."""
    spec = SceneSpec.from_dict(read_json(spec_path))
    truth = generate(spec)
    out = _out_dir(out)
    save_csv(truth.annotations, out / "annotations.csv", with_scores=False)
    save_csv(truth.detections, out / "detections.csv", with_scores=True)
    write_json(out / TRUTH_FILE, truth.to_dict())
    artifacts = [out / "annotations.csv", out / "detections.csv", out / TRUTH_FILE]
    if do_render:
        save_image(render(truth, ppm), out / "scene.ppm")
        artifacts.append(out / "scene.ppm")
    write_manifest(out, "synth", {"render": do_render, "ppm": ppm}, [spec_path], artifacts)
    click.echo(f"{len(truth.annotations)} trees, {len(truth.detections)} detections written to {out}")


# --------------------------------------------------------------------------


def _risk_summary(path: Path) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "risk" not in reader.fieldnames:
            raise CommandError(f"{path.name}: not a risk table (missing 'risk' column)")
        try:
            risks = np.array([float(row["risk"]) for row in reader])
        except (TypeError, ValueError):
            raise CommandError(f"{path.name}: non-numeric risk value") from None
    if risks.size == 0:
        return {"count": 0}
    return {
        "count": int(risks.size),
        "min": float(risks.min()),
        "max": float(risks.max()),
        "mean": float(risks.mean()),
        "median": float(np.median(risks)),
        "p90": float(np.quantile(risks, 0.9)),
    }


def build_report(artifact_dir, required=("metrics",)) -> dict:
    """Bundle per-subcommand outputs found in ``artifact_dir`` into one document.

    Sections whose file is absent are omitted; a missing section listed in
    ``required`` is an error, as is any unreadable artifact.
    """
    d = Path(artifact_dir)
    if not d.is_dir():
        raise CommandError(f"{d} is not a directory")
    unknown = set(required) - set(REPORT_SECTIONS)
    if unknown:
        raise CommandError(f"unknown report section(s): {', '.join(sorted(unknown))}")
    report = {}
    for section, fname in REPORT_SECTIONS.items():
        path = d / fname
        if not path.exists():
            if section in required:
                raise CommandError(f"missing mandatory section {section!r} ({fname})")
            continue
        if section == "risk":
            report[section] = _risk_summary(path)
            continue
        doc = read_json(path)
        if section == "density":
            doc = {k: v for k, v in doc.items() if k != "values"}
        elif section == "protection_areas":
            doc = dict(doc)
            doc["areas"] = [{k: v for k, v in a.items() if k != "members"} for a in doc.get("areas", [])]
        elif section == "truth":
            doc = {k: v for k, v in doc.items() if k != "spec"}
        report[section] = doc
    return report


@cli.command()
@click.argument("artifact_dir", type=click.Path(file_okay=False))
@click.option("--require", "require", default="metrics", show_default=True,
              help="Comma-separated sections that must be present.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), help=f"Default: ARTIFACT_DIR/{REPORT_FILE}.")
@reports_errors("report")
def report(artifact_dir, require, out_path):
    """Consolidate metrics, density, risk, protection areas and size classes."""
    required = tuple(s.strip() for s in require.split(",") if s.strip())
    doc = build_report(artifact_dir, required)
    out_path = Path(out_path) if out_path else Path(artifact_dir) / REPORT_FILE
    write_json(out_path, doc)
    inputs = [Path(artifact_dir) / f for f in REPORT_SECTIONS.values() if (Path(artifact_dir) / f).exists()]
    write_manifest(out_path.parent, "report", {"require": list(required)}, inputs, [out_path])
    click.echo(f"report with section(s) {', '.join(sorted(doc))} written to {out_path}")


def main(argv=None):
    cli.main(args=argv, prog_name="infestscope")


if __name__ == "__main__":
    main()
