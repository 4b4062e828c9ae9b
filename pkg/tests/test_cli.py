import json

import numpy as np
import pytest
from click.testing import CliRunner

from infestscope.artifacts import canonical_json, read_json, sha256_file
from infestscope.cli import cli
from infestscope.detections import Annotation, Box, TreeClass, save_csv
from infestscope.raster import Raster, load_image, save_image

SPEC = {
    "seed": 5,
    "extent": [0, 0, 1200, 1000],
    "clusters": [{"centroid": [300, 300], "std": 20, "count": 40}, {"centroid": [900, 300], "std": 20, "count": 40}],
    "healthy": {"count": 20, "blobs": [{"centroid": [600, 750], "std": 25, "count": 40}]},
    "crown_area_range": [100, 300],
}


@pytest.fixture
def runner():
    return CliRunner()


def run(runner, *args, ok=True):
    res = runner.invoke(cli, [str(a) for a in args])
    if ok:
        assert res.exit_code == 0, res.output
    return res


def error_of(res):
    assert res.exit_code != 0
    lines = [ln for ln in res.stderr.splitlines() if ln.strip()]
    assert len(lines) == 1
    return json.loads(lines[0])


@pytest.fixture
def scene(runner, tmp_path):
    (tmp_path / "spec.json").write_text(json.dumps(SPEC))
    out = tmp_path / "scene"
    run(runner, "synth", "--spec", tmp_path / "spec.json", "--out", out, "--render", "--ppm", "0.25")
    return out


def test_canonical_json_format():
    doc = {"b": 1.0 / 3.0, "a": [np.float64(2.5), -0.0, np.int64(3)], "c": True}
    assert canonical_json(doc) == b'{\n  "a": [\n    2.5,\n    0.0,\n    3\n  ],\n  "b": 0.333333333,\n  "c": true\n}\n'
    with pytest.raises(ValueError):
        canonical_json({"x": float("nan")})


def test_read_json_names_corrupt_file(tmp_path):
    (tmp_path / "bad.json").write_text("{nope")
    with pytest.raises(ValueError, match="bad.json"):
        read_json(tmp_path / "bad.json")


def test_synth_outputs_and_manifest(scene):
    for name in ("annotations.csv", "detections.csv", "truth.json", "scene.ppm", "manifest_synth.json"):
        assert (scene / name).exists()
    m = read_json(scene / "manifest_synth.json")
    assert m["subcommand"] == "synth"
    assert m["artifacts"]["truth.json"] == sha256_file(scene / "truth.json")
    assert set(m["inputs"]) == {"spec.json"}
    assert load_image(scene / "scene.ppm").width == 300


def test_evaluate_self_is_perfect(runner, scene, tmp_path):
    res = run(runner, "evaluate", "--dets", scene / "detections.csv", "--gts", scene / "annotations.csv", "--per-class", "--out", tmp_path / "ev")
    report = json.loads(res.stdout)
    assert report["map50"] == 1.0 and report["map5095"] == 1.0
    assert "ap_table" in report
    assert read_json(tmp_path / "ev" / "evaluation.json") == report


def test_evaluate_with_voc(runner, tmp_path):
    voc = tmp_path / "voc"
    voc.mkdir()
    (voc / "im1.xml").write_text(
        "<annotation><filename>im1.jpg</filename><object><name>dead</name>"
        "<bndbox><xmin>0</xmin><ymin>0</ymin><xmax>10</xmax><ymax>10</ymax></bndbox></object></annotation>"
    )
    (tmp_path / "d.csv").write_text("image_id,class,score,x_min,y_min,x_max,y_max\nim1,infected,0.9,0,0,10,10\n")
    report = json.loads(run(runner, "evaluate", "--dets", tmp_path / "d.csv", "--voc", voc).stdout)
    assert report["map50"] == 1.0
    err = error_of(run(runner, "evaluate", "--dets", tmp_path / "d.csv", ok=False))
    assert err["subcommand"] == "evaluate"


def test_density_without_infected_trees(runner, tmp_path):
    save_csv([Annotation("a", Box(0, 0, 10, 10), TreeClass.HEALTHY), Annotation("a", Box(50, 50, 60, 60), TreeClass.HEALTHY)], tmp_path / "h.csv")
    err = error_of(run(runner, "density", "--input", tmp_path / "h.csv", "--out", tmp_path / "o", ok=False))
    assert err == {"error": "empty infected set", "subcommand": "density"}


def test_bad_input_gives_json_error(runner, tmp_path):
    (tmp_path / "x.csv").write_text("image_id,class,x_min,y_min,x_max,y_max\na,tree,0,0,1,1\n")
    err = error_of(run(runner, "sizeclass", "--input", tmp_path / "x.csv", "--out", tmp_path / "o", ok=False))
    assert "line 2" in err["error"] and err["subcommand"] == "sizeclass"
    err = error_of(run(runner, "tile", tmp_path / "missing.ppm", "--out", tmp_path / "o", ok=False))
    assert err["subcommand"] == "tile"


def _full_run(runner, scene, out):
    trees = scene / "annotations.csv"
    run(runner, "evaluate", "--dets", scene / "detections.csv", "--gts", trees, "--out", out)
    run(runner, "density", "--input", trees, "--extent", "0,0,1200,1000", "--scott-bandwidth", "--out", out)
    run(runner, "risk", "--input", trees, "--density", out / "density.json", "--radius", "0.08", "--out", out)
    run(runner, "protect", "--input", trees, "--out", out)
    run(runner, "sizeclass", "--input", trees, "--tertiles", "--out", out)


def test_situation_commands_and_report(runner, scene, tmp_path):
    out = tmp_path / "art"
    _full_run(runner, scene, out)
    density = read_json(out / "density.json")
    assert density["grid_w"] == density["grid_h"] == 256
    assert len(density["values"]) == 256 and density["render"]["mapping"]
    assert (out / "density.pgm").exists() and (out / "protection_areas.ppm").exists()
    header = (out / "risk.csv").read_text().splitlines()[0]
    assert header == "x,y,risk"
    assert len(read_json(out / "protection_areas.json")["areas"]) == 1
    assert read_json(out / "sizeclass.json")["method"] == "tertiles"
    for sub in ("evaluate", "density", "risk", "protect", "sizeclass"):
        assert (out / f"manifest_{sub}.json").exists()

    run(runner, "report", out, "--require", "metrics,density,risk,protection_areas,size_classes")
    report = read_json(out / "report.json")
    assert set(report) == {"metrics", "density", "risk", "protection_areas", "size_classes"}
    assert "values" not in report["density"]
    assert report["risk"]["count"] == 60
    assert "members" not in report["protection_areas"]["areas"][0]


def test_report_is_byte_identical_across_runs(runner, scene, tmp_path):
    for name in ("a", "b"):
        _full_run(runner, scene, tmp_path / name)
        run(runner, "report", tmp_path / name)
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()
    assert (tmp_path / "a" / "manifest_density.json").read_bytes() == (tmp_path / "b" / "manifest_density.json").read_bytes()


def test_report_optional_and_mandatory_sections(runner, scene, tmp_path):
    out = tmp_path / "only"
    run(runner, "evaluate", "--dets", scene / "detections.csv", "--gts", scene / "annotations.csv", "--out", out)
    run(runner, "report", out)
    assert set(read_json(out / "report.json")) == {"metrics"}

    err = error_of(run(runner, "report", out, "--require", "metrics,risk", ok=False))
    assert "risk" in err["error"] and err["subcommand"] == "report"

    empty = tmp_path / "empty"
    empty.mkdir()
    assert "metrics" in error_of(run(runner, "report", empty, ok=False))["error"]

    (out / "density.json").write_text("{broken")
    assert "density.json" in error_of(run(runner, "report", out, ok=False))["error"]


def test_tile_and_fem(runner, tmp_path):
    rng = np.random.default_rng(0)
    save_image(Raster(rng.integers(0, 256, size=(70, 90, 3)) / 255), tmp_path / "img.ppm")
    run(runner, "tile", tmp_path / "img.ppm", "--tile-size", "32", "--out", tmp_path / "tiles")
    meta = read_json(tmp_path / "tiles" / "tiles.json")
    assert (meta["cols"], meta["rows"], meta["pad_right"], meta["pad_bottom"]) == (3, 3, 6, 26)
    assert len(meta["tiles"]) == 9 and (tmp_path / "tiles" / meta["tiles"][0]["file"]).exists()

    run(runner, "fem", tmp_path / "img.ppm", "--out", tmp_path / "fem")
    tofi = load_image(tmp_path / "fem" / "tofi.ppm")
    assert (tofi.width, tofi.height, tofi.channels) == (90, 70, 3)
    assert read_json(tmp_path / "fem" / "tofi.json")["channels"] == ["vdvi", "texture", "ngbdi"]


def test_blocks_demo(runner, tmp_path):
    save_image(Raster(np.random.default_rng(1).random((40, 30, 3))), tmp_path / "img.ppm")
    res = run(runner, "blocks", "demo", "--rgb", tmp_path / "img.ppm", "--out", tmp_path / "b")
    checks = [json.loads(ln) for ln in res.stdout.splitlines()]
    assert checks and all(c["pass"] for c in checks)

    # out_channels 2 -> kernel 1: 2*3 + 2*3 + 2 logits + 1 = 15 numbers
    params = list(np.linspace(-1, 1, 15))
    (tmp_path / "p.json").write_text(json.dumps(params))
    run(runner, "blocks", "demo", "--rgb", tmp_path / "img.ppm", "--params", tmp_path / "p.json", "--out-channels", "2")
    (tmp_path / "p.json").write_text(json.dumps(params[:-1]))
    err = error_of(run(runner, "blocks", "demo", "--rgb", tmp_path / "img.ppm", "--params", tmp_path / "p.json", "--out-channels", "2", ok=False))
    assert "15 expected" in err["error"]


def test_threads_env_does_not_change_results(runner, scene, tmp_path, monkeypatch):
    trees = scene / "annotations.csv"
    run(runner, "density", "--input", trees, "--extent", "0,0,1200,1000", "--out", tmp_path / "d")
    outputs = []
    for n in ("1", "4"):
        monkeypatch.setenv("INFESTSCOPE_THREADS", n)
        run(runner, "risk", "--input", trees, "--density", tmp_path / "d" / "density.json", "--out", tmp_path / n)
        outputs.append((tmp_path / n / "risk.csv").read_bytes())
    assert outputs[0] == outputs[1]


def test_default_extent_keeps_boundary_trees_inside(runner, tmp_path):
    # a healthy tree sets the lower y bound at a coordinate that 9 digits cannot hold
    save_csv([
        Annotation("a", Box(100.0, 13.0, 110.0, 13.859744191293824), TreeClass.HEALTHY),
        Annotation("a", Box(500, 500, 520, 520), TreeClass.INFECTED),
        Annotation("a", Box(700, 600, 720, 630), TreeClass.INFECTED),
    ], tmp_path / "t.csv")
    run(runner, "density", "--input", tmp_path / "t.csv", "--out", tmp_path / "o")
    assert read_json(tmp_path / "o" / "density.json")["extent"] == [105, 13, 710, 615]
    run(runner, "risk", "--input", tmp_path / "t.csv", "--density", tmp_path / "o" / "density.json", "--out", tmp_path / "o")
