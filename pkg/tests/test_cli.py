import json
import subprocess
import sys

import numpy as np
import pytest
from PIL import Image

from illusion_forge import (
    DisparityMap,
    read_pfm,
    write_calibration,
    write_pfm,
    write_regions,
)
from illusion_forge.io_formats import RegionSet, write_image_rgb

from conftest import identity_rig, ring_region_set


def run_cli(*args, cwd=None):
    return subprocess.run(
        [sys.executable, "-m", "illusion_forge", *[str(a) for a in args]],
        capture_output=True, text=True, cwd=cwd,
    )


def gradient_image(h, w):
    img = np.zeros((h, w, 3), dtype=np.uint8)
    img[..., 0] = np.linspace(0, 255, w, dtype=np.uint8)[None, :]
    img[..., 1] = np.linspace(0, 255, h, dtype=np.uint8)[:, None]
    img[..., 2] = 64
    return img


@pytest.fixture
def frame_dir(tmp_path):
    """Fixture frame: constant-5 support ring around a scrambled interior."""
    root = tmp_path / "data" / "plane01"
    root.mkdir(parents=True)
    regions = ring_region_set()
    rng = np.random.default_rng(3)
    vals = np.full((32, 32), 5.0, dtype=np.float32)
    interior = regions.mask(1)
    vals[interior] = rng.uniform(1, 9, size=int(interior.sum())).astype(np.float32)
    disp = DisparityMap(vals, np.ones((32, 32), bool))
    write_pfm(disp, root / "disp.pfm")
    write_image_rgb(gradient_image(32, 32), root / "left.png")
    write_regions(regions, root / "labels.png", root / "pairs.json")
    return root


def test_fit_plane_constant_fixture(frame_dir, tmp_path):
    out = tmp_path / "plane.json"
    res = run_cli(
        "fit-plane", "--disparity", frame_dir / "disp.pfm",
        "--mask", frame_dir / "labels.png", "--pairs", frame_dir / "pairs.json",
        "--tau-d", 0.1, "--seed", 0, "--out", out,
    )
    assert res.returncode == 0, res.stderr
    payload = json.loads(res.stdout)
    assert payload["alpha"] == pytest.approx(0.0, abs=1e-9)
    assert payload["beta"] == pytest.approx(0.0, abs=1e-9)
    assert payload["delta"] == pytest.approx(1.0)
    assert payload["gamma"] == pytest.approx(-5.0)
    assert json.loads(out.read_text()) == payload


def test_fit_plane_usage_error_missing_mask(frame_dir):
    res = run_cli("fit-plane", "--disparity", frame_dir / "disp.pfm",
                  "--pairs", frame_dir / "pairs.json")
    assert res.returncode == 2


def test_fit_plane_degenerate_support(tmp_path):
    root = tmp_path / "bad"
    root.mkdir()
    labels = np.zeros((16, 16), dtype=np.uint8)
    labels[8, 8] = 1
    labels[0, :10] = 2
    write_regions(RegionSet(labels, [(1, 2)]), root / "labels.png", root / "pairs.json")
    disp = DisparityMap(np.ones((16, 16), np.float32), np.ones((16, 16), bool))
    write_pfm(disp, root / "disp.pfm")
    res = run_cli("fit-plane", "--disparity", root / "disp.pfm",
                  "--mask", root / "labels.png", "--pairs", root / "pairs.json")
    assert res.returncode == 1
    assert "degenerate support region" in res.stderr


def test_rectify_pipeline(frame_dir, tmp_path):
    out = tmp_path / "rect.pfm"
    res = run_cli(
        "rectify", "--disparity", frame_dir / "disp.pfm",
        "--mask", frame_dir / "labels.png", "--pairs", frame_dir / "pairs.json",
        "--tau-d", 0.1, "--feather", 0, "--out", out,
    )
    assert res.returncode == 0, res.stderr
    rect = read_pfm(out)
    regions = ring_region_set()
    assert np.allclose(rect.values[regions.mask(1)], 5.0, atol=1e-5)


def test_synth_right_uniform_scale(tmp_path):
    disp = DisparityMap(np.full((8, 100), 10.0, np.float32), np.ones((8, 100), bool))
    write_pfm(disp, tmp_path / "d.pfm")
    write_image_rgb(gradient_image(8, 100), tmp_path / "left.png")
    res = run_cli(
        "synth-right", "--left", tmp_path / "left.png", "--disparity", tmp_path / "d.pfm",
        "--out-right", tmp_path / "right.png", "--out-holes", tmp_path / "holes.png",
    )
    assert res.returncode == 0, res.stderr
    payload = json.loads(res.stdout)
    assert payload["scale"] == pytest.approx(1.0, abs=1e-3)
    assert (tmp_path / "right.png").is_file()
    holes = np.asarray(Image.open(tmp_path / "holes.png"))
    assert set(np.unique(holes)) <= {0, 255}


def test_eval_identity(frame_dir, tmp_path):
    res = run_cli("eval", "--pred", frame_dir / "disp.pfm", "--gt", frame_dir / "disp.pfm")
    assert res.returncode == 0, res.stderr
    payload = json.loads(res.stdout)
    assert payload["epe"] == 0.0
    assert payload["bad"]["2"] == 0.0
    assert payload["space"] == "disparity"


def test_reproject_cli_and_bad_calibration(tmp_path):
    rig = identity_rig(width=32, height=24, fx=40.0, baseline=0.12, focal=50.0)
    write_calibration(rig, tmp_path / "calib.json")
    depth = np.full((24, 32), 2.0, dtype=np.float32)
    write_pfm(depth, tmp_path / "lidar.pfm")
    write_image_rgb(gradient_image(24, 32), tmp_path / "guide.png")
    res = run_cli(
        "reproject", "--lidar-depth", tmp_path / "lidar.pfm", "--guide", tmp_path / "guide.png",
        "--calib", tmp_path / "calib.json", "--out", tmp_path / "disp.pfm",
    )
    assert res.returncode == 0, res.stderr
    disp = read_pfm(tmp_path / "disp.pfm")
    assert np.allclose(disp.values[disp.valid], 0.12 * 50.0 / 2.0, atol=1e-5)

    raw = json.loads((tmp_path / "calib.json").read_text())
    raw["R"][0] = 1.2
    (tmp_path / "calib.json").write_text(json.dumps(raw))
    res = run_cli(
        "reproject", "--lidar-depth", tmp_path / "lidar.pfm", "--guide", tmp_path / "guide.png",
        "--calib", tmp_path / "calib.json", "--out", tmp_path / "disp2.pfm",
    )
    assert res.returncode == 1
    assert "orthonormal" in res.stderr


def test_fuse_and_confidence_gt(tmp_path):
    h = w = 8
    stereo = DisparityMap(np.full((h, w), 8.0, np.float32), np.ones((h, w), bool))
    rng = np.random.default_rng(1)
    mono_vals = rng.uniform(1, 5, size=(h, w)).astype(np.float32)
    mono = DisparityMap(mono_vals, np.ones((h, w), bool))
    write_pfm(stereo, tmp_path / "s.pfm")
    write_pfm(mono, tmp_path / "m.pfm")
    conf = np.full((h, w), 255, dtype=np.uint8)
    Image.fromarray(conf, mode="L").save(tmp_path / "c.png")

    res = run_cli("fuse", "--stereo", tmp_path / "s.pfm", "--mono", tmp_path / "m.pfm",
                  "--confidence", tmp_path / "c.png", "--out", tmp_path / "f.pfm",
                  "--no-align")
    assert res.returncode == 0, res.stderr
    fused = read_pfm(tmp_path / "f.pfm")
    assert np.allclose(fused.values, 8.0)  # confidence 1 gates fully to stereo

    res = run_cli("confidence-gt", "--pred", tmp_path / "s.pfm", "--gt", tmp_path / "s.pfm",
                  "--out", tmp_path / "cgt.png")
    assert res.returncode == 0, res.stderr
    cgt = np.asarray(Image.open(tmp_path / "cgt.png"))
    assert cgt.shape == (2, 2)
    assert (cgt == 255).all()


def test_end_to_end_fixture_pipeline(frame_dir, tmp_path):
    """fit-plane -> rectify -> synth-right -> eval, all exit 0."""
    rect = tmp_path / "rect.pfm"
    steps = [
        ["fit-plane", "--disparity", frame_dir / "disp.pfm", "--mask",
         frame_dir / "labels.png", "--pairs", frame_dir / "pairs.json", "--tau-d", 0.1],
        ["rectify", "--disparity", frame_dir / "disp.pfm", "--mask", frame_dir / "labels.png",
         "--pairs", frame_dir / "pairs.json", "--tau-d", 0.1, "--out", rect],
        ["synth-right", "--left", frame_dir / "left.png", "--disparity", rect,
         "--out-right", tmp_path / "right.png", "--out-holes", tmp_path / "holes.png"],
        ["eval", "--pred", rect, "--gt", rect],
    ]
    for step in steps:
        res = run_cli(*step)
        assert res.returncode == 0, (step[0], res.stderr)
    assert read_pfm(rect).valid.all()
    # no stray temp files from the atomic writer
    leftovers = [p for p in tmp_path.rglob(".tmp-*")] + [p for p in frame_dir.rglob(".tmp-*")]
    assert leftovers == []


def test_rectify_all_pairs_deterministic_across_threads(tmp_path):
    root = tmp_path / "multi"
    root.mkdir()
    labels = np.zeros((32, 48), dtype=np.uint8)
    labels[4:28, 2:14] = 2
    labels[8:24, 5:11] = 1
    labels[4:28, 26:38] = 4
    labels[8:24, 29:35] = 3
    regions = RegionSet(labels, [(1, 2), (3, 4)])
    rng = np.random.default_rng(9)
    vals = np.full((32, 48), 5.0, dtype=np.float32)
    for ill in (1, 3):
        m = regions.mask(ill)
        vals[m] = rng.uniform(1, 9, size=int(m.sum())).astype(np.float32)
    vals[regions.mask(4)] = 7.0
    write_pfm(DisparityMap(vals, np.ones((32, 48), bool)), root / "disp.pfm")
    write_regions(regions, root / "labels.png", root / "pairs.json")

    outputs = []
    for threads in ("1", "8"):
        out = root / f"rect-{threads}.pfm"
        res = subprocess.run(
            [sys.executable, "-m", "illusion_forge", "rectify",
             "--disparity", str(root / "disp.pfm"), "--mask", str(root / "labels.png"),
             "--pairs", str(root / "pairs.json"), "--all-pairs", "--tau-d", "0.1",
             "--min-support", "50", "--out", str(out)],
            capture_output=True, text=True,
            env={**__import__("os").environ, "ILLUSION_FORGE_THREADS": threads},
        )
        assert res.returncode == 0, res.stderr
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]
    rect = read_pfm(root / "rect-1.pfm")
    assert np.allclose(rect.values[regions.mask(1)], 5.0, atol=1e-5)
    assert np.allclose(rect.values[regions.mask(3)], 7.0, atol=1e-5)


def test_version_flag():
    res = run_cli("--version")
    assert res.returncode == 0
    assert "illusion-forge" in res.stdout
