import json

import numpy as np
import pytest

from illusion_forge import (
    CameraIntrinsics,
    DepthMap,
    DisparityMap,
    read_calibration,
    read_pfm,
    read_pfm_depth,
    read_png16_disparity,
    read_regions,
    write_calibration,
    write_pfm,
    write_png16_disparity,
)
from illusion_forge.io_formats import (
    CalibrationError,
    FormatError,
    PfmChannelError,
    PfmHeaderError,
    PfmTruncatedError,
    PngBitDepthError,
    RegionError,
    ValidationError,
    write_mask_png,
)

from conftest import identity_rig, make_disparity


# ---------------------------------------------------------------------------
# PFM


def test_pfm_round_trip_bit_exact(tmp_path):
    disp = make_disparity([[1.5, 2.0], [0.0, 3.25]])
    path = tmp_path / "d.pfm"
    write_pfm(disp, path)
    back = read_pfm(path)
    assert np.array_equal(back.values, disp.values)
    assert np.array_equal(back.valid, disp.valid)


def test_pfm_three_channel_rejected(tmp_path):
    path = tmp_path / "bad.pfm"
    path.write_bytes(b"PF\n2 2\n-1.0\n" + b"\x00" * 48)
    with pytest.raises(PfmChannelError):
        read_pfm(path)


def test_pfm_invalid_sentinel_yields_validity_flag(tmp_path):
    disp = make_disparity([[1.0, 0.0, 2.0]])
    path = tmp_path / "d.pfm"
    write_pfm(disp, path)
    back = read_pfm(path)
    assert back.valid.tolist() == [[True, False, True]]


def test_pfm_single_value_layout(tmp_path):
    path = tmp_path / "one.pfm"
    write_pfm(make_disparity([[7.0]]), path)
    raw = path.read_bytes()
    assert raw[:12] == b"Pf\n1 1\n-1.0\n"
    assert len(raw) == 16
    assert read_pfm(path).values[0, 0] == 7.0


def test_pfm_write_rejects_empty_and_nonfinite(tmp_path):
    with pytest.raises(ValidationError):
        write_pfm(np.zeros((0, 3), dtype=np.float32), tmp_path / "z.pfm")
    with pytest.raises(ValidationError):
        write_pfm(np.array([[np.nan]], dtype=np.float32), tmp_path / "n.pfm")


def test_pfm_header_errors(tmp_path):
    path = tmp_path / "bad.pfm"
    path.write_bytes(b"Qf\n1 1\n-1.0\n" + b"\x00" * 4)
    with pytest.raises(PfmHeaderError):
        read_pfm(path)
    path.write_bytes(b"Pf\n1\n-1.0\n" + b"\x00" * 4)
    with pytest.raises(PfmHeaderError):
        read_pfm(path)
    path.write_bytes(b"Pf\n1 1\n0\n" + b"\x00" * 4)
    with pytest.raises(PfmHeaderError):
        read_pfm(path)


def test_pfm_truncated_payload(tmp_path):
    path = tmp_path / "trunc.pfm"
    path.write_bytes(b"Pf\n2 2\n-1.0\n" + b"\x00" * 7)
    with pytest.raises(PfmTruncatedError):
        read_pfm(path)


def test_pfm_row_order_is_top_to_bottom(tmp_path):
    # write a 1x2-column map; PFM stores bottom row first on disk
    disp = make_disparity([[1.0], [2.0]])
    path = tmp_path / "rows.pfm"
    write_pfm(disp, path)
    payload = path.read_bytes()[-8:]
    bottom_first = np.frombuffer(payload, dtype="<f4")
    assert bottom_first.tolist() == [2.0, 1.0]
    assert read_pfm(path).values[:, 0].tolist() == [1.0, 2.0]


def test_pfm_depth_reader(tmp_path):
    path = tmp_path / "z.pfm"
    write_pfm(np.array([[2.5, 0.0]], dtype=np.float32), path)
    depth = read_pfm_depth(path)
    assert isinstance(depth, DepthMap)
    assert depth.values.tolist() == [[2.5, 0.0]]
    assert depth.valid.tolist() == [[True, False]]


def test_pfm_random_round_trip_property(rng):
    import os
    import tempfile

    for _ in range(200):
        h, w = rng.integers(1, 12, size=2)
        vals = rng.uniform(0.01, 300, size=(h, w)).astype(np.float32)
        vals[rng.random((h, w)) < 0.2] = 0.0
        disp = DisparityMap.from_values(vals)
        fd, path = tempfile.mkstemp(suffix=".pfm")
        os.close(fd)
        try:
            write_pfm(disp, path)
            back = read_pfm(path)
            assert np.array_equal(back.values, disp.values)
            assert np.array_equal(back.valid, disp.valid)
        finally:
            os.unlink(path)


# ---------------------------------------------------------------------------
# PNG16


def test_png16_known_values(tmp_path):
    stored = np.array([[384, 0, 65535]], dtype=np.uint16)
    from PIL import Image

    Image.fromarray(stored).save(tmp_path / "d.png")
    disp = read_png16_disparity(tmp_path / "d.png")
    assert disp.values[0, 0] == pytest.approx(1.5)
    assert not disp.valid[0, 1]
    assert disp.values[0, 2] == pytest.approx(65535 / 256.0)


def test_png16_rejects_8bit(tmp_path):
    from PIL import Image

    Image.fromarray(np.zeros((2, 2), dtype=np.uint8)).save(tmp_path / "g.png")
    with pytest.raises(PngBitDepthError):
        read_png16_disparity(tmp_path / "g.png")


def test_png16_round_trip_quantization(tmp_path, rng):
    for i in range(200):
        h, w = rng.integers(1, 10, size=2)
        vals = rng.uniform(1 / 128, 250, size=(h, w)).astype(np.float32)
        vals[rng.random((h, w)) < 0.2] = 0.0
        disp = DisparityMap.from_values(vals)
        path = tmp_path / f"q{i}.png"
        write_png16_disparity(disp, path)
        back = read_png16_disparity(path)
        assert np.array_equal(back.valid, disp.valid)
        err = np.abs(back.values[disp.valid] - disp.values[disp.valid])
        assert err.size == 0 or err.max() <= 1 / 512 + 1e-7


def test_png16_write_rejects_unrepresentable(tmp_path):
    with pytest.raises(FormatError):
        write_png16_disparity(make_disparity([[300.0]]), tmp_path / "big.png")
    with pytest.raises(FormatError):
        write_png16_disparity(make_disparity([[1e-4]]), tmp_path / "tiny.png")


# ---------------------------------------------------------------------------
# calibration


def test_calibration_round_trip(tmp_path):
    rig = identity_rig()
    path = tmp_path / "calib.json"
    write_calibration(rig, path)
    back = read_calibration(path)
    assert np.array_equal(back.R, rig.R)
    assert np.array_equal(back.T, rig.T)
    assert back.baseline_m == rig.baseline_m
    assert back.left_intrinsics == rig.left_intrinsics


def test_calibration_rejects_non_orthonormal(tmp_path):
    rig = identity_rig()
    path = tmp_path / "calib.json"
    write_calibration(rig, path)
    raw = json.loads(path.read_text())
    raw["R"][0] = 1.2
    path.write_text(json.dumps(raw))
    with pytest.raises(CalibrationError):
        read_calibration(path)


def test_calibration_rejects_negative_baseline(tmp_path):
    rig = identity_rig()
    path = tmp_path / "calib.json"
    write_calibration(rig, path)
    raw = json.loads(path.read_text())
    raw["baseline_m"] = -0.1
    path.write_text(json.dumps(raw))
    with pytest.raises(CalibrationError):
        read_calibration(path)


def test_calibration_missing_key(tmp_path):
    path = tmp_path / "calib.json"
    path.write_text(json.dumps({"R": [1, 0, 0, 0, 1, 0, 0, 0, 1]}))
    with pytest.raises(CalibrationError):
        read_calibration(path)


# ---------------------------------------------------------------------------
# regions


def _write_labels(tmp_path, labels):
    path = tmp_path / "labels.png"
    write_mask_png(np.asarray(labels, dtype=np.uint8), path)
    return path


def _write_pairs(tmp_path, pairs):
    path = tmp_path / "pairs.json"
    path.write_text(json.dumps(pairs))
    return path


def test_regions_valid(tmp_path):
    lp = _write_labels(tmp_path, [[0, 1], [2, 0]])
    pp = _write_pairs(tmp_path, [{"illusion": 1, "support": 2}])
    regions = read_regions(lp, pp)
    assert regions.pairs == [(1, 2)]
    assert regions.mask(1).sum() == 1


def test_regions_missing_id(tmp_path):
    lp = _write_labels(tmp_path, [[0, 1], [2, 0]])
    pp = _write_pairs(tmp_path, [{"illusion": 1, "support": 3}])
    with pytest.raises(RegionError):
        read_regions(lp, pp)


def test_regions_overlapping_pairs(tmp_path):
    lp = _write_labels(tmp_path, [[1, 2], [4, 0]])
    pp = _write_pairs(tmp_path, [{"illusion": 1, "support": 2}, {"illusion": 2, "support": 4}])
    with pytest.raises(RegionError):
        read_regions(lp, pp)


# ---------------------------------------------------------------------------
# domain type invariants


def test_disparity_map_rejects_negative_valid():
    with pytest.raises(ValidationError):
        make_disparity([[-1.0]], valid=[[True]])


def test_disparity_map_zeroes_invalid():
    d = make_disparity([[5.0, 7.0]], valid=[[True, False]])
    assert d.values.tolist() == [[5.0, 0.0]]


def test_depth_map_rejects_negative_and_nonfinite():
    with pytest.raises(ValidationError):
        DepthMap(np.array([[-0.5]]))
    with pytest.raises(ValidationError):
        DepthMap(np.array([[np.inf]]))


def test_intrinsics_reject_nonpositive_focal():
    with pytest.raises(ValidationError):
        CameraIntrinsics(fx=0, fy=1, cx=0, cy=0, width=2, height=2)
