"""Readers/writers for disparity, depth, image, mask, and calibration files.

Conventions shared by every pipeline stage:
  * maps are row-major (H, W) numpy arrays, pixel (u, v) = values[v, u]
  * invalid pixels are stored as 0 on disk; in memory DisparityMap carries an
    explicit validity mask, DepthMap uses 0 = invalid
  * all writers are atomic (temp file in the target directory + rename)
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np
from PIL import Image


class ValidationError(ValueError):
    """A domain-type invariant or operation precondition was violated."""


class FormatError(ValueError):
    """Base class for on-disk format violations."""


class PfmHeaderError(FormatError):
    """PFM header is malformed (magic, dimensions, or scale line)."""


class PfmChannelError(FormatError):
    """PFM file holds a channel count other than 1."""


class PfmTruncatedError(FormatError):
    """PFM payload is shorter than width*height samples."""


class PngBitDepthError(FormatError):
    """PNG bit depth does not match the expected encoding."""


class CalibrationError(FormatError):
    """Calibration JSON is missing keys or violates rig invariants."""


class RegionError(FormatError):
    """Region labels/pairs violate the RegionSet invariants."""


# ---------------------------------------------------------------------------
# domain types


@dataclass
class DisparityMap:
    """Per-pixel horizontal disparity in pixels with an explicit validity mask.

    Invalid pixels hold the value 0; valid values are finite and >= 0.
    """

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.values.ndim != 2:
            raise ValidationError("disparity values must be a 2-D array")
        if self.valid.shape != self.values.shape:
            raise ValidationError("validity mask shape does not match values")
        vals = self.values[self.valid]
        if not np.isfinite(vals).all():
            raise ValidationError("valid disparities must be finite")
        if vals.size and vals.min() < 0:
            raise ValidationError("valid disparities must be >= 0")
        # enforce the sentinel: invalid pixels hold exactly 0
        if (~self.valid).any():
            self.values = np.where(self.valid, self.values, np.float32(0.0))

    @classmethod
    def from_values(cls, values) -> "DisparityMap":
        """Build from raw values using the 0 = invalid sentinel (non-finite also invalid)."""
        arr = np.asarray(values, dtype=np.float32)
        valid = np.isfinite(arr) & (arr != 0)
        arr = np.where(valid, arr, np.float32(0.0))
        return cls(arr, valid)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def copy(self) -> "DisparityMap":
        return DisparityMap(self.values.copy(), self.valid.copy())


@dataclass
class DepthMap:
    """Metric depth in meters; 0 = invalid."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 2:
            raise ValidationError("depth values must be a 2-D array")
        if not np.isfinite(self.values).all():
            raise ValidationError("depth values must be finite")
        if self.values.size and self.values.min() < 0:
            raise ValidationError("depth values must be >= 0")

    @property
    def valid(self) -> np.ndarray:
        return self.values > 0

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def copy(self) -> "DepthMap":
        return DepthMap(self.values.copy())


@dataclass
class RegionSet:
    """Labeled illusion/support masks plus (illusion_id, support_id) pairing."""

    labels: np.ndarray
    pairs: list[tuple[int, int]]

    def __post_init__(self):
        self.labels = np.asarray(self.labels)
        if self.labels.ndim != 2:
            raise RegionError("region labels must be a 2-D array")
        if self.labels.dtype != np.uint8:
            if self.labels.size and (self.labels.min() < 0 or self.labels.max() > 255):
                raise RegionError("region ids must fit in 8 bits")
            self.labels = self.labels.astype(np.uint8)
        self.pairs = [(int(a), int(b)) for a, b in self.pairs]
        present = set(np.unique(self.labels).tolist())
        illusion_ids = [a for a, _ in self.pairs]
        support_ids = [b for _, b in self.pairs]
        for rid in illusion_ids + support_ids:
            if rid == 0:
                raise RegionError("region id 0 is reserved for background")
            if rid not in present:
                raise RegionError(f"pair references id {rid} absent from labels")
        used = illusion_ids + support_ids
        if len(set(used)) != len(used):
            raise RegionError("illusion/support ids must be disjoint across pairs")

    def mask(self, region_id: int) -> np.ndarray:
        return self.labels == region_id

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValidationError("focal lengths must be > 0")
        if not (self.width > 0 and self.height > 0):
            raise ValidationError("image dimensions must be > 0")

    def scaled(self, factor: int) -> "CameraIntrinsics":
        return CameraIntrinsics(
            fx=self.fx * factor,
            fy=self.fy * factor,
            cx=self.cx * factor,
            cy=self.cy * factor,
            width=self.width * factor,
            height=self.height * factor,
        )

    def to_dict(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "width": self.width, "height": self.height,
        }


_R_ORTHO_TOL = 1e-6


@dataclass
class CalibrationRig:
    """Two-camera rig: stereo-left and lidar intrinsics plus the lidar->left pose."""

    left_intrinsics: CameraIntrinsics
    lidar_intrinsics: CameraIntrinsics
    R: np.ndarray
    T: np.ndarray
    baseline_m: float
    focal_px: float

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=np.float64).reshape(3, 3)
        self.T = np.asarray(self.T, dtype=np.float64).reshape(3)
        err = np.abs(self.R.T @ self.R - np.eye(3)).max()
        if err > _R_ORTHO_TOL:
            raise CalibrationError(
                f"rotation is not orthonormal: max|R^T R - I| = {err:.3g}"
            )
        if not self.baseline_m > 0:
            raise CalibrationError("baseline_m must be > 0")
        if not self.focal_px > 0:
            raise CalibrationError("focal_px must be > 0")


# ---------------------------------------------------------------------------
# atomic write helper


def _atomic_write_bytes(path, data: bytes) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


# ---------------------------------------------------------------------------
# PFM


def _parse_pfm(data: bytes):
    lines = data.split(b"\n", 3)
    if len(lines) < 4:
        raise PfmHeaderError("incomplete PFM header")
    magic = lines[0].strip()
    if magic == b"PF":
        raise PfmChannelError("3-channel PFM not supported, expected single channel 'Pf'")
    if magic != b"Pf":
        raise PfmHeaderError(f"bad PFM magic {magic!r}")
    dims = lines[1].split()
    if len(dims) != 2:
        raise PfmHeaderError("PFM dimension line must hold width and height")
    try:
        width, height = int(dims[0]), int(dims[1])
    except ValueError as exc:
        raise PfmHeaderError("non-integer PFM dimensions") from exc
    if width <= 0 or height <= 0:
        raise PfmHeaderError("PFM dimensions must be positive")
    try:
        scale = float(lines[2].strip().decode("ascii"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise PfmHeaderError("bad PFM scale line") from exc
    if scale == 0:
        raise PfmHeaderError("PFM scale must be nonzero (sign carries endianness)")
    payload = lines[3]
    want = width * height * 4
    if len(payload) < want:
        raise PfmTruncatedError(
            f"PFM payload holds {len(payload)} bytes, expected {want}"
        )
    dtype = "<f4" if scale < 0 else ">f4"
    flat = np.frombuffer(payload[:want], dtype=dtype).astype(np.float32)
    # PFM rows are stored bottom-to-top
    return flat.reshape(height, width)[::-1].copy()


def read_pfm(path) -> DisparityMap:
    """Read a single-channel PFM file as a disparity map (0 = invalid)."""
    with open(path, "rb") as fh:
        data = fh.read()
    return DisparityMap.from_values(_parse_pfm(data))


def read_pfm_depth(path) -> DepthMap:
    """Read a single-channel PFM file as a metric depth map (0 = invalid)."""
    with open(path, "rb") as fh:
        data = fh.read()
    arr = _parse_pfm(data)
    arr = np.where(np.isfinite(arr), arr, np.float32(0.0))
    return DepthMap(arr)


def write_pfm(map_or_values, path) -> None:
    """Write a map as little-endian single-channel PFM; invalid pixels become 0."""
    if hasattr(map_or_values, "values"):
        values = np.asarray(map_or_values.values, dtype=np.float32)
    else:
        values = np.asarray(map_or_values, dtype=np.float32)
    if values.ndim != 2 or values.size == 0:
        raise ValidationError("PFM maps must be non-empty 2-D arrays")
    if not np.isfinite(values).all():
        raise ValidationError("PFM maps must hold finite values only")
    height, width = values.shape
    header = f"Pf\n{width} {height}\n-1.0\n".encode("ascii")
    payload = values[::-1].astype("<f4").tobytes()
    _atomic_write_bytes(path, header + payload)


# ---------------------------------------------------------------------------
# 16-bit PNG disparity (KITTI-style stored = round(disparity * scale), 0 = invalid)

_PNG16_MODES = ("I;16", "I;16B", "I;16L")


def read_png16_disparity(path, scale: float = 256.0) -> DisparityMap:
    """Read a 16-bit single-channel PNG as disparity = stored / scale."""
    if scale <= 0:
        raise ValidationError("scale must be > 0")
    with Image.open(path) as img:
        if img.mode not in _PNG16_MODES:
            raise PngBitDepthError(
                f"expected 16-bit single-channel PNG, got mode {img.mode!r}"
            )
        stored = np.asarray(img, dtype=np.uint16)
    values = stored.astype(np.float32) / np.float32(scale)
    return DisparityMap(values, stored != 0)


def write_png16_disparity(disp: DisparityMap, path, scale: float = 256.0) -> None:
    """Write disparity as 16-bit PNG; raises if a valid value is unrepresentable."""
    if scale <= 0:
        raise ValidationError("scale must be > 0")
    stored = np.rint(disp.values.astype(np.float64) * scale)
    stored[~disp.valid] = 0
    bad = disp.valid & ((stored < 1) | (stored > 65535))
    if bad.any():
        v = disp.values[bad][0]
        raise FormatError(f"disparity {v} not representable as 16-bit PNG at scale {scale}")
    img = Image.fromarray(stored.astype(np.uint16))
    buf = _encode_png(img)
    _atomic_write_bytes(path, buf)


def _encode_png(img: Image.Image) -> bytes:
    import io

    out = io.BytesIO()
    img.save(out, format="PNG")
    return out.getvalue()


# ---------------------------------------------------------------------------
# 8-bit images and label masks


def read_image_rgb(path) -> np.ndarray:
    """Read any PIL-readable image as (H, W, 3) uint8."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def write_image_rgb(image: np.ndarray, path) -> None:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise ValidationError("RGB images must be (H, W, 3) uint8")
    _atomic_write_bytes(path, _encode_png(Image.fromarray(image, mode="RGB")))


def read_mask_png(path) -> np.ndarray:
    """Read an 8-bit single-channel PNG of region ids."""
    with Image.open(path) as img:
        if img.mode not in ("L", "P"):
            raise PngBitDepthError(
                f"expected 8-bit single-channel PNG, got mode {img.mode!r}"
            )
        if img.mode == "P":
            arr = np.asarray(img, dtype=np.uint8)  # palette indices are the labels
        else:
            arr = np.asarray(img, dtype=np.uint8)
    return arr


def write_mask_png(labels: np.ndarray, path) -> None:
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValidationError("label masks must be 2-D")
    _atomic_write_bytes(path, _encode_png(Image.fromarray(labels.astype(np.uint8), mode="L")))


def read_regions(labels_png, pairs_json) -> RegionSet:
    """Load a RegionSet from an 8-bit label PNG and a JSON pair list."""
    labels = read_mask_png(labels_png)
    with open(pairs_json, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise RegionError("pairs JSON must be a list of {illusion, support} objects")
    pairs = []
    for entry in raw:
        try:
            pairs.append((int(entry["illusion"]), int(entry["support"])))
        except (TypeError, KeyError) as exc:
            raise RegionError(f"bad pair entry {entry!r}") from exc
    return RegionSet(labels, pairs)


def write_regions(regions: RegionSet, labels_png, pairs_json) -> None:
    write_mask_png(regions.labels, labels_png)
    payload = [{"illusion": a, "support": b} for a, b in regions.pairs]
    _atomic_write_bytes(pairs_json, _dump_json(payload))


# ---------------------------------------------------------------------------
# calibration JSON


def _dump_json(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _intrinsics_from_dict(d: dict, where: str) -> CameraIntrinsics:
    try:
        return CameraIntrinsics(
            fx=float(d["fx"]), fy=float(d["fy"]),
            cx=float(d["cx"]), cy=float(d["cy"]),
            width=int(d["width"]), height=int(d["height"]),
        )
    except KeyError as exc:
        raise CalibrationError(f"{where} missing key {exc.args[0]!r}") from exc
    except ValidationError as exc:
        raise CalibrationError(f"{where}: {exc}") from exc


def read_calibration(path) -> CalibrationRig:
    """Load a CalibrationRig, enforcing its invariants at load time."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    for key in ("left_intrinsics", "lidar_intrinsics", "R", "T", "baseline_m", "focal_px"):
        if key not in raw:
            raise CalibrationError(f"calibration missing key {key!r}")
    R = np.asarray(raw["R"], dtype=np.float64)
    if R.size != 9:
        raise CalibrationError("R must hold 9 reals (row-major 3x3)")
    T = np.asarray(raw["T"], dtype=np.float64)
    if T.size != 3:
        raise CalibrationError("T must hold 3 reals")
    return CalibrationRig(
        left_intrinsics=_intrinsics_from_dict(raw["left_intrinsics"], "left_intrinsics"),
        lidar_intrinsics=_intrinsics_from_dict(raw["lidar_intrinsics"], "lidar_intrinsics"),
        R=R.reshape(3, 3),
        T=T,
        baseline_m=float(raw["baseline_m"]),
        focal_px=float(raw["focal_px"]),
    )


def write_calibration(rig: CalibrationRig, path) -> None:
    payload = {
        "left_intrinsics": rig.left_intrinsics.to_dict(),
        "lidar_intrinsics": rig.lidar_intrinsics.to_dict(),
        "R": [float(x) for x in rig.R.reshape(-1)],
        "T": [float(x) for x in rig.T],
        "baseline_m": rig.baseline_m,
        "focal_px": rig.focal_px,
    }
    _atomic_write_bytes(path, _dump_json(payload))
