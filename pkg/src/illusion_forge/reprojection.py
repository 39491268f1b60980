"""LiDAR-to-stereo depth reprojection pipeline.

Stages, in order: nearest-neighbor densification, rigid transform + projection
into the stereo-left frame, min-depth Z-buffer splat, connected-component hole
filling with guided-filter smoothing, backward reprojection validation,
median-gate noise suppression, and conversion to disparity.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from .camera_model import (
    PixelSample,
    Point3,
    depth_to_disparity,
    invert_transform,
    project,
    transform,
    unproject,
    upsample_depth_nearest,
)
from .io_formats import CalibrationRig, DepthMap, DisparityMap, ValidationError
from .view_synthesis import diffusion_fill


@dataclass(frozen=True)
class ReprojectConfig:
    upsample_factor: int = 3
    small_area_th: int = 100
    guided_radius: int = 5
    guided_eps: float = 1e-3
    backward_tau: float = 0.05   # meters
    noise_tau: float = 0.03      # meters
    median_size: int = 3

    def __post_init__(self):
        if min(self.upsample_factor, self.small_area_th, self.guided_radius,
               self.median_size) < 1:
            raise ValidationError("reprojection config values must be positive")
        if min(self.guided_eps, self.backward_tau, self.noise_tau) <= 0:
            raise ValidationError("reprojection config values must be positive")
        if self.median_size % 2 != 1:
            raise ValidationError("median_size must be odd")


def zbuffer_splat(samples: PixelSample, width: int, height: int) -> DepthMap:
    """Splat samples to the four integer neighbors of (u, v); min depth wins."""
    u = np.atleast_1d(np.asarray(samples.u, dtype=np.float64))
    v = np.atleast_1d(np.asarray(samples.v, dtype=np.float64))
    z = np.atleast_1d(np.asarray(samples.z, dtype=np.float64))
    keep = np.isfinite(u) & np.isfinite(v) & (z > 0)
    u, v, z = u[keep], v[keep], z[keep]

    buf = np.full((height, width), np.inf, dtype=np.float64)
    for uu in (np.floor(u), np.ceil(u)):
        for vv in (np.floor(v), np.ceil(v)):
            inb = (uu >= 0) & (uu < width) & (vv >= 0) & (vv < height)
            if inb.any():
                np.minimum.at(buf, (vv[inb].astype(np.int64), uu[inb].astype(np.int64)), z[inb])
    out = np.where(np.isinf(buf), 0.0, buf).astype(np.float32)
    return DepthMap(out)


def _box_sum(a: np.ndarray, radius: int) -> np.ndarray:
    """Sum over a (2r+1)^2 window clipped at the borders, via integral image."""
    h, w = a.shape
    integral = np.zeros((h + 1, w + 1), dtype=np.float64)
    np.cumsum(np.cumsum(a, axis=0), axis=1, out=integral[1:, 1:])
    r = radius
    y0 = np.clip(np.arange(h) - r, 0, h)
    y1 = np.clip(np.arange(h) + r + 1, 0, h)
    x0 = np.clip(np.arange(w) - r, 0, w)
    x1 = np.clip(np.arange(w) + r + 1, 0, w)
    return (
        integral[np.ix_(y1, x1)] - integral[np.ix_(y0, x1)]
        - integral[np.ix_(y1, x0)] + integral[np.ix_(y0, x0)]
    )


def guided_filter(guide: np.ndarray, src: np.ndarray, radius: int, eps: float) -> np.ndarray:
    """Standard box-window local linear guided filter (single-channel guide)."""
    guide = np.asarray(guide, dtype=np.float64)
    src = np.asarray(src, dtype=np.float64)
    if guide.shape != src.shape:
        raise ValidationError("guide and source dimensions differ")
    ones = np.ones_like(guide)
    n = _box_sum(ones, radius)
    mean_i = _box_sum(guide, radius) / n
    mean_p = _box_sum(src, radius) / n
    corr_ip = _box_sum(guide * src, radius) / n
    corr_ii = _box_sum(guide * guide, radius) / n
    cov_ip = corr_ip - mean_i * mean_p
    var_i = corr_ii - mean_i * mean_i
    a = cov_ip / (var_i + eps)
    b = mean_p - a * mean_i
    mean_a = _box_sum(a, radius) / n
    mean_b = _box_sum(b, radius) / n
    return mean_a * guide + mean_b


def _to_gray(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim == 3:
        return image.astype(np.float64).mean(axis=2) / 255.0
    return image.astype(np.float64) / 255.0


def fill_holes(depth: DepthMap, guide: np.ndarray, cfg: ReprojectConfig = ReprojectConfig()) -> DepthMap:
    """Fill invalid regions: diffusion for small components, guided fill elsewhere.

    One diffusion fill over the full invalid mask provides the values; small
    components (area <= small_area_th) take them directly, the rest take the
    guided-filtered version so the RGB guide shapes large reconstructions.
    """
    invalid = ~depth.valid
    if not invalid.any() or invalid.all():
        return depth.copy()
    if np.asarray(guide).shape[:2] != depth.values.shape:
        raise ValidationError("guide and depth dimensions differ")

    labels, count = ndimage.label(invalid, structure=np.ones((3, 3), dtype=bool))
    areas = np.bincount(labels.ravel(), minlength=count + 1)
    small_ids = np.flatnonzero(areas <= cfg.small_area_th)
    small_ids = small_ids[small_ids != 0]
    small_mask = np.isin(labels, small_ids) if small_ids.size else np.zeros_like(invalid)

    fill = diffusion_fill(depth.values.astype(np.float64), invalid)
    out = depth.values.astype(np.float64).copy()
    out[small_mask] = fill[small_mask]
    large_mask = invalid & ~small_mask
    if large_mask.any():
        guided = guided_filter(_to_gray(guide), fill, cfg.guided_radius, cfg.guided_eps)
        out[large_mask] = guided[large_mask]
    return DepthMap(np.maximum(out, 0.0).astype(np.float32))


def backward_validate(
    zed_depth: DepthMap,
    lidar_depth: DepthMap,
    rig: CalibrationRig,
    tau: float,
) -> DepthMap:
    """Zero stereo-frame pixels that disagree with the lidar map they came from.

    Each valid pixel is unprojected, carried back through the inverse rig
    transform, and projected into the lidar image; it is zeroed if it lands
    out of bounds (or behind the lidar camera), hits an invalid lidar pixel,
    or differs from the lidar depth there by more than tau. Lidar lookup uses
    the nearest integer pixel. Surviving values are never modified.
    """
    if tau <= 0:
        raise ValidationError("tau must be > 0")
    out = zed_depth.values.copy()
    vmask = zed_depth.valid
    if not vmask.any():
        return DepthMap(out)

    vv, uu = np.nonzero(vmask)
    z = zed_depth.values[vv, uu].astype(np.float64)
    pts = unproject(PixelSample(uu.astype(np.float64), vv.astype(np.float64), z),
                    rig.left_intrinsics)
    rinv, tinv = invert_transform(rig.R, rig.T)
    back = transform(pts, rinv, tinv)

    kill = back.z <= 0
    ok = ~kill
    li = rig.lidar_intrinsics
    ul = np.zeros_like(back.z)
    vl = np.zeros_like(back.z)
    ul[ok] = li.fx * back.x[ok] / back.z[ok] + li.cx
    vl[ok] = li.fy * back.y[ok] / back.z[ok] + li.cy
    iu = np.rint(ul).astype(np.int64)
    iv = np.rint(vl).astype(np.int64)
    oob = (iu < 0) | (iu >= li.width) | (iv < 0) | (iv >= li.height)
    kill |= oob
    ok = ~kill
    if ok.any():
        look = lidar_depth.values[iv[ok], iu[ok]].astype(np.float64)
        bad = (look == 0) | (np.abs(back.z[ok] - look) > tau)
        sel = np.flatnonzero(ok)[bad]
        kill[sel] = True
    out[vv[kill], uu[kill]] = 0.0
    return DepthMap(out)


def masked_median(depth: DepthMap, size: int) -> np.ndarray:
    """Median over a size x size window, invalid pixels excluded; NaN if empty."""
    if size % 2 != 1 or size < 1:
        raise ValidationError("median size must be odd and >= 1")
    pad = size // 2
    h, w = depth.values.shape
    padded = np.full((h + 2 * pad, w + 2 * pad), np.nan, dtype=np.float64)
    padded[pad : pad + h, pad : pad + w] = np.where(depth.valid, depth.values, np.nan)
    windows = sliding_window_view(padded, (size, size))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=RuntimeWarning)
        med = np.nanmedian(windows, axis=(-2, -1))
    return med


def suppress_noise(depth: DepthMap, cfg: ReprojectConfig = ReprojectConfig()) -> DepthMap:
    """Zero pixels deviating from their masked window median by > noise_tau.

    The filter gates; it never rewrites surviving values.
    """
    med = masked_median(depth, cfg.median_size)
    noisy = depth.valid & (np.abs(depth.values.astype(np.float64) - med) > cfg.noise_tau)
    out = depth.values.copy()
    out[noisy] = 0.0
    return DepthMap(out)


def reproject_depth(
    lidar_depth: DepthMap,
    left_rgb: np.ndarray,
    rig: CalibrationRig,
    cfg: ReprojectConfig = ReprojectConfig(),
) -> DisparityMap:
    """Full pipeline from a lidar depth map to a stereo-left disparity map."""
    left_rgb = np.asarray(left_rgb)
    li = rig.left_intrinsics
    if left_rgb.shape[:2] != (li.height, li.width):
        raise ValidationError("guide image does not match left camera dimensions")
    if lidar_depth.values.shape != (rig.lidar_intrinsics.height, rig.lidar_intrinsics.width):
        raise ValidationError("lidar depth does not match lidar camera dimensions")

    up, up_intr = upsample_depth_nearest(lidar_depth, rig.lidar_intrinsics, cfg.upsample_factor)
    vmask = up.valid
    if vmask.any():
        vv, uu = np.nonzero(vmask)
        z = up.values[vv, uu].astype(np.float64)
        pts = unproject(PixelSample(uu.astype(np.float64), vv.astype(np.float64), z), up_intr)
        moved = transform(pts, rig.R, rig.T)
        front = moved.z > 0
        if front.any():
            cam = project(Point3(moved.x[front], moved.y[front], moved.z[front]), li)
            splat = zbuffer_splat(cam, li.width, li.height)
        else:
            splat = DepthMap(np.zeros((li.height, li.width), dtype=np.float32))
    else:
        splat = DepthMap(np.zeros((li.height, li.width), dtype=np.float32))

    filled = fill_holes(splat, left_rgb, cfg)
    validated = backward_validate(filled, lidar_depth, rig, cfg.backward_tau)
    cleaned = suppress_noise(validated, cfg)
    return depth_to_disparity(cleaned, rig.baseline_m, rig.focal_px)
