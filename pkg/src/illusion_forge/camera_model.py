"""Pinhole projections, rigid transforms, depth<->disparity, nearest upsampling.

All operations accept scalars or parallel numpy arrays inside the Point3 /
PixelSample tuples, so the same code serves single-point tests and full-frame
pipelines.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .io_formats import CameraIntrinsics, DepthMap, DisparityMap, ValidationError


class Point3(NamedTuple):
    x: float
    y: float
    z: float


class PixelSample(NamedTuple):
    u: float
    v: float
    z: float


def unproject(pix: PixelSample, intr: CameraIntrinsics) -> Point3:
    """Lift pixel (u, v) at depth z to camera coordinates: z * K^-1 [u, v, 1]."""
    u = np.asarray(pix.u, dtype=np.float64)
    v = np.asarray(pix.v, dtype=np.float64)
    z = np.asarray(pix.z, dtype=np.float64)
    if np.any(z <= 0):
        raise ValidationError("unproject requires depth z > 0")
    x = z * (u - intr.cx) / intr.fx
    y = z * (v - intr.cy) / intr.fy
    return Point3(x, y, z.copy())


def transform(p: Point3, R: np.ndarray, T: np.ndarray) -> Point3:
    """Rigid transform p' = R p + T."""
    R = np.asarray(R, dtype=np.float64).reshape(3, 3)
    T = np.asarray(T, dtype=np.float64).reshape(3)
    x = R[0, 0] * p.x + R[0, 1] * p.y + R[0, 2] * p.z + T[0]
    y = R[1, 0] * p.x + R[1, 1] * p.y + R[1, 2] * p.z + T[1]
    z = R[2, 0] * p.x + R[2, 1] * p.y + R[2, 2] * p.z + T[2]
    return Point3(x, y, z)


def invert_transform(R: np.ndarray, T: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of p' = R p + T, i.e. (R^-1, -R^-1 T) using R^-1 = R^T."""
    R = np.asarray(R, dtype=np.float64).reshape(3, 3)
    T = np.asarray(T, dtype=np.float64).reshape(3)
    Rinv = R.T
    return Rinv, -Rinv @ T


def project(p: Point3, intr: CameraIntrinsics) -> PixelSample:
    """Project a camera-frame point to sub-pixel (u, v); sample keeps its z."""
    z = np.asarray(p.z, dtype=np.float64)
    if np.any(z <= 0):
        raise ValidationError("project requires a point in front of the camera (z > 0)")
    u = intr.fx * np.asarray(p.x, dtype=np.float64) / z + intr.cx
    v = intr.fy * np.asarray(p.y, dtype=np.float64) / z + intr.cy
    return PixelSample(u, v, z.copy())


def depth_to_disparity(depth: DepthMap, baseline_m: float, focal_px: float) -> DisparityMap:
    """D = B * F / Z per valid pixel; invalid depth stays invalid."""
    if baseline_m <= 0 or focal_px <= 0:
        raise ValidationError("baseline and focal length must be > 0")
    valid = depth.valid
    out = np.zeros_like(depth.values, dtype=np.float32)
    np.divide(baseline_m * focal_px, depth.values, out=out, where=valid)
    return DisparityMap(out, valid)


def disparity_to_depth(disp: DisparityMap, baseline_m: float, focal_px: float) -> DepthMap:
    """Z = B * F / D per valid pixel; invalid (and zero) disparity -> invalid depth."""
    if baseline_m <= 0 or focal_px <= 0:
        raise ValidationError("baseline and focal length must be > 0")
    if (disp.values[disp.valid] < 0).any():
        raise ValidationError("negative disparities cannot be converted to depth")
    ok = disp.valid & (disp.values > 0)
    out = np.zeros_like(disp.values, dtype=np.float32)
    np.divide(baseline_m * focal_px, disp.values, out=out, where=ok)
    return DepthMap(out)


def upsample_depth_nearest(
    depth: DepthMap, intr: CameraIntrinsics, factor: int
) -> tuple[DepthMap, CameraIntrinsics]:
    """Nearest-neighbor upsample by an integer factor; intrinsics scale with it."""
    if int(factor) != factor or factor < 1:
        raise ValidationError("upsample factor must be an integer >= 1")
    factor = int(factor)
    if factor == 1:
        return depth.copy(), intr
    up = np.repeat(np.repeat(depth.values, factor, axis=0), factor, axis=1)
    return DepthMap(up), intr.scaled(factor)


def disparity_coordinate(z, baseline_m: float, intr: CameraIntrinsics):
    """Disparity coordinate of the (u, v, d) space: d = B * (fx + fy) / 2 / Z.

    Uses the averaged focal length; consumers must not substitute fx alone.
    """
    z = np.asarray(z, dtype=np.float64)
    if np.any(z <= 0):
        raise ValidationError("disparity coordinate requires z > 0")
    return baseline_m * 0.5 * (intr.fx + intr.fy) / z
