import numpy as np
import pytest

from illusion_forge import (
    CalibrationRig,
    CameraIntrinsics,
    DisparityMap,
    RegionSet,
)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def make_disparity(values, valid=None) -> DisparityMap:
    arr = np.asarray(values, dtype=np.float32)
    if valid is None:
        return DisparityMap.from_values(arr)
    return DisparityMap(arr, np.asarray(valid, dtype=bool))


def identity_rig(width=64, height=48, fx=50.0, fy=50.0, baseline=0.12, focal=50.0,
                 lidar_width=None, lidar_height=None, lidar_fx=None, lidar_fy=None,
                 R=None, T=None) -> CalibrationRig:
    left = CameraIntrinsics(fx=fx, fy=fy, cx=width / 2.0, cy=height / 2.0,
                            width=width, height=height)
    lw = lidar_width or width
    lh = lidar_height or height
    lidar = CameraIntrinsics(
        fx=lidar_fx or fx, fy=lidar_fy or fy, cx=lw / 2.0, cy=lh / 2.0,
        width=lw, height=lh,
    )
    return CalibrationRig(
        left_intrinsics=left,
        lidar_intrinsics=lidar,
        R=np.eye(3) if R is None else R,
        T=np.zeros(3) if T is None else T,
        baseline_m=baseline,
        focal_px=focal,
    )


def ring_region_set(height=32, width=32, inner=8, outer=12) -> RegionSet:
    """Illusion square (id 1) surrounded by a support ring (id 2)."""
    labels = np.zeros((height, width), dtype=np.uint8)
    cy, cx = height // 2, width // 2
    labels[cy - outer : cy + outer, cx - outer : cx + outer] = 2
    labels[cy - inner : cy + inner, cx - inner : cx + inner] = 1
    return RegionSet(labels, [(1, 2)])
