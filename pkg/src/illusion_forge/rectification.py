"""Replace disparity inside illusion regions with the support-region plane.

The support region is assumed coplanar with the illusion's physical surface;
its (u, v, d) points define a plane that overwrites the illusion disparities.
A linear feather band outside the region boundary smooths the transition.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .io_formats import DisparityMap, RegionSet, ValidationError
from .plane_fit import PlaneFitResult, PlaneParams, RansacConfig, fit_plane_ransac, plane_disparity_at


@dataclass(frozen=True)
class RectifyConfig:
    ransac: RansacConfig = field(default_factory=RansacConfig)
    feather_px: float = 8.0
    min_support_points: int = 50

    def __post_init__(self):
        if self.feather_px < 0:
            raise ValidationError("feather_px must be >= 0")
        if self.min_support_points < 3:
            raise ValidationError("min_support_points must be >= 3")


def support_points(disp: DisparityMap, support_mask: np.ndarray) -> np.ndarray:
    """(u, v, d) rows for every valid disparity inside the support mask."""
    sel = support_mask & disp.valid
    v, u = np.nonzero(sel)
    return np.column_stack([u, v, disp.values[sel]]).astype(np.float64)


def fit_support_plane(
    disp: DisparityMap,
    support_mask: np.ndarray,
    cfg: RectifyConfig = RectifyConfig(),
) -> PlaneFitResult:
    """RANSAC plane over the support region's valid pixels.

    Degenerate inputs (too few points, collinear samples, disparity-parallel
    plane) all surface as a "degenerate support region" error so CLI and
    service report them uniformly.
    """
    pts = support_points(disp, support_mask)
    if pts.shape[0] < cfg.min_support_points:
        raise ValidationError(
            f"degenerate support region: {pts.shape[0]} valid points "
            f"(need >= {cfg.min_support_points})"
        )
    try:
        return fit_plane_ransac(pts, cfg.ransac)
    except ValidationError as exc:
        raise ValidationError(f"degenerate support region: {exc}") from exc


def rectify_region(
    disp: DisparityMap,
    regions: RegionSet,
    pair_index: int,
    cfg: RectifyConfig = RectifyConfig(),
) -> tuple[DisparityMap, PlaneFitResult]:
    """Fit the pair's support plane and overwrite its illusion region."""
    if regions.labels.shape != disp.values.shape:
        raise ValidationError("region labels and disparity dimensions differ")
    if not 0 <= pair_index < len(regions.pairs):
        raise ValidationError(f"pair index {pair_index} out of range")
    illusion_id, support_id = regions.pairs[pair_index]
    fit = fit_support_plane(disp, regions.mask(support_id), cfg)
    illusion_mask = regions.mask(illusion_id)
    if not illusion_mask.any():
        return disp.copy(), fit
    out = apply_plane_rectification(
        disp, fit.plane, illusion_mask, cfg.feather_px, cfg.ransac.min_delta
    )
    return out, fit


def apply_plane_rectification(
    disp: DisparityMap,
    plane: PlaneParams,
    illusion_mask: np.ndarray,
    feather_px: float = 8.0,
    min_delta: float = 1e-6,
) -> DisparityMap:
    """Write plane disparities over the illusion mask, feathering the boundary.

    Invalid pixels inside the illusion still receive the plane value (the
    plane is the only evidence there). Raises if the plane evaluates negative
    anywhere it is consumed, since disparities must stay >= 0.
    """
    illusion_mask = np.asarray(illusion_mask, dtype=bool)
    if illusion_mask.shape != disp.values.shape:
        raise ValidationError("illusion mask and disparity dimensions differ")
    vv, uu = np.mgrid[0 : disp.height, 0 : disp.width]
    plane_values = plane_disparity_at(plane, uu, vv, min_delta).astype(np.float32)
    if illusion_mask.any():
        consumed = illusion_mask
        if feather_px > 0:
            edt = ndimage.distance_transform_edt(~illusion_mask)
            consumed = consumed | (edt <= feather_px + 1.0)
        if (plane_values[consumed] < 0).any():
            raise ValidationError(
                "support plane yields negative disparity inside the rectified area"
            )
    return feather_boundary(disp, plane_values, illusion_mask, feather_px)


def feather_boundary(
    original: DisparityMap,
    rectified,
    illusion_mask: np.ndarray,
    feather_px: float,
) -> DisparityMap:
    """Blend the plane surface into the original over a band outside the region.

    `rectified` is the replacement surface (a DisparityMap or a plain array,
    e.g. the support plane evaluated over the full grid). Inside the illusion
    mask the output is the surface exactly. In a band of width feather_px
    outside the boundary, output = w * rectified + (1 - w) * original with
    w = 1 - dist/feather_px, where the pixel ring adjacent to the region sits
    at dist 0. Farther pixels are bit-identical to the input. Band pixels with
    invalid originals stay invalid.
    """
    surface = np.asarray(getattr(rectified, "values", rectified), dtype=np.float64)
    if original.values.shape != surface.shape:
        raise ValidationError("original and rectified dimensions differ")
    illusion_mask = np.asarray(illusion_mask, dtype=bool)
    if illusion_mask.shape != original.values.shape:
        raise ValidationError("illusion mask dimensions differ")
    if feather_px < 0:
        raise ValidationError("feather_px must be >= 0")

    values = original.values.astype(np.float64).copy()
    valid = original.valid.copy()
    if illusion_mask.any():
        values[illusion_mask] = surface[illusion_mask]
        valid |= illusion_mask
        if feather_px > 0:
            edt = ndimage.distance_transform_edt(~illusion_mask)
            w = 1.0 - (edt - 1.0) / float(feather_px)
            np.clip(w, 0.0, 1.0, out=w)
            band = (~illusion_mask) & (w > 0) & original.valid
            values[band] = (
                w[band] * surface[band]
                + (1.0 - w[band]) * original.values.astype(np.float64)[band]
            )
    return DisparityMap(values.astype(np.float32), valid)
