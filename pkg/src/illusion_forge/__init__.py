"""Stereo/depth data-generation and evaluation toolkit.

Library surface: plane fitting in disparity space, illusion-region
rectification, right-view synthesis, LiDAR-to-stereo reprojection,
monocular-to-metric alignment and fusion, loss evaluators, and the metric
suite. The CLI (`illusion-forge`) and the annotation HTTP service compose
these into the data pipelines.
"""

__version__ = "0.1.0"

from .camera_model import (
    PixelSample,
    Point3,
    depth_to_disparity,
    disparity_to_depth,
    project,
    transform,
    unproject,
    upsample_depth_nearest,
)
from .fusion_align import (
    AffineParams,
    ConfidenceMap,
    LossConfig,
    align_affine,
    confidence_gt,
    disparity_sequence_loss,
    focal_confidence_loss,
    fuse,
)
from .io_formats import (
    CalibrationRig,
    CameraIntrinsics,
    DepthMap,
    DisparityMap,
    FormatError,
    RegionSet,
    ValidationError,
    read_calibration,
    read_image_rgb,
    read_pfm,
    read_pfm_depth,
    read_png16_disparity,
    read_regions,
    write_calibration,
    write_image_rgb,
    write_pfm,
    write_png16_disparity,
    write_regions,
)
from .metrics import MetricReport, evaluate
from .plane_fit import (
    PlaneFitResult,
    PlaneParams,
    RansacConfig,
    fit_plane_ransac,
    plane_disparity_at,
    point_plane_distance,
    refine_plane_eigen,
)
from .rectification import (
    RectifyConfig,
    apply_plane_rectification,
    feather_boundary,
    fit_support_plane,
    rectify_region,
)
from .reprojection import (
    ReprojectConfig,
    backward_validate,
    fill_holes,
    guided_filter,
    reproject_depth,
    suppress_noise,
    zbuffer_splat,
)
from .view_synthesis import (
    ScaleSearchConfig,
    WarpResult,
    diffusion_fill,
    forward_warp,
    inpaint_holes,
    search_scale,
)
