"""Affine alignment of monocular to metric disparity, confidence-gated
fusion, confidence ground truth, and the loss evaluators.

Monocular disparity is affine-invariant (unknown scale and shift); the
weighted least-squares fit here recovers (s, t) against a metric stereo map,
optionally weighted by a confidence map. Fusion is the convex per-pixel blend
gated by that confidence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .io_formats import DisparityMap, ValidationError


@dataclass(frozen=True)
class AffineParams:
    scale: float
    shift: float

    def __post_init__(self):
        if not (np.isfinite(self.scale) and np.isfinite(self.shift)):
            raise ValidationError("affine parameters must be finite")


@dataclass
class ConfidenceMap:
    """Per-pixel confidence in [0, 1] with an optional validity mask."""

    values: np.ndarray
    valid: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValidationError("confidence values must be a 2-D array")
        if self.valid is None:
            self.valid = np.ones(self.values.shape, dtype=bool)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.valid.shape != self.values.shape:
            raise ValidationError("confidence mask shape does not match values")
        vals = self.values[self.valid]
        if vals.size and (vals.min() < 0 or vals.max() > 1):
            raise ValidationError("confidence values must lie in [0, 1]")


@dataclass(frozen=True)
class LossConfig:
    gamma_d: float = 0.9   # per-update weighting of the disparity sequence loss
    w: float = 1.0         # confidence-loss weight in the combined loss
    alpha_c: float = 1.0   # focal loss scale
    gamma_c: float = 2.0   # focal loss focusing exponent

    def __post_init__(self):
        if not 0 < self.gamma_d <= 1:
            raise ValidationError("gamma_d must be in (0, 1]")


def align_affine(
    mono: DisparityMap,
    stereo: DisparityMap,
    weights=None,
) -> tuple[AffineParams, DisparityMap]:
    """Closed-form weighted least squares for s*mono + t ~= stereo.

    `weights` may be None (uniform), a ConfidenceMap, or a plain array; only
    jointly-valid pixels with positive weight enter the normal equations. The
    returned map applies (s, t) to every valid mono pixel, clamped at 0 so the
    disparity invariant holds.
    """
    if mono.values.shape != stereo.values.shape:
        raise ValidationError("mono and stereo dimensions differ")
    joint = mono.valid & stereo.valid
    if weights is None:
        w = np.ones(mono.values.shape, dtype=np.float64)
    elif isinstance(weights, ConfidenceMap):
        w = np.where(weights.valid, weights.values, 0.0)
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != mono.values.shape:
            raise ValidationError("weights shape does not match maps")
        if w.min() < 0:
            raise ValidationError("weights must be >= 0")
    joint &= w > 0
    if joint.sum() < 2:
        raise ValidationError("need at least 2 jointly-valid weighted pixels")

    m = mono.values[joint].astype(np.float64)
    s_t = stereo.values[joint].astype(np.float64)
    sw = np.sqrt(w[joint])
    design = np.column_stack([m * sw, sw])
    coef, _, rank, _ = np.linalg.lstsq(design, s_t * sw, rcond=None)
    if rank < 2:
        raise ValidationError("mono values are constant; affine fit is rank-deficient")
    scale, shift = float(coef[0]), float(coef[1])

    aligned = scale * mono.values.astype(np.float64) + shift
    aligned = np.where(mono.valid, np.maximum(aligned, 0.0), 0.0)
    return AffineParams(scale, shift), DisparityMap(aligned.astype(np.float32), mono.valid.copy())


def fuse(stereo: DisparityMap, aligned_mono: DisparityMap, conf) -> DisparityMap:
    """Per-pixel convex blend: conf * stereo + (1 - conf) * mono.

    Where exactly one input is valid that one passes through; both invalid
    stays invalid.
    """
    if stereo.values.shape != aligned_mono.values.shape:
        raise ValidationError("stereo and mono dimensions differ")
    c = conf.values if isinstance(conf, ConfidenceMap) else np.asarray(conf, dtype=np.float64)
    if c.shape != stereo.values.shape:
        raise ValidationError("confidence dimensions differ")
    if c.min() < 0 or c.max() > 1:
        raise ValidationError("confidence values must lie in [0, 1]")

    both = stereo.valid & aligned_mono.valid
    out = np.zeros(stereo.values.shape, dtype=np.float64)
    out[both] = c[both] * stereo.values[both] + (1.0 - c[both]) * aligned_mono.values[both]
    only_s = stereo.valid & ~aligned_mono.valid
    out[only_s] = stereo.values[only_s]
    only_m = aligned_mono.valid & ~stereo.valid
    out[only_m] = aligned_mono.values[only_m]
    return DisparityMap(out.astype(np.float32), stereo.valid | aligned_mono.valid)


def confidence_gt(pred: DisparityMap, gt: DisparityMap) -> ConfidenceMap:
    """Binary confidence target at quarter resolution.

    A 4x4 block is confident (1) when the mean absolute disparity error over
    its valid-gt pixels is < 5/4, else 0; blocks with no valid gt are invalid.
    """
    if pred.values.shape != gt.values.shape:
        raise ValidationError("pred and gt dimensions differ")
    h, w = gt.values.shape
    if h % 4 or w % 4:
        raise ValidationError("dimensions must be divisible by 4")
    err = np.abs(gt.values.astype(np.float64) - pred.values.astype(np.float64))
    err = np.where(gt.valid, err, 0.0)
    mask = gt.valid.astype(np.float64)
    blocks_err = err.reshape(h // 4, 4, w // 4, 4).sum(axis=(1, 3))
    blocks_cnt = mask.reshape(h // 4, 4, w // 4, 4).sum(axis=(1, 3))
    valid = blocks_cnt > 0
    mean_err = np.zeros_like(blocks_err)
    np.divide(blocks_err, blocks_cnt, out=mean_err, where=valid)
    values = np.where(valid & (mean_err < 5.0 / 4.0), 1.0, 0.0)
    return ConfidenceMap(values, valid)


_CONF_CLAMP = 1e-7


def focal_confidence_loss(pred_conf, gt_conf: ConfidenceMap, cfg: LossConfig = LossConfig()) -> float:
    """Focal-weighted binary cross entropy between predicted and target confidence."""
    p = pred_conf.values if isinstance(pred_conf, ConfidenceMap) else np.asarray(pred_conf, dtype=np.float64)
    if p.shape != gt_conf.values.shape:
        raise ValidationError("pred and gt confidence dimensions differ")
    mask = gt_conf.valid
    if isinstance(pred_conf, ConfidenceMap):
        mask = mask & pred_conf.valid
    if not mask.any():
        raise ValidationError("no valid confidence pixels to score")
    pc = np.clip(p[mask], _CONF_CLAMP, 1.0 - _CONF_CLAMP)
    g = gt_conf.values[mask]
    lb = -g * np.log(pc) - (1.0 - g) * np.log(1.0 - pc)
    focal = cfg.alpha_c * np.power(1.0 - np.exp(-lb), cfg.gamma_c) * lb
    return float(focal.mean())


def _masked_l1(pred: DisparityMap, gt: DisparityMap, mask: np.ndarray) -> float:
    diff = np.abs(pred.values.astype(np.float64) - gt.values.astype(np.float64))
    return float(diff[mask].mean())


def disparity_sequence_loss(
    updates: list[DisparityMap],
    aligned_mono: DisparityMap,
    final: DisparityMap,
    gt: DisparityMap,
    cfg: LossConfig = LossConfig(),
) -> float:
    """Weighted L1 sequence loss over iterative updates, aligned mono, and final.

    sum_t gamma^(T+2-t) * L1(update_t) + gamma * L1(aligned) + L1(final),
    with every L1 a mean over valid-gt pixels. An empty update list keeps only
    the last two terms.
    """
    mask = gt.valid
    if not mask.any():
        raise ValidationError("ground truth has no valid pixels")
    for m in list(updates) + [aligned_mono, final]:
        if m.values.shape != gt.values.shape:
            raise ValidationError("all maps must share the ground-truth dimensions")
    total = 0.0
    t_count = len(updates)
    for t, upd in enumerate(updates, start=1):
        total += cfg.gamma_d ** (t_count + 2 - t) * _masked_l1(upd, gt, mask)
    total += cfg.gamma_d * _masked_l1(aligned_mono, gt, mask)
    total += _masked_l1(final, gt, mask)
    return float(total)
