"""Disparity-space and depth-space evaluation with region masking.

Error metrics follow the usual stereo benchmark definitions: EPE (mean
absolute error), bad-x (percentage with error strictly above x), RMSE, and in
depth space AbsRel, log10, and the delta_1 threshold accuracy. Invalid
ground-truth pixels are excluded everywhere; invalid predictions are scored
at their stored sentinel value 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .io_formats import ValidationError

DEFAULT_THRESHOLDS = (2.0, 3.0, 5.0)


@dataclass
class MetricReport:
    space: str
    epe: float
    bad: dict
    rmse: float
    pixel_count: int
    abs_rel: float | None = None
    log10: float | None = None
    delta1: float | None = None
    excluded_count: int = 0

    def to_json_dict(self) -> dict:
        out = {
            "space": self.space,
            "epe": self.epe,
            "bad": {f"{k:g}": v for k, v in self.bad.items()},
            "rmse": self.rmse,
            "abs_rel": self.abs_rel,
            "log10": self.log10,
            "delta1": self.delta1,
            "pixels": self.pixel_count,
            "excluded": self.excluded_count,
        }
        return out


def evaluate(
    pred,
    gt,
    mask: np.ndarray | None = None,
    space: str = "disparity",
    thresholds=DEFAULT_THRESHOLDS,
) -> MetricReport:
    """Score pred against gt over valid-gt pixels (optionally region-masked)."""
    if space not in ("disparity", "depth"):
        raise ValidationError(f"unknown metric space {space!r}")
    if pred.values.shape != gt.values.shape:
        raise ValidationError("pred and gt dimensions differ")
    sel = gt.valid.copy()
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != gt.values.shape:
            raise ValidationError("mask dimensions differ")
        sel &= mask
    count = int(sel.sum())
    if count == 0:
        raise ValidationError("no valid masked ground-truth pixels")

    r = pred.values[sel].astype(np.float64)
    rb = gt.values[sel].astype(np.float64)
    err = np.abs(r - rb)
    epe = float(err.mean())
    bad = {float(x): float(100.0 * (err > x).mean()) for x in thresholds}
    rmse = float(np.sqrt((err**2).mean()))

    report = MetricReport(space=space, epe=epe, bad=bad, rmse=rmse, pixel_count=count)
    if space == "depth":
        pos_gt = rb > 0
        report.abs_rel = float((err[pos_gt] / rb[pos_gt]).mean()) if pos_gt.any() else None
        both = pos_gt & (r > 0)
        report.excluded_count = count - int(both.sum())
        if both.any():
            report.log10 = float(np.abs(np.log10(r[both]) - np.log10(rb[both])).mean())
            ratio = np.maximum(r[both] / rb[both], rb[both] / r[both])
            report.delta1 = float(100.0 * (ratio < 1.25).mean())
        else:
            raise ValidationError("no positive pred/gt pairs for ratio metrics")
    return report
