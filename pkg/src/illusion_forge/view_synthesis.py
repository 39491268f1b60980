"""Right-view synthesis from a left image and its (monocular) disparity.

Three stages: binary-search the disparity scale so a target fraction of
pixels stays in frame, forward-warp with max-disparity occlusion handling,
and diffusion-fill the remaining holes. The hole mask is always emitted so a
heavier inpainter can be substituted offline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .io_formats import DisparityMap, ValidationError


@dataclass(frozen=True)
class ScaleSearchConfig:
    target_valid_ratio: float = 0.9  # tau
    epsilon: float = 1e-6
    max_iterations: int = 64

    def __post_init__(self):
        if not 0 < self.target_valid_ratio <= 1:
            raise ValidationError("target_valid_ratio must be in (0, 1]")
        if self.epsilon <= 0 or self.max_iterations < 1:
            raise ValidationError("epsilon must be > 0 and max_iterations >= 1")


@dataclass
class WarpResult:
    image: np.ndarray            # (H, W, 3) uint8
    hole_mask: np.ndarray        # (H, W) bool, True where no source landed
    source_disparity: np.ndarray  # (H, W) float32, winning d where written


def valid_ratio(disp: DisparityMap, s: float) -> float:
    """Fraction of pixels whose shifted column u - s*d stays inside [0, W)."""
    w = disp.width
    u = np.arange(w, dtype=np.float64)[None, :]
    shifted = u - s * disp.values.astype(np.float64)
    return float(((shifted >= 0) & (shifted < w)).mean())


def search_scale(disp: DisparityMap, cfg: ScaleSearchConfig = ScaleSearchConfig()) -> float:
    """Binary-search the disparity scale on [0, W / (4 * max(d))].

    The lower bound moves up whenever the valid-pixel ratio stays >= the
    target, so the search converges to the largest scale that keeps the
    target fraction of pixels in frame (saturating at the bracket edge).
    """
    max_d = float(disp.values.max()) if disp.values.size else 0.0
    if max_d <= 0:
        raise ValidationError("scale search undefined: no positive disparities")
    lo, hi = 0.0, disp.width / (4.0 * max_d)
    for _ in range(cfg.max_iterations):
        if abs(hi - lo) <= cfg.epsilon:
            break
        s = 0.5 * (lo + hi)
        if valid_ratio(disp, s) >= cfg.target_valid_ratio:
            lo = s
        else:
            hi = s
    return 0.5 * (lo + hi)


def forward_warp(left: np.ndarray, disp: DisparityMap, s: float) -> WarpResult:
    """Push left pixels to u' = u - s*d, splatting to floor and ceil columns.

    At every target the writer with the largest disparity wins; exact ties go
    to the larger source column (the nearer occluder). Invalid disparities do
    not splat; untouched targets are holes.
    """
    left = np.asarray(left)
    if left.ndim != 3 or left.shape[2] != 3 or left.dtype != np.uint8:
        raise ValidationError("left image must be (H, W, 3) uint8")
    if left.shape[:2] != disp.values.shape:
        raise ValidationError("image and disparity dimensions differ")
    if not np.isfinite(s) or s < 0:
        raise ValidationError("scale must be finite and >= 0")

    h, w = disp.values.shape
    image = np.zeros_like(left)
    holes = np.ones((h, w), dtype=bool)
    source_disparity = np.zeros((h, w), dtype=np.float32)

    cols = np.arange(w, dtype=np.float64)
    for v in range(h):
        row_valid = disp.valid[v]
        if not row_valid.any():
            continue
        u = cols[row_valid]
        d = disp.values[v][row_valid].astype(np.float64)
        shifted = u - s * d
        targets = np.concatenate([np.floor(shifted), np.ceil(shifted)])
        src_u = np.concatenate([u, u])
        src_d = np.concatenate([d, d])
        inb = (targets >= 0) & (targets < w)
        if not inb.any():
            continue
        targets = targets[inb].astype(np.int64)
        src_u = src_u[inb].astype(np.int64)
        src_d = src_d[inb]
        # sort by (target, d, u); the last entry of each target run wins
        order = np.lexsort((src_u, src_d, targets))
        t_s, u_s, d_s = targets[order], src_u[order], src_d[order]
        last = np.r_[t_s[1:] != t_s[:-1], True]
        t_win, u_win, d_win = t_s[last], u_s[last], d_s[last]
        image[v, t_win] = left[v, u_win]
        holes[v, t_win] = False
        source_disparity[v, t_win] = d_win.astype(np.float32)

    return WarpResult(image=image, hole_mask=holes, source_disparity=source_disparity)


def diffusion_fill(
    values: np.ndarray,
    holes: np.ndarray,
    iterations: int = 64,
    tol: float = 1e-3,
) -> np.ndarray:
    """Fill holes by iterative 4-neighbor averaging of known pixels.

    Known pixels never change. Hole pixels update to the mean of their
    already-known/filled 4-neighbors each sweep until the cap or until the
    largest update falls below tol. Returns float64; hole pixels no sweep
    reached keep 0.
    """
    holes = np.asarray(holes, dtype=bool)
    values = np.asarray(values, dtype=np.float64)
    if values.shape[: holes.ndim] != holes.shape:
        raise ValidationError("values and hole mask dimensions differ")
    known = ~holes
    if not known.any():
        raise ValidationError("cannot fill: entire image is holes")
    work = values.copy()
    work[holes] = 0.0
    filled = known.copy()
    if not holes.any():
        return work

    chans = work if work.ndim == 3 else work[..., None]
    chans = chans.copy()
    for _ in range(iterations):
        fil = filled.astype(np.float64)
        weighted = chans * fil[..., None]
        nsum = np.zeros_like(chans)
        ncnt = np.zeros_like(fil)
        nsum[1:, :] += weighted[:-1, :]
        ncnt[1:, :] += fil[:-1, :]
        nsum[:-1, :] += weighted[1:, :]
        ncnt[:-1, :] += fil[1:, :]
        nsum[:, 1:] += weighted[:, :-1]
        ncnt[:, 1:] += fil[:, :-1]
        nsum[:, :-1] += weighted[:, 1:]
        ncnt[:, :-1] += fil[:, 1:]
        upd = holes & (ncnt > 0)
        if not upd.any():
            break
        new_vals = nsum[upd] / ncnt[upd][:, None]
        prev_known = upd & filled
        delta = 0.0
        if prev_known.any():
            delta = float(np.abs(chans[prev_known] - (nsum[prev_known] / ncnt[prev_known][:, None])).max())
        grew = bool((upd & ~filled).any())
        chans[upd] = new_vals
        filled |= upd
        if not grew and delta < tol:
            break

    out = chans[..., 0] if work.ndim == 2 else chans
    return out


def inpaint_holes(img: np.ndarray, holes: np.ndarray, iterations: int = 64) -> np.ndarray:
    """Diffusion-fill hole pixels of an 8-bit image; non-holes are untouched."""
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise ValidationError("inpaint_holes expects a uint8 image")
    holes = np.asarray(holes, dtype=bool)
    filled = diffusion_fill(img.astype(np.float64), holes, iterations=iterations)
    out = img.copy()
    out[holes] = np.clip(np.rint(filled[holes]), 0, 255).astype(np.uint8)
    return out
