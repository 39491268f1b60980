"""Command-line entry points composing the library into the data pipelines.

Exit codes: 0 success, 1 processing error (bad data, degenerate geometry,
I/O failure), 2 usage error. All file outputs are written atomically.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .fusion_align import align_affine, confidence_gt, fuse
from .io_formats import (
    DisparityMap,
    FormatError,
    ValidationError,
    read_calibration,
    read_image_rgb,
    read_pfm,
    read_pfm_depth,
    read_png16_disparity,
    read_regions,
    write_image_rgb,
    write_pfm,
    write_png16_disparity,
    _atomic_write_bytes,
    _encode_png,
)
from .metrics import evaluate
from .parallel import parallel_map
from .plane_fit import RansacConfig
from .rectification import RectifyConfig, apply_plane_rectification, fit_support_plane
from .reprojection import ReprojectConfig, reproject_depth
from .view_synthesis import ScaleSearchConfig, forward_warp, inpaint_holes, search_scale


def _load_disparity(path) -> DisparityMap:
    path = str(path)
    if path.endswith(".pfm"):
        return read_pfm(path)
    if path.endswith(".png"):
        return read_png16_disparity(path)
    raise FormatError(f"unsupported disparity format: {path} (use .pfm or .png)")


def _save_disparity(disp: DisparityMap, path) -> None:
    path = str(path)
    if path.endswith(".pfm"):
        write_pfm(disp, path)
    elif path.endswith(".png"):
        write_png16_disparity(disp, path)
    else:
        raise FormatError(f"unsupported disparity format: {path} (use .pfm or .png)")


def _load_confidence(path, shape) -> np.ndarray:
    path = str(path)
    if path.endswith(".pfm"):
        conf = read_pfm(path).values.astype(np.float64)
    else:
        from PIL import Image

        with Image.open(path) as img:
            conf = np.asarray(img.convert("L"), dtype=np.float64) / 255.0
    if conf.shape != shape:
        raise ValidationError("confidence dimensions do not match the disparity maps")
    return conf


def _emit(obj) -> None:
    print(json.dumps(obj))


def _ransac_config(args) -> RansacConfig:
    return RansacConfig(
        inlier_threshold=args.tau_d,
        batch_size=args.batch,
        max_iterations=args.iters,
        seed=args.seed,
        min_delta=args.min_delta,
    )


def _plane_json(fit) -> dict:
    out = fit.plane.to_dict()
    out["inliers"] = fit.inlier_count
    out["rms"] = fit.rms_residual
    return out


def _add_ransac_flags(p) -> None:
    p.add_argument("--tau-d", type=float, default=1.0, help="RANSAC inlier threshold (px)")
    p.add_argument("--iters", type=int, default=100, help="RANSAC iterations")
    p.add_argument("--batch", type=int, default=64, help="candidate triples per iteration")
    p.add_argument("--seed", type=int, default=0, help="RNG seed")
    p.add_argument("--min-delta", type=float, default=1e-6,
                   help="reject planes with |delta| below this")
    p.add_argument("--min-support", type=int, default=50, help="minimum valid support pixels")


def cmd_fit_plane(args) -> int:
    disp = _load_disparity(args.disparity)
    regions = read_regions(args.mask, args.pairs)
    if regions.labels.shape != disp.values.shape:
        raise ValidationError("region labels and disparity dimensions differ")
    _, support_id = regions.pairs[args.pair_index]
    cfg = RectifyConfig(ransac=_ransac_config(args), min_support_points=args.min_support)
    fit = fit_support_plane(disp, regions.mask(support_id), cfg)
    payload = _plane_json(fit)
    if args.out:
        _atomic_write_bytes(args.out, (json.dumps(payload, indent=2) + "\n").encode())
    _emit(payload)
    return 0


def cmd_rectify(args) -> int:
    disp = _load_disparity(args.disparity)
    regions = read_regions(args.mask, args.pairs)
    if regions.labels.shape != disp.values.shape:
        raise ValidationError("region labels and disparity dimensions differ")
    cfg = RectifyConfig(
        ransac=_ransac_config(args),
        feather_px=args.feather,
        min_support_points=args.min_support,
    )
    indices = list(range(len(regions.pairs))) if args.all_pairs else [args.pair_index]

    # pairs are independent: fit every support plane from the input map in
    # parallel (ILLUSION_FORGE_THREADS caps the pool), apply in pair order
    def fit_pair(idx):
        _, support_id = regions.pairs[idx]
        return fit_support_plane(disp, regions.mask(support_id), cfg)

    fits = parallel_map(fit_pair, indices)
    out = disp
    for idx, fit in zip(indices, fits):
        illusion_id, _ = regions.pairs[idx]
        illusion_mask = regions.mask(illusion_id)
        if illusion_mask.any():
            out = apply_plane_rectification(
                out, fit.plane, illusion_mask, cfg.feather_px, cfg.ransac.min_delta
            )
    _save_disparity(out, args.out)
    _emit({
        "out": str(args.out),
        "pairs": [{"pair": i, **_plane_json(f)} for i, f in zip(indices, fits)],
    })
    return 0


def cmd_synth_right(args) -> int:
    left = read_image_rgb(args.left)
    disp = _load_disparity(args.disparity)
    if args.scale is not None:
        scale = args.scale
    else:
        scale = search_scale(disp, ScaleSearchConfig(
            target_valid_ratio=args.tau, epsilon=args.epsilon,
            max_iterations=args.max_iters))
    warp = forward_warp(left, disp, scale)
    image = warp.image
    if not args.no_inpaint and warp.hole_mask.any() and not warp.hole_mask.all():
        image = inpaint_holes(image, warp.hole_mask, iterations=args.inpaint_iters)
    write_image_rgb(image, args.out_right)
    holes_png = (warp.hole_mask.astype(np.uint8)) * 255
    from PIL import Image

    _atomic_write_bytes(args.out_holes, _encode_png(Image.fromarray(holes_png, mode="L")))
    _emit({"scale": scale})
    return 0


def cmd_reproject(args) -> int:
    lidar = read_pfm_depth(args.lidar_depth)
    guide = read_image_rgb(args.guide)
    rig = read_calibration(args.calib)
    cfg = ReprojectConfig(
        upsample_factor=args.upsample,
        small_area_th=args.area_th,
        guided_radius=args.radius,
        guided_eps=args.eps,
        backward_tau=args.tau,
        noise_tau=args.noise_tau,
        median_size=args.median,
    )
    disp = reproject_depth(lidar, guide, rig, cfg)
    _save_disparity(disp, args.out)
    _emit({"out": str(args.out), "valid_ratio": float(disp.valid.mean())})
    return 0


def cmd_fuse(args) -> int:
    stereo = _load_disparity(args.stereo)
    mono = _load_disparity(args.mono)
    conf = _load_confidence(args.confidence, stereo.values.shape)
    if args.no_align:
        aligned = mono
        params = None
    else:
        params, aligned = align_affine(mono, stereo, weights=conf)
    fused = fuse(stereo, aligned, conf)
    _save_disparity(fused, args.out)
    payload = {"out": str(args.out)}
    if params is not None:
        payload["scale"] = params.scale
        payload["shift"] = params.shift
    _emit(payload)
    return 0


def cmd_confidence_gt(args) -> int:
    pred = _load_disparity(args.pred)
    gt = _load_disparity(args.gt)
    conf = confidence_gt(pred, gt)
    stored = np.where(conf.valid & (conf.values > 0.5), 255, 0).astype(np.uint8)
    from PIL import Image

    _atomic_write_bytes(args.out, _encode_png(Image.fromarray(stored, mode="L")))
    _emit({
        "out": str(args.out),
        "confident_ratio": float(conf.values[conf.valid].mean()) if conf.valid.any() else 0.0,
        "valid_blocks": int(conf.valid.sum()),
    })
    return 0


def cmd_eval(args) -> int:
    space = args.space
    if space == "depth":
        pred = read_pfm_depth(args.pred)
        gt = read_pfm_depth(args.gt)
    else:
        pred = _load_disparity(args.pred)
        gt = _load_disparity(args.gt)
    mask = None
    if args.labels:
        from .io_formats import read_mask_png

        labels = read_mask_png(args.labels)
        if args.region_ids:
            ids = [int(x) for x in args.region_ids.split(",")]
            mask = np.isin(labels, ids)
        else:
            mask = labels > 0
    thresholds = [float(x) for x in args.thresholds.split(",")]
    report = evaluate(pred, gt, mask=mask, space=space, thresholds=thresholds)
    payload = report.to_json_dict()
    if args.out:
        _atomic_write_bytes(args.out, (json.dumps(payload, indent=2) + "\n").encode())
    _emit(payload)
    return 0


def cmd_serve(args) -> int:
    from .service import run_server

    run_server(args.data_dir, host=args.host, port=args.port, ui_dir=args.ui_dir)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="illusion-forge",
        description="Stereo/depth data generation and evaluation toolkit",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-plane", help="fit a support-region plane in disparity space")
    p.add_argument("--disparity", required=True)
    p.add_argument("--mask", required=True, help="8-bit region labels PNG")
    p.add_argument("--pairs", required=True, help="JSON list of {illusion, support} pairs")
    p.add_argument("--pair-index", type=int, default=0)
    _add_ransac_flags(p)
    p.add_argument("--out", help="write the plane JSON here as well")
    p.set_defaults(func=cmd_fit_plane)

    p = sub.add_parser("rectify", help="replace illusion-region disparity with the support plane")
    p.add_argument("--disparity", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--pair-index", type=int, default=0)
    p.add_argument("--all-pairs", action="store_true")
    p.add_argument("--feather", type=float, default=8.0)
    _add_ransac_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rectify)

    p = sub.add_parser("synth-right", help="forward-warp a right view from left + disparity")
    p.add_argument("--left", required=True)
    p.add_argument("--disparity", required=True)
    p.add_argument("--scale", type=float, default=None, help="skip the scale search")
    p.add_argument("--tau", type=float, default=0.9, help="target valid-pixel ratio")
    p.add_argument("--epsilon", type=float, default=1e-6, help="search convergence width")
    p.add_argument("--max-iters", type=int, default=64)
    p.add_argument("--inpaint-iters", type=int, default=64)
    p.add_argument("--no-inpaint", action="store_true")
    p.add_argument("--out-right", required=True)
    p.add_argument("--out-holes", required=True)
    p.set_defaults(func=cmd_synth_right)

    p = sub.add_parser("reproject", help="lidar depth -> stereo-left disparity ground truth")
    p.add_argument("--lidar-depth", required=True)
    p.add_argument("--guide", required=True, help="stereo-left RGB image")
    p.add_argument("--calib", required=True)
    p.add_argument("--tau", type=float, default=0.05, help="backward validation threshold (m)")
    p.add_argument("--upsample", type=int, default=3)
    p.add_argument("--area-th", type=int, default=100)
    p.add_argument("--radius", type=int, default=5)
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--noise-tau", type=float, default=0.03)
    p.add_argument("--median", type=int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reproject)

    p = sub.add_parser("fuse", help="confidence-gated fusion of stereo and aligned mono")
    p.add_argument("--stereo", required=True)
    p.add_argument("--mono", required=True)
    p.add_argument("--confidence", required=True, help="8-bit PNG (/255) or PFM in [0,1]")
    p.add_argument("--no-align", action="store_true", help="skip the affine alignment")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("confidence-gt", help="binary confidence target at quarter resolution")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_confidence_gt)

    p = sub.add_parser("eval", help="disparity/depth metric report")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--space", choices=("disparity", "depth"), default="disparity")
    p.add_argument("--labels", help="restrict to labeled regions")
    p.add_argument("--region-ids", help="comma-separated ids within --labels")
    p.add_argument("--thresholds", default="2,3,5")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the annotation HTTP service")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--ui-dir", help="serve this static directory at /")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError, KeyError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
