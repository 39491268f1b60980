"""HTTP service backing the interactive region-annotation UI.

Data directory layout: one subdirectory per frame holding `left.png` and
`disp.pfm` (annotations `labels.png` / `pairs.json` and `rectified.pfm`
appear after export). Every fit/rectify request is stateless over those
stored artifacts, so a service fit is bit-identical to the CLI run on the
same inputs and seed.

Endpoints (JSON unless noted):
  GET  /api/frames                      -> list of frame ids
  GET  /api/frame/{id}/image            -> PNG
  GET  /api/frame/{id}/disparity        -> color-mapped PNG (+X-Value-Min/Max);
                                           ?raw=1 -> PFM bytes
  POST /api/frame/{id}/fit              -> {plane, inlier_ratio, rms, preview_id, ...}
  GET  /api/preview/{preview_id}        -> PNG (+X-Value-Min/Max)
  POST /api/frame/{id}/export           -> {written, unchanged}
"""

from __future__ import annotations

import hashlib
import json
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

import numpy as np
from PIL import Image

from .io_formats import (
    DisparityMap,
    FormatError,
    RegionSet,
    ValidationError,
    _encode_png,
    read_pfm,
    write_pfm,
    write_regions,
)
from .plane_fit import RansacConfig
from .rectification import RectifyConfig, apply_plane_rectification, fit_support_plane

ILLUSION_ID = 1
SUPPORT_ID = 2


@dataclass
class FrameRecord:
    id: str
    root: Path
    left_image: Path
    disparity: Path
    derived: dict = field(default_factory=dict)

    @classmethod
    def scan(cls, root: Path):
        left = root / "left.png"
        disp = root / "disp.pfm"
        if not (left.is_file() and disp.is_file()):
            return None
        rec = cls(id=root.name, root=root, left_image=left, disparity=disp)
        for name in ("labels.png", "pairs.json", "rectified.pfm"):
            if (root / name).is_file():
                rec.derived[name] = root / name
        return rec


def scan_frames(data_dir) -> dict:
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise ValidationError(f"data directory not found: {data_dir}")
    frames = {}
    for child in sorted(data_dir.iterdir()):
        if child.is_dir():
            rec = FrameRecord.scan(child)
            if rec is not None:
                frames[rec.id] = rec
    return frames


def rasterize_polygon(vertices, width: int, height: int) -> np.ndarray:
    """Even-odd rasterization of a closed polygon, tested at pixel centers."""
    verts = np.asarray(vertices, dtype=np.float64)
    if verts.ndim != 2 or verts.shape[1] != 2 or verts.shape[0] < 3:
        raise ValidationError("polygons need at least 3 [x, y] vertices")
    xs, ys = np.meshgrid(np.arange(width, dtype=np.float64),
                         np.arange(height, dtype=np.float64))
    inside = np.zeros((height, width), dtype=bool)
    n = verts.shape[0]
    for i in range(n):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % n]
        if y1 == y2:
            continue
        crosses = (y1 > ys) != (y2 > ys)
        with np.errstate(invalid="ignore"):
            xint = (x2 - x1) * (ys - y1) / (y2 - y1) + x1
        inside ^= crosses & (xs < xint)
    return inside


# turbo-like color ramp anchors (position-uniform, RGB 0..255)
_RAMP = np.array([
    [48, 18, 59], [65, 69, 171], [70, 117, 237], [57, 162, 252],
    [27, 207, 212], [36, 235, 169], [97, 252, 108], [164, 252, 59],
    [222, 220, 55], [251, 185, 56], [254, 140, 43], [239, 90, 17],
    [204, 50, 3], [153, 20, 2], [104, 5, 1], [122, 4, 3],
], dtype=np.float64)


def colormap_png(values: np.ndarray, valid: np.ndarray, vmin: float, vmax: float) -> bytes:
    """8-bit color-mapped PNG; invalid pixels render black."""
    values = np.asarray(values, dtype=np.float64)
    span = max(vmax - vmin, 1e-12)
    t = np.clip((values - vmin) / span, 0.0, 1.0) * (len(_RAMP) - 1)
    i0 = np.floor(t).astype(int)
    i1 = np.minimum(i0 + 1, len(_RAMP) - 1)
    frac = (t - i0)[..., None]
    rgb = _RAMP[i0] * (1 - frac) + _RAMP[i1] * frac
    rgb[~valid] = 0
    return _encode_png(Image.fromarray(rgb.astype(np.uint8), mode="RGB"))


class AnnotationService:
    """Stateless compute over the frame store, plus an in-memory preview cache."""

    def __init__(self, data_dir, preview_cap: int = 128):
        self.data_dir = Path(data_dir)
        self.frames = scan_frames(data_dir)
        self._previews: "OrderedDict[str, tuple[bytes, float, float]]" = OrderedDict()
        self._preview_lock = threading.Lock()
        self._preview_cap = preview_cap
        self._export_locks: dict = {}
        self._export_guard = threading.Lock()

    # -- frame accessors ---------------------------------------------------

    def frame(self, frame_id: str) -> FrameRecord:
        try:
            return self.frames[frame_id]
        except KeyError:
            raise LookupError(f"unknown frame {frame_id!r}") from None

    def list_frames(self) -> list:
        return sorted(self.frames)

    def frame_image(self, frame_id: str) -> bytes:
        return self.frame(frame_id).left_image.read_bytes()

    def frame_disparity_raw(self, frame_id: str) -> bytes:
        return self.frame(frame_id).disparity.read_bytes()

    def frame_disparity_png(self, frame_id: str) -> tuple[bytes, float, float]:
        disp = read_pfm(self.frame(frame_id).disparity)
        vmin, vmax = _value_range(disp)
        return colormap_png(disp.values, disp.valid, vmin, vmax), vmin, vmax

    # -- fit / preview -----------------------------------------------------

    def fit(self, frame_id: str, payload: dict) -> dict:
        frame = self.frame(frame_id)
        disp = read_pfm(frame.disparity)
        labels, regions, cfg = _annotation_inputs(disp, payload)
        fit = fit_support_plane(disp, labels == SUPPORT_ID, cfg)
        rectified = apply_plane_rectification(
            disp, fit.plane, labels == ILLUSION_ID, cfg.feather_px, cfg.ransac.min_delta
        )
        vmin, vmax = _value_range(disp)
        rect_png = colormap_png(rectified.values, rectified.valid, vmin, vmax)
        diff = np.abs(rectified.values.astype(np.float64) - disp.values.astype(np.float64))
        diff_valid = rectified.valid & disp.valid
        dmax = float(diff[diff_valid].max()) if diff_valid.any() else 0.0
        diff_png = colormap_png(diff, diff_valid, 0.0, dmax)

        stamp = hashlib.sha1(
            json.dumps({"frame": frame_id, "payload": payload}, sort_keys=True).encode()
        ).hexdigest()[:16]
        rect_id = self._store_preview(f"{stamp}-rect", rect_png, vmin, vmax)
        diff_id = self._store_preview(f"{stamp}-diff", diff_png, 0.0, dmax)

        n_support = int(((labels == SUPPORT_ID) & disp.valid).sum())
        plane_json = fit.plane.to_dict()
        plane_json["inliers"] = fit.inlier_count
        plane_json["rms"] = fit.rms_residual
        return {
            "plane": plane_json,
            "inlier_count": fit.inlier_count,
            "inlier_ratio": fit.inlier_count / n_support if n_support else 0.0,
            "rms": fit.rms_residual,
            "preview_id": rect_id,
            "previews": {
                "rectified": {"id": rect_id, "min": vmin, "max": vmax},
                "difference": {"id": diff_id, "min": 0.0, "max": dmax},
            },
        }

    def _store_preview(self, pid: str, png: bytes, vmin: float, vmax: float) -> str:
        with self._preview_lock:
            self._previews[pid] = (png, vmin, vmax)
            self._previews.move_to_end(pid)
            while len(self._previews) > self._preview_cap:
                self._previews.popitem(last=False)
        return pid

    def preview(self, pid: str) -> tuple[bytes, float, float]:
        with self._preview_lock:
            if pid not in self._previews:
                raise LookupError(f"unknown preview {pid!r}")
            return self._previews[pid]

    # -- export ------------------------------------------------------------

    def export(self, frame_id: str, payload: dict) -> dict:
        frame = self.frame(frame_id)
        with self._export_guard:
            lock = self._export_locks.setdefault(frame_id, threading.Lock())
        with lock:
            disp = read_pfm(frame.disparity)
            labels, regions, cfg = _annotation_inputs(disp, payload)
            fit = fit_support_plane(disp, labels == SUPPORT_ID, cfg)
            rectified = apply_plane_rectification(
                disp, fit.plane, labels == ILLUSION_ID, cfg.feather_px, cfg.ransac.min_delta
            )
            targets = {
                "labels.png": frame.root / "labels.png",
                "pairs.json": frame.root / "pairs.json",
                "rectified.pfm": frame.root / "rectified.pfm",
            }
            before = {k: (p.read_bytes() if p.is_file() else None) for k, p in targets.items()}
            write_regions(regions, targets["labels.png"], targets["pairs.json"])
            write_pfm(rectified, targets["rectified.pfm"])
            written, unchanged = [], []
            for name, path in targets.items():
                frame.derived[name] = path
                if before[name] is not None and before[name] == path.read_bytes():
                    unchanged.append(str(path))
                else:
                    written.append(str(path))
            return {"written": written, "unchanged": unchanged}


def _value_range(disp: DisparityMap) -> tuple[float, float]:
    if disp.valid.any():
        vals = disp.values[disp.valid]
        return float(vals.min()), float(vals.max())
    return 0.0, 1.0


def _annotation_inputs(disp: DisparityMap, payload: dict):
    try:
        support_poly = payload["support_polygon"]
        illusion_poly = payload["illusion_polygon"]
    except KeyError as exc:
        raise ValidationError(f"missing field {exc.args[0]!r}") from exc
    h, w = disp.values.shape
    support = rasterize_polygon(support_poly, w, h)
    illusion = rasterize_polygon(illusion_poly, w, h)
    labels = np.zeros((h, w), dtype=np.uint8)
    labels[support] = SUPPORT_ID
    labels[illusion] = ILLUSION_ID  # illusion drawn on top wins overlaps
    if not (labels == ILLUSION_ID).any() or not (labels == SUPPORT_ID).any():
        raise ValidationError("degenerate support region: a polygon rasterized to nothing")
    regions = RegionSet(labels, [(ILLUSION_ID, SUPPORT_ID)])
    cfg = RectifyConfig(
        ransac=RansacConfig(
            inlier_threshold=float(payload.get("tau_d", 1.0)),
            batch_size=int(payload.get("batch", 64)),
            max_iterations=int(payload.get("iters", 100)),
            seed=int(payload.get("seed", 0)),
        ),
        feather_px=float(payload.get("feather_px", 8.0)),
        min_support_points=int(payload.get("min_support", 50)),
    )
    return labels, regions, cfg


# ---------------------------------------------------------------------------
# HTTP plumbing


class _Handler(BaseHTTPRequestHandler):
    service: AnnotationService = None
    ui_dir: Path | None = None
    protocol_version = "HTTP/1.1"

    # quiet the default stderr-per-request logging
    def log_message(self, fmt, *args):
        pass

    def _send(self, status: int, body: bytes, content_type: str, headers=None):
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        for key, value in (headers or {}).items():
            self.send_header(key, value)
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, obj, status: int = 200, headers=None):
        self._send(status, json.dumps(obj).encode(), "application/json", headers)

    def _error(self, status: int, message: str):
        self._send_json({"error": message}, status=status)

    def do_OPTIONS(self):
        self._send(204, b"", "text/plain")

    def do_GET(self):
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        try:
            if parts == ["api", "frames"]:
                self._send_json(self.service.list_frames())
            elif len(parts) == 4 and parts[:2] == ["api", "frame"] and parts[3] == "image":
                self._send(200, self.service.frame_image(parts[2]), "image/png")
            elif len(parts) == 4 and parts[:2] == ["api", "frame"] and parts[3] == "disparity":
                query = parse_qs(url.query)
                if query.get("raw", ["0"])[0] == "1":
                    self._send(200, self.service.frame_disparity_raw(parts[2]),
                               "application/octet-stream")
                else:
                    png, vmin, vmax = self.service.frame_disparity_png(parts[2])
                    self._send(200, png, "image/png",
                               {"X-Value-Min": repr(vmin), "X-Value-Max": repr(vmax)})
            elif len(parts) == 3 and parts[:2] == ["api", "preview"]:
                png, vmin, vmax = self.service.preview(parts[2])
                self._send(200, png, "image/png",
                           {"X-Value-Min": repr(vmin), "X-Value-Max": repr(vmax)})
            elif self.ui_dir is not None:
                self._serve_static(url.path)
            else:
                self._error(404, f"no route for {url.path}")
        except LookupError as exc:
            self._error(404, str(exc))
        except (ValidationError, FormatError) as exc:
            self._error(400, str(exc))

    def do_POST(self):
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        try:
            length = int(self.headers.get("Content-Length", "0"))
            raw = self.rfile.read(length) if length else b"{}"
            try:
                payload = json.loads(raw.decode("utf-8"))
            except (json.JSONDecodeError, UnicodeDecodeError):
                return self._error(400, "request body is not valid JSON")
            if len(parts) == 4 and parts[:2] == ["api", "frame"] and parts[3] == "fit":
                self._send_json(self.service.fit(parts[2], payload))
            elif len(parts) == 4 and parts[:2] == ["api", "frame"] and parts[3] == "export":
                self._send_json(self.service.export(parts[2], payload))
            else:
                self._error(404, f"no route for {url.path}")
        except LookupError as exc:
            self._error(404, str(exc))
        except (ValidationError, FormatError, KeyError, TypeError) as exc:
            self._error(400, str(exc))
        except OSError as exc:
            self._error(500, str(exc))

    def _serve_static(self, path: str):
        rel = path.lstrip("/") or "index.html"
        target = (self.ui_dir / rel).resolve()
        if not str(target).startswith(str(self.ui_dir.resolve())) or not target.is_file():
            return self._error(404, f"no route for {path}")
        types = {".html": "text/html", ".js": "text/javascript", ".css": "text/css",
                 ".map": "application/json", ".png": "image/png", ".svg": "image/svg+xml"}
        ctype = types.get(target.suffix, "application/octet-stream")
        self._send(200, target.read_bytes(), ctype)


def make_server(data_dir, host: str = "127.0.0.1", port: int = 0, ui_dir=None) -> ThreadingHTTPServer:
    """Build (but do not run) the HTTP server; port 0 picks a free port."""
    service = AnnotationService(data_dir)
    handler = type("BoundHandler", (_Handler,), {
        "service": service,
        "ui_dir": Path(ui_dir) if ui_dir else None,
    })
    server = ThreadingHTTPServer((host, port), handler)
    server.daemon_threads = True
    return server


def run_server(data_dir, host: str = "127.0.0.1", port: int = 8321, ui_dir=None) -> None:
    server = make_server(data_dir, host=host, port=port, ui_dir=ui_dir)
    addr = server.server_address
    print(f"serving {data_dir} on http://{addr[0]}:{addr[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
