"""Restoration stage: turn degraded RGB+alpha video into clean frames.

Three interchangeable restorers share one request/result contract: a null
pass-through, a classical push-pull hole filler, and a bridge to an
external process over a filesystem exchange protocol (the slot where a
learned video restorer plugs in).
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .conditioning import VideoSequence
from .io_formats import atomic_write_bytes, read_png, to_u8, write_png

SCHEMA_VERSION = 1
HOLE_ALPHA_THRESHOLD = 0.5
POLL_INTERVAL_S = 0.5

REQUEST_MARKER = "REQUEST_READY"
RESULT_MARKER = "RESULT_READY"
ERROR_MARKER = "ERROR"

_SCENE_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]*$")


class RestoreProtocolError(RuntimeError):
    """Malformed data on the exchange directory."""


class RestoreTimeout(TimeoutError):
    """No result appeared within the allowed time."""


@dataclass
class RestoreRequest:
    degraded: VideoSequence
    anchor: np.ndarray
    scene_id: str
    target_scale: int = 1

    def __post_init__(self):
        self.anchor = np.asarray(self.anchor, dtype=float)
        if len(self.degraded) < 1:
            raise ValueError("request needs at least one frame")
        if self.anchor.shape != self.degraded.frames.shape[1:]:
            raise ValueError("anchor shape does not match degraded frames")
        if np.min(self.anchor) < 0 or np.max(self.anchor) > 1:
            raise ValueError("anchor values must lie in [0, 1]")
        if not (isinstance(self.target_scale, int) and self.target_scale >= 1):
            raise ValueError("target_scale must be an integer >= 1")
        if not _SCENE_ID_RE.match(self.scene_id):
            raise ValueError(f"scene_id {self.scene_id!r} is not filesystem-safe")


@dataclass
class RestoreResult:
    frames: np.ndarray
    provenance: str

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=float)
        if self.frames.ndim != 4 or self.frames.shape[-1] != 3:
            raise ValueError("restored frames must have shape (T, H, W, 3)")
        if np.min(self.frames) < 0 or np.max(self.frames) > 1:
            raise ValueError("restored values must lie in [0, 1]")


def _upsample_nearest(frames: np.ndarray, scale: int) -> np.ndarray:
    if scale == 1:
        return frames
    return frames.repeat(scale, axis=1).repeat(scale, axis=2)


def restore_identity(req: RestoreRequest) -> RestoreResult:
    """Pass the degraded frames through unchanged (upsampled if asked)."""
    frames = _upsample_nearest(req.degraded.frames.copy(), req.target_scale)
    return RestoreResult(frames=frames, provenance="identity")


def restore_pushpull(req: RestoreRequest) -> RestoreResult:
    """Classical hole filler: alpha-weighted push-pull pyramid per frame,
    then pin frame 0's filled pixels to the anchor."""
    frames = req.degraded.frames
    alpha = req.degraded.alpha
    out = frames.copy()
    for t in range(len(frames)):
        holes = alpha[t] < HOLE_ALPHA_THRESHOLD
        if not np.any(holes):
            continue
        weight = np.where(holes, 0.0, alpha[t])
        if not np.any(weight > 0):
            out[t] = np.mean(req.anchor, axis=(0, 1))[None, None, :]
            continue
        filled = _fill_frame(frames[t], weight)
        out[t] = np.where(holes[..., None], filled, frames[t])
    holes0 = alpha[0] < HOLE_ALPHA_THRESHOLD
    out[0] = np.where(holes0[..., None], req.anchor, out[0])
    out = np.clip(out, 0.0, 1.0)
    return RestoreResult(frames=_upsample_nearest(out, req.target_scale),
                         provenance="pushpull")


def _fill_frame(frame: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """Push-pull interpolation: weighted 2x2 reduction to 1x1, then
    nearest upsampling that overwrites only zero-weight pixels."""
    pyramid = [(frame.copy(), weight.copy())]
    c, w = frame, weight
    while max(c.shape[:2]) > 1:
        pad_h = c.shape[0] % 2
        pad_w = c.shape[1] % 2
        if pad_h or pad_w:
            c = np.pad(c, ((0, pad_h), (0, pad_w), (0, 0)))
            w = np.pad(w, ((0, pad_h), (0, pad_w)))
        h2, w2 = c.shape[0] // 2, c.shape[1] // 2
        wc = (w[..., None] * c).reshape(h2, 2, w2, 2, 3).sum(axis=(1, 3))
        ww = w.reshape(h2, 2, w2, 2).sum(axis=(1, 3))
        with np.errstate(invalid="ignore"):
            c = np.where(ww[..., None] > 0, wc / np.maximum(ww, 1e-300)[..., None], 0.0)
        w = ww
        pyramid.append((c, w))

    c_coarse = pyramid[-1][0]
    for c, w in reversed(pyramid[:-1]):
        up = c_coarse.repeat(2, axis=0).repeat(2, axis=1)[: c.shape[0], : c.shape[1]]
        c_coarse = np.where(w[..., None] > 0, c, up)
    return c_coarse


def _request_dir(exchange_dir, scene_id: str) -> Path:
    return Path(exchange_dir) / scene_id


def write_restore_request(req: RestoreRequest, exchange_dir) -> Path:
    """Write frames, alpha, anchor, and request.json, marker last."""
    root = _request_dir(exchange_dir, req.scene_id)
    (root / "frames").mkdir(parents=True, exist_ok=True)
    (root / "alpha").mkdir(exist_ok=True)
    t, h, w, _ = req.degraded.frames.shape
    frame_files = []
    alpha_files = []
    for i in range(t):
        frame_files.append(f"frames/{i:05d}.png")
        alpha_files.append(f"alpha/{i:05d}.png")
        write_png(root / frame_files[-1], req.degraded.frames[i])
        write_png(root / alpha_files[-1], req.degraded.alpha[i])
    write_png(root / "anchor.png", req.anchor)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "scene_id": req.scene_id,
        "T": t,
        "H": h,
        "W": w,
        "target_scale": req.target_scale,
        "frames": frame_files,
        "alpha": alpha_files,
        "anchor": "anchor.png",
    }
    payload = json.dumps(manifest, indent=2, sort_keys=True).encode("utf-8")
    atomic_write_bytes(root / "request.json", payload)
    atomic_write_bytes(root / REQUEST_MARKER, b"")
    return root


def read_restore_result(root: Path, req: RestoreRequest) -> RestoreResult:
    """Read and validate restored frames; raises on any shape drift."""
    root = Path(root)
    restored_dir = root / "restored"
    t, h, w, _ = req.degraded.frames.shape
    s = req.target_scale
    frames = []
    for i in range(t):
        p = restored_dir / f"{i:05d}.png"
        if not p.exists():
            raise RestoreProtocolError(f"{p}: missing restored frame")
        img = read_png(p)
        if img.ndim != 3 or img.shape != (h * s, w * s, 3):
            raise RestoreProtocolError(
                f"{p}: expected shape {(h * s, w * s, 3)}, got {img.shape}"
            )
        frames.append(img)
    extra = sorted(restored_dir.glob("*.png"))
    if len(extra) != t:
        raise RestoreProtocolError(
            f"{restored_dir}: expected {t} frames, found {len(extra)}"
        )
    return RestoreResult(frames=np.stack(frames), provenance="external")


def restore_external(
    req: RestoreRequest,
    exchange_dir,
    timeout: float = 60.0,
    poll_interval: float = POLL_INTERVAL_S,
) -> RestoreResult:
    """Hand the request to an external adapter over the exchange directory.

    Blocks until RESULT_READY appears, the adapter reports ERROR, or the
    timeout elapses.
    """
    root = write_restore_request(req, exchange_dir)
    deadline = time.monotonic() + timeout
    while True:
        if (root / ERROR_MARKER).exists():
            msg = (root / ERROR_MARKER).read_text(encoding="utf-8").strip()
            raise RestoreProtocolError(f"adapter error: {msg or 'unspecified'}")
        if (root / RESULT_MARKER).exists():
            return read_restore_result(root, req)
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            raise RestoreTimeout(
                f"no result in {root} after {timeout:.1f}s"
            )
        time.sleep(min(poll_interval, remaining))
