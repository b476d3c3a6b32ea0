"""Exchange-directory wire format: discovery, validation, atomic writes.

One request lives under ``exchange_dir/<scene_id>/``:

    request.json        schema_version, T, H, W, target_scale, file lists
    frames/%05d.png     degraded RGB, 8-bit
    alpha/%05d.png      8-bit single channel
    anchor.png          fully observed first panorama
    REQUEST_READY       empty marker, written last by the requester

The adapter answers with ``restored/%05d.png`` followed by RESULT_READY,
or an ERROR file carrying a one-line message.  A DONE marker records that
the scene was handled (either way), so a restarted adapter never serves
the same scene twice.  Every marker and output file is created by writing
a temp file and renaming it, so the requester never observes partials.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

SCHEMA_VERSION = 1

REQUEST_MARKER = "REQUEST_READY"
RESULT_MARKER = "RESULT_READY"
ERROR_MARKER = "ERROR"
DONE_MARKER = "DONE"

_REQUIRED_KEYS = frozenset(
    {"schema_version", "scene_id", "T", "H", "W", "target_scale",
     "frames", "alpha", "anchor"}
)


class RequestError(RuntimeError):
    """The request directory violates the wire format."""


@dataclass
class LoadedRequest:
    """A validated request with all images decoded to floats in [0, 1]."""

    root: Path
    scene_id: str
    frames: np.ndarray  # (T, H, W, 3)
    alpha: np.ndarray   # (T, H, W)
    anchor: np.ndarray  # (H, W, 3)
    target_scale: int


def atomic_write_bytes(path, payload: bytes) -> None:
    """Write via a temp file and rename, so readers never see partials."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(payload)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


def read_png(path) -> np.ndarray:
    """Read an 8-bit PNG to floats in [0,1]; grayscale becomes HxW."""
    with Image.open(str(path)) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB" if len(im.getbands()) > 2 else "L")
        arr = np.asarray(im)
    return arr.astype(float) / 255.0


def write_png(path, img: np.ndarray) -> None:
    """Quantize floats in [0,1] to an 8-bit PNG, written atomically."""
    img = np.asarray(img)
    if img.dtype != np.uint8:
        img = np.clip(np.rint(np.asarray(img, dtype=float) * 255.0),
                      0, 255).astype(np.uint8)
    mode = "L" if img.ndim == 2 else "RGB"
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    Image.fromarray(img, mode=mode).save(str(tmp), format="PNG")
    os.replace(tmp, path)


def _safe_child(root: Path, name) -> Path:
    """Resolve a manifest-listed file name, rejecting escapes from root."""
    if not isinstance(name, str) or not name:
        raise RequestError(f"request.json: bad file name {name!r}")
    p = (root / name).resolve()
    if not p.is_relative_to(root.resolve()):
        raise RequestError(f"request.json: {name!r} escapes the request dir")
    return p


def _load_image(root: Path, name, shape: tuple) -> np.ndarray:
    p = _safe_child(root, name)
    if not p.is_file():
        raise RequestError(f"{name}: listed in request.json but missing")
    img = read_png(p)
    if img.shape != shape:
        raise RequestError(f"{name}: expected shape {shape}, got {img.shape}")
    return img


def load_request(root) -> LoadedRequest:
    """Parse and validate one request directory.

    Raises RequestError naming the offending file or field; the caller
    turns that into an ERROR marker for the requester to pick up.
    """
    root = Path(root)
    manifest_path = root / "request.json"
    if not manifest_path.is_file():
        raise RequestError("request.json: missing")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise RequestError(f"request.json: not valid JSON ({e})") from e
    if not isinstance(manifest, dict):
        raise RequestError("request.json: top level must be an object")
    missing = _REQUIRED_KEYS - set(manifest)
    if missing:
        raise RequestError(f"request.json: missing keys {sorted(missing)}")

    if manifest["schema_version"] != SCHEMA_VERSION:
        raise RequestError(
            f"request.json: schema_version {manifest['schema_version']!r}, "
            f"adapter speaks {SCHEMA_VERSION}"
        )
    t, h, w = manifest["T"], manifest["H"], manifest["W"]
    scale = manifest["target_scale"]
    for key, value in (("T", t), ("H", h), ("W", w), ("target_scale", scale)):
        if not isinstance(value, int) or value < 1:
            raise RequestError(f"request.json: {key} must be an integer >= 1")
    for key in ("frames", "alpha"):
        names = manifest[key]
        if not isinstance(names, list) or len(names) != t:
            raise RequestError(f"request.json: {key} must list T={t} files")

    frames = np.stack(
        [_load_image(root, n, (h, w, 3)) for n in manifest["frames"]]
    )
    alpha = np.stack(
        [_load_image(root, n, (h, w)) for n in manifest["alpha"]]
    )
    anchor = _load_image(root, manifest["anchor"], (h, w, 3))
    return LoadedRequest(
        root=root,
        scene_id=str(manifest["scene_id"]),
        frames=frames,
        alpha=alpha,
        anchor=anchor,
        target_scale=scale,
    )


def write_result(root: Path, frames: np.ndarray) -> None:
    """Write restored frames, then the RESULT_READY marker last."""
    out_dir = Path(root) / "restored"
    out_dir.mkdir(exist_ok=True)
    for i in range(len(frames)):
        write_png(out_dir / f"{i:05d}.png", frames[i])
    atomic_write_bytes(Path(root) / RESULT_MARKER, b"")


def write_error(root: Path, message: str) -> None:
    atomic_write_bytes(Path(root) / ERROR_MARKER,
                       (message.strip() + "\n").encode("utf-8"))
