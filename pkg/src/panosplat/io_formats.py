"""File formats: 8-bit PNG images, PFM depth maps, trajectory text.

Images travel as floats in [0,1] inside the library and are quantized to
8 bits on disk.  Depth uses PFM (float32, bottom-up rows, negative scale
for little-endian) with 0 marking invalid pixels.  Trajectories are
line-delimited decimal text, one pose per line:

    frame x y z qw qx qy qz

written with shortest round-trip decimals so a read-back is bit-exact.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from PIL import Image

from .rasterize import CameraPose


def to_u8(img: np.ndarray) -> np.ndarray:
    """Quantize floats in [0,1] to uint8 with round-half-even."""
    img = np.asarray(img, dtype=float)
    return np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)


def from_u8(img: np.ndarray) -> np.ndarray:
    return np.asarray(img, dtype=float) / 255.0


def write_png(path, img: np.ndarray) -> None:
    """Write an HxW (grayscale) or HxWx3 (RGB) image; floats are quantized."""
    img = np.asarray(img)
    if img.dtype != np.uint8:
        img = to_u8(img)
    if img.ndim == 2:
        mode = "L"
    elif img.ndim == 3 and img.shape[2] == 3:
        mode = "RGB"
    else:
        raise ValueError(f"unsupported image shape {img.shape}")
    Image.fromarray(img, mode=mode).save(str(path), format="PNG")


def read_png(path) -> np.ndarray:
    """Read a PNG back to floats in [0,1]; grayscale becomes HxW."""
    with Image.open(str(path)) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB" if len(im.getbands()) > 2 else "L")
        arr = np.asarray(im)
    return from_u8(arr)


def write_pfm(path, data: np.ndarray) -> None:
    """Write a single-channel float32 PFM (bottom-up rows, little-endian)."""
    data = np.asarray(data, dtype=np.float32)
    if data.ndim != 2:
        raise ValueError("PFM writer expects a 2D array")
    if not np.all(np.isfinite(data)):
        raise ValueError("PFM data must be finite")
    h, w = data.shape
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{w} {h}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(data[::-1].astype("<f4").tobytes())


def read_pfm(path) -> np.ndarray:
    """Read a single-channel PFM into a float64 array (top-down rows)."""
    with open(path, "rb") as f:
        magic = f.readline().rstrip()
        if magic != b"Pf":
            raise ValueError(f"{path}: not a grayscale PFM (magic {magic!r})")
        dims = f.readline().split()
        if len(dims) != 2:
            raise ValueError(f"{path}: malformed PFM dimensions")
        w, h = int(dims[0]), int(dims[1])
        scale = float(f.readline())
        if scale >= 0:
            raise ValueError(f"{path}: big-endian PFM not supported")
        raw = f.read(w * h * 4)
        if len(raw) != w * h * 4:
            raise ValueError(f"{path}: truncated PFM payload")
        data = np.frombuffer(raw, dtype="<f4").reshape(h, w)
    return data[::-1].astype(float)


def trajectory_text(poses: list[CameraPose]) -> str:
    lines = []
    for k, pose in enumerate(poses):
        p = pose.position
        q = pose.orientation
        fields = [str(k)] + [repr(float(v)) for v in (*p, *q)]
        lines.append(" ".join(fields))
    return "\n".join(lines) + "\n"


def write_trajectory(path, poses: list[CameraPose]) -> None:
    Path(path).write_text(trajectory_text(poses), encoding="ascii")


def read_trajectory(path) -> list[CameraPose]:
    poses = []
    text = Path(path).read_text(encoding="ascii")
    for ln, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 8:
            raise ValueError(f"{path}:{ln + 1}: expected 8 fields, got {len(parts)}")
        frame = int(parts[0])
        if frame != len(poses):
            raise ValueError(f"{path}:{ln + 1}: frame index {frame} out of order")
        vals = [float(v) for v in parts[1:]]
        poses.append(
            CameraPose(position=np.array(vals[:3]), orientation=np.array(vals[3:]))
        )
    if not poses:
        raise ValueError(f"{path}: empty trajectory")
    return poses


def atomic_write_bytes(path, payload: bytes) -> None:
    """Write via a temp file and rename, so readers never see partials."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(payload)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)
