"""Equirectangular (ERP) sphere geometry.

Conventions used everywhere in this package:

* World frame is right-handed with +Y up and +Z forward.
* An ERP grid of height H and width W covers latitude phi in [-pi/2, pi/2]
  (top row = north pole = +Y) and longitude theta in [-pi, pi) with
  theta = 0 at +Z, increasing toward +X.
* Continuous pixel coordinates place the center of pixel (row i, col j) at
  (i + 0.5, j + 0.5). Horizontal indexing wraps; vertical indexing clamps.

    phi(y)   = (0.5 - y / H) * pi
    theta(x) = (x / W - 0.5) * 2 * pi
    dir      = (cos(phi) sin(theta), sin(phi), cos(phi) cos(theta))
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quat import quat_about_x, quat_about_y, quat_normalize, quat_to_rot


@dataclass(frozen=True)
class ErpGrid:
    """Equirectangular pixel grid. Width must be even; 2:1 aspect is the
    usual convention but is not required here."""

    height: int
    width: int

    def __post_init__(self) -> None:
        if self.height < 2 or self.width < 2:
            raise ValueError(f"grid must be at least 2x2, got {self.height}x{self.width}")
        if self.width % 2 != 0:
            raise ValueError(f"grid width must be even, got {self.width}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)


def latitude_of_row(y, grid: ErpGrid):
    """Latitude in radians of continuous row coordinate y in [0, H]."""
    y = np.asarray(y, dtype=np.float64)
    if np.any(y < 0.0) or np.any(y > grid.height):
        raise ValueError(f"row coordinate outside [0, {grid.height}]")
    return (0.5 - y / grid.height) * np.pi


def longitude_of_col(x, grid: ErpGrid):
    """Longitude in radians of continuous column coordinate x in [0, W]."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0.0) or np.any(x > grid.width):
        raise ValueError(f"column coordinate outside [0, {grid.width}]")
    return (x / grid.width - 0.5) * 2.0 * np.pi


def pixel_to_dir(y, x, grid: ErpGrid) -> np.ndarray:
    """Unit direction for continuous pixel coordinates. Broadcasts; the
    result has shape broadcast(y, x) + (3,)."""
    phi = latitude_of_row(y, grid)
    theta = longitude_of_col(x, grid)
    phi, theta = np.broadcast_arrays(phi, theta)
    cos_phi = np.cos(phi)
    return np.stack(
        [cos_phi * np.sin(theta), np.sin(phi), cos_phi * np.cos(theta)], axis=-1
    )


def dir_to_pixel(d: np.ndarray, grid: ErpGrid) -> tuple[np.ndarray, np.ndarray]:
    """Continuous pixel coordinates (y, x) of unit directions d (..., 3).

    y lies in [0, H], x in [0, W). The poles (|dy| = 1) have undefined
    longitude and map to x = 0 by convention.
    """
    d = np.asarray(d, dtype=np.float64)
    if d.shape[-1] != 3:
        raise ValueError("directions must have a trailing dimension of 3")
    norm = np.linalg.norm(d, axis=-1)
    if np.any(np.abs(norm - 1.0) > 1e-6):
        raise ValueError("directions must be unit-norm within 1e-6")
    dx, dy, dz = d[..., 0], d[..., 1], d[..., 2]
    phi = np.arcsin(np.clip(dy, -1.0, 1.0))
    theta = np.arctan2(dx, dz)
    y = grid.height * (0.5 - phi / np.pi)
    x = grid.width * (theta / (2.0 * np.pi) + 0.5)
    x = np.where(x >= grid.width, x - grid.width, x)
    at_pole = (dx == 0.0) & (dz == 0.0)
    x = np.where(at_pole, 0.0, x)
    return y, x


def erp_weight_row(y, grid: ErpGrid):
    """Solid-angle row weight cos(phi) at the center of integer row y."""
    y = np.asarray(y)
    if np.any(y < 0) or np.any(y > grid.height - 1):
        raise ValueError(f"row index outside [0, {grid.height - 1}]")
    return np.cos(latitude_of_row(np.asarray(y, dtype=np.float64) + 0.5, grid))


def erp_weight_map(grid: ErpGrid) -> np.ndarray:
    """Per-pixel weight map (H, W); constant along each row."""
    rows = erp_weight_row(np.arange(grid.height), grid)
    return np.repeat(rows[:, None], grid.width, axis=1)


def warp_coords(x, y, grid: ErpGrid):
    """Latitude-dependent horizontal contraction toward the column center.

    x' = x_c + (x - x_c) * cos(phi(y)) with x_c = W / 2. The latitude is
    evaluated at the given row coordinate as-is; pass y + 0.5 for pixel
    centers.
    """
    x = np.asarray(x, dtype=np.float64)
    cos_phi = np.cos(latitude_of_row(y, grid))
    xc = grid.width / 2.0
    return xc + (x - xc) * cos_phi


def sample_bilinear(image: np.ndarray, y, x) -> np.ndarray:
    """Bilinear sample at continuous coordinates with pixel centers at
    i + 0.5. Columns wrap, rows clamp. image is (H, W) or (H, W, C)."""
    image = np.asarray(image)
    h, w = image.shape[0], image.shape[1]
    fy = np.asarray(y, dtype=np.float64) - 0.5
    fx = np.asarray(x, dtype=np.float64) - 0.5
    i0 = np.floor(fy).astype(np.int64)
    j0 = np.floor(fx).astype(np.int64)
    ty = fy - i0
    tx = fx - j0
    i0c = np.clip(i0, 0, h - 1)
    i1c = np.clip(i0 + 1, 0, h - 1)
    j0w = np.mod(j0, w)
    j1w = np.mod(j0 + 1, w)
    if image.ndim == 3:
        ty = ty[..., None]
        tx = tx[..., None]
    v00 = image[i0c, j0w]
    v01 = image[i0c, j1w]
    v10 = image[i1c, j0w]
    v11 = image[i1c, j1w]
    # lerp form keeps constant images exactly constant
    top = v00 + tx * (v01 - v00)
    bot = v10 + tx * (v11 - v10)
    return top + ty * (bot - top)


def _clamped_bilinear(image: np.ndarray, y, x) -> np.ndarray:
    """Bilinear sample with both axes clamped (for perspective faces)."""
    image = np.asarray(image)
    h, w = image.shape[0], image.shape[1]
    fy = np.asarray(y, dtype=np.float64) - 0.5
    fx = np.asarray(x, dtype=np.float64) - 0.5
    i0 = np.floor(fy).astype(np.int64)
    j0 = np.floor(fx).astype(np.int64)
    ty = fy - i0
    tx = fx - j0
    i0c = np.clip(i0, 0, h - 1)
    i1c = np.clip(i0 + 1, 0, h - 1)
    j0c = np.clip(j0, 0, w - 1)
    j1c = np.clip(j0 + 1, 0, w - 1)
    if image.ndim == 3:
        ty = ty[..., None]
        tx = tx[..., None]
    v00 = image[i0c, j0c]
    v01 = image[i0c, j1c]
    v10 = image[i1c, j0c]
    v11 = image[i1c, j1c]
    top = v00 + tx * (v01 - v00)
    bot = v10 + tx * (v11 - v10)
    return top + ty * (bot - top)


def erp_to_perspective(
    image: np.ndarray,
    orientation: np.ndarray,
    fov: float,
    out_w: int,
    out_h: int,
) -> np.ndarray:
    """Resample an ERP image into a pinhole view.

    orientation is a world-from-camera unit quaternion (w, x, y, z); the
    camera looks along its +Z with +Y up in camera space. fov is the
    vertical field of view in radians; the focal length derived from it is
    shared by both axes.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim not in (2, 3):
        raise ValueError("image must be HxW or HxWxC")
    if not 0.0 < fov < np.pi:
        raise ValueError("fov must lie in (0, pi)")
    if out_w < 1 or out_h < 1:
        raise ValueError("output size must be positive")
    grid = ErpGrid(image.shape[0], image.shape[1])
    focal = (out_h / 2.0) / np.tan(fov / 2.0)
    jj, ii = np.meshgrid(np.arange(out_w), np.arange(out_h))
    u = (jj + 0.5 - out_w / 2.0) / focal
    v = (out_h / 2.0 - (ii + 0.5)) / focal
    d_cam = np.stack([u, v, np.ones_like(u)], axis=-1)
    d_cam /= np.linalg.norm(d_cam, axis=-1, keepdims=True)
    rot = quat_to_rot(quat_normalize(orientation))
    d_world = d_cam @ rot.T
    y, x = dir_to_pixel(d_world, grid)
    return sample_bilinear(image, y, x)


# Canonical cubemap: order and world-from-camera orientation of each face.
# The camera's +Z points along the face axis; up choices are the usual
# horizontal-cross conventions (world +Y for side faces).
CUBE_FACE_AXES = ("+x", "-x", "+y", "-y", "+z", "-z")

CUBE_FACE_ORIENTATIONS = (
    quat_about_y(np.pi / 2.0),
    quat_about_y(-np.pi / 2.0),
    quat_about_x(-np.pi / 2.0),
    quat_about_x(np.pi / 2.0),
    np.array([1.0, 0.0, 0.0, 0.0]),
    quat_about_y(np.pi),
)


def perspective_to_erp(faces, grid: ErpGrid) -> np.ndarray:
    """Assemble an ERP image from six square 90-degree cube faces.

    faces follow CUBE_FACE_AXES order (+x, -x, +y, -y, +z, -z) and must all
    share one square size and channel count. Each ERP pixel reads the face
    whose axis dominates its direction (ties resolve in axis order), sampled
    bilinearly with edges clamped.
    """
    faces = [np.asarray(f, dtype=np.float64) for f in faces]
    if len(faces) != 6:
        raise ValueError("exactly six faces required")
    shape = faces[0].shape
    for f in faces:
        if f.shape != shape:
            raise ValueError("all faces must share one shape")
    if len(shape) not in (2, 3) or shape[0] != shape[1]:
        raise ValueError("faces must be square HxW or HxWxC")
    size = shape[0]
    focal = size / 2.0  # fov exactly 90 degrees

    jj, ii = np.meshgrid(np.arange(grid.width), np.arange(grid.height))
    d = pixel_to_dir(ii + 0.5, jj + 0.5, grid)
    axis = np.argmax(np.abs(d), axis=-1)
    comp = np.take_along_axis(d, axis[..., None], axis=-1)[..., 0]
    face_idx = axis * 2 + (comp < 0.0).astype(np.int64)

    out_shape = grid.shape if len(shape) == 2 else grid.shape + (shape[2],)
    out = np.zeros(out_shape, dtype=np.float64)
    rots = [quat_to_rot(q) for q in CUBE_FACE_ORIENTATIONS]
    for k in range(6):
        mask = face_idx == k
        if not np.any(mask):
            continue
        d_cam = d[mask] @ rots[k]  # R^T d, row-vector form
        px = size / 2.0 + focal * d_cam[:, 0] / d_cam[:, 2]
        py = size / 2.0 - focal * d_cam[:, 1] / d_cam[:, 2]
        out[mask] = _clamped_bilinear(faces[k], py, px)
    return out
