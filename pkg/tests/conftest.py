from __future__ import annotations

import numpy as np
import pytest

from panosplat.lift import Panorama
from panosplat.rasterize import PerspectiveIntrinsics
from panosplat.scene import GaussianScene
from panosplat.sphere import ErpGrid, pixel_to_dir

# Shared by the gradient-check suite: small image, moderate fov.
GRAD_INTR = PerspectiveIntrinsics(fov_y=1.0, width=30, height=22)


def make_smooth_pano(grid: ErpGrid, depth_value: float | None = 2.0) -> Panorama:
    """Low-frequency panorama whose color is a smooth function of the view
    direction; optional constant depth."""
    jj, ii = np.meshgrid(np.arange(grid.width), np.arange(grid.height))
    d = pixel_to_dir(ii + 0.5, jj + 0.5, grid)
    rgb = np.stack(
        [
            0.5 + 0.3 * np.sin(2.1 * d[..., 0] + 0.3),
            0.5 + 0.3 * np.cos(1.7 * d[..., 1]),
            0.5 + 0.3 * np.sin(1.3 * d[..., 2] + 1.1),
        ],
        axis=-1,
    )
    depth = None if depth_value is None else np.full(grid.shape, float(depth_value))
    return Panorama(rgb=np.clip(rgb, 0.0, 1.0), grid=grid, depth=depth)


def make_blob_scene(rng: np.random.Generator, k: int) -> GaussianScene:
    """Random scene kept inside the smooth-gradient regime for GRAD_INTR.

    Finite differences are only meaningful away from the renderer's hard
    cutoffs, so footprints are wide enough that every pixel stays below
    Mahalanobis^2 ~ 8 (keeping alphas well above the 1/255 floor), opacities
    cap low enough that transmittance never approaches the 1e-4 early-out,
    colors stay clear of the clamp, and depths are separated so +-1e-4
    perturbations cannot reorder the depth sort.
    """
    focal = GRAD_INTR.focal
    depths = 2.0 + 0.8 * np.arange(k) + rng.uniform(0.0, 0.35, k)
    mu = np.stack(
        [
            rng.uniform(-0.2, 0.2, k) * depths,
            rng.uniform(-0.15, 0.15, k) * depths,
            depths,
        ],
        axis=-1,
    )
    sigma_px = rng.uniform(12.0, 22.0, (k, 3))
    log_scale = np.log(sigma_px * depths[:, None] / focal)
    quats = rng.normal(size=(k, 4))
    quats /= np.linalg.norm(quats, axis=1, keepdims=True)
    return GaussianScene(
        mu=mu,
        log_scale=log_scale,
        rot=quats,
        opacity_logit=rng.uniform(-0.8, 0.8, k),
        color=rng.uniform(0.1, 0.9, (k, 3)),
    )


def make_wild_scene(rng: np.random.Generator, k: int) -> GaussianScene:
    """Random scene that exercises the skip rules: small and large
    footprints, near-opaque and near-transparent splats, centers on and off
    the image, some behind the camera."""
    mu = np.stack(
        [
            rng.uniform(-2.0, 2.0, k),
            rng.uniform(-1.5, 1.5, k),
            rng.uniform(-1.0, 6.0, k),
        ],
        axis=-1,
    )
    quats = rng.normal(size=(k, 4))
    quats /= np.linalg.norm(quats, axis=1, keepdims=True)
    return GaussianScene(
        mu=mu,
        log_scale=rng.uniform(np.log(0.01), np.log(0.8), (k, 3)),
        rot=quats,
        opacity_logit=rng.uniform(-4.0, 6.0, k),
        color=rng.uniform(-0.2, 1.2, (k, 3)),
    )


def _erp_dirs(grid: ErpGrid) -> np.ndarray:
    jj, ii = np.meshgrid(np.arange(grid.width), np.arange(grid.height))
    return pixel_to_dir(ii + 0.5, jj + 0.5, grid)


def cylinder_room_depth(
    grid: ErpGrid, radius: float, floor_y: float = -1.6, ceil_y: float = 0.9
) -> np.ndarray:
    """Radial depth of a cylindrical room seen from the origin."""
    d = _erp_dirs(grid)
    dy = d[..., 1]
    r_xz = np.hypot(d[..., 0], d[..., 2])
    with np.errstate(divide="ignore"):
        t_wall = np.where(r_xz > 0, radius / r_xz, np.inf)
        t_cap = np.where(dy > 0, ceil_y / dy, np.where(dy < 0, floor_y / dy, np.inf))
    return np.minimum(t_wall, t_cap)


def box_room_depth(
    grid: ErpGrid,
    x_half: float,
    z_half: float,
    floor_y: float = -1.6,
    ceil_y: float = 0.9,
) -> np.ndarray:
    """Radial depth of an axis-aligned box room seen from the origin."""
    d = _erp_dirs(grid)
    with np.errstate(divide="ignore"):
        tx = np.where(d[..., 0] != 0, x_half / np.abs(d[..., 0]), np.inf)
        tz = np.where(d[..., 2] != 0, z_half / np.abs(d[..., 2]), np.inf)
        dy = d[..., 1]
        ty = np.where(dy > 0, ceil_y / dy, np.where(dy < 0, floor_y / dy, np.inf))
    return np.minimum(np.minimum(tx, tz), ty)


def room_pano(depth: np.ndarray, grid: ErpGrid) -> Panorama:
    pano = make_smooth_pano(grid, depth_value=None)
    return Panorama(rgb=pano.rgb, grid=grid, depth=depth)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
