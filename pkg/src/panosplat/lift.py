"""Lifting a panorama with depth into a coarse Gaussian scene.

Every sampled ERP pixel with valid depth becomes one isotropic Gaussian at
mu = depth * ray direction, sized by the local equatorial pixel footprint so
neighboring primitives overlap into a closed surface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scene import GaussianScene
from .sphere import ErpGrid, pixel_to_dir


@dataclass
class Panorama:
    """ERP image container: rgb (H, W, 3) in [0, 1], optional depth (H, W)
    in meters with 0 marking invalid pixels."""

    rgb: np.ndarray
    grid: ErpGrid
    depth: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.rgb = np.asarray(self.rgb, dtype=np.float64)
        if self.rgb.shape != (self.grid.height, self.grid.width, 3):
            raise ValueError(
                f"rgb shape {self.rgb.shape} does not match grid {self.grid.shape}"
            )
        if np.any(self.rgb < 0.0) or np.any(self.rgb > 1.0):
            raise ValueError("rgb values must lie in [0, 1]")
        if self.depth is not None:
            self.depth = np.asarray(self.depth, dtype=np.float64)
            if self.depth.shape != self.grid.shape:
                raise ValueError(
                    f"depth shape {self.depth.shape} does not match grid {self.grid.shape}"
                )
            if not np.all(np.isfinite(self.depth)) or np.any(self.depth < 0.0):
                raise ValueError("depth must be finite and non-negative")


def lift_panorama(
    pano: Panorama,
    stride: int = 1,
    scale_gain: float = 0.7,
    opacity_init: float = 0.99,
) -> GaussianScene:
    """Unproject sampled pixels into Gaussians.

    Pixels are taken every `stride` rows and columns starting at (0, 0), in
    row-major order; pixels with depth <= 0 are skipped. Each kept pixel
    yields an isotropic Gaussian with scale
    scale_gain * depth * (2 pi * stride / W), identity orientation,
    opacity_init opacity, and the pixel's color.
    """
    if pano.depth is None:
        raise ValueError("panorama has no depth channel")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if not 0.0 < opacity_init < 1.0:
        raise ValueError("opacity_init must lie in (0, 1)")
    if scale_gain <= 0.0:
        raise ValueError("scale_gain must be positive")
    grid = pano.grid

    ys = np.arange(0, grid.height, stride)
    xs = np.arange(0, grid.width, stride)
    jj, ii = np.meshgrid(xs, ys)
    ii = ii.ravel()
    jj = jj.ravel()
    depth = pano.depth[ii, jj]
    valid = depth > 0.0
    if not np.any(valid):
        raise ValueError("no valid depth samples, scene would be empty")
    ii, jj, depth = ii[valid], jj[valid], depth[valid]

    dirs = pixel_to_dir(ii + 0.5, jj + 0.5, grid)
    mu = depth[:, None] * dirs
    scale = scale_gain * depth * (2.0 * np.pi * stride / grid.width)
    log_scale = np.repeat(np.log(scale)[:, None], 3, axis=1)
    k = mu.shape[0]
    rot = np.zeros((k, 4))
    rot[:, 0] = 1.0
    logit = float(np.log(opacity_init / (1.0 - opacity_init)))
    return GaussianScene(
        mu=mu,
        log_scale=log_scale,
        rot=rot,
        opacity_logit=np.full(k, logit),
        color=pano.rgb[ii, jj],
    )
