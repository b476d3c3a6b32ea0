"""Image quality metrics: PSNR, SSIM, and their sphere-weighted variants.

The weighted variants reweight per-pixel contributions by the solid-angle
row weights of the equirectangular grid, so equatorial error counts more
than the over-sampled poles.  SSIM follows the standard construction:
11x11 Gaussian window, sigma 1.5, C1 = 0.01^2, C2 = 0.03^2, channel
averaged, map cropped to pixels whose windows lie fully inside the image.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import convolve1d

from .sphere import ErpGrid, erp_weight_map

PSNR_CAP_DB = 99.0
PSNR_MSE_FLOOR = 1e-10
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2
_SSIM_PAD = (SSIM_WINDOW - 1) // 2

METRIC_NAMES = ("psnr", "ssim", "ws_psnr", "ws_ssim")


def _as_image_pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.ndim not in (2, 3):
        raise ValueError("images must be HxW or HxWxC")
    return a, b


def _mse_to_db(mse: float) -> float:
    if mse < PSNR_MSE_FLOOR:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(1.0 / mse), PSNR_CAP_DB)


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for images in [0, 1], capped at 99."""
    a, b = _as_image_pair(a, b)
    return _mse_to_db(float(np.mean((a - b) ** 2)))


def ws_psnr(a: np.ndarray, b: np.ndarray, grid: ErpGrid) -> float:
    """PSNR with the squared error weighted by ERP row solid angles."""
    a, b = _as_image_pair(a, b)
    if a.shape[:2] != grid.shape:
        raise ValueError("images do not match the grid resolution")
    w = erp_weight_map(grid)
    if a.ndim == 3:
        w = w[..., None]
    err2 = (a - b) ** 2
    wmse = float(np.sum(w * err2) / np.sum(np.broadcast_to(w, err2.shape)))
    return _mse_to_db(wmse)


def _gaussian_kernel() -> np.ndarray:
    x = np.arange(SSIM_WINDOW, dtype=float) - _SSIM_PAD
    k = np.exp(-(x**2) / (2.0 * SSIM_SIGMA**2))
    return k / k.sum()


_KERNEL = _gaussian_kernel()


def _windowed(img: np.ndarray) -> np.ndarray:
    out = convolve1d(img, _KERNEL, axis=0, mode="nearest")
    return convolve1d(out, _KERNEL, axis=1, mode="nearest")


def _ssim_map_single(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    mu_a = _windowed(a)
    mu_b = _windowed(b)
    var_a = _windowed(a * a) - mu_a**2
    var_b = _windowed(b * b) - mu_b**2
    cov = _windowed(a * b) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mu_a**2 + mu_b**2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return num / den


def ssim_map(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Channel-averaged SSIM map cropped to fully valid window positions."""
    a, b = _as_image_pair(a, b)
    if min(a.shape[:2]) < SSIM_WINDOW:
        raise ValueError(
            f"images must be at least {SSIM_WINDOW} pixels on each side"
        )
    if a.ndim == 2:
        full = _ssim_map_single(a, b)
    else:
        full = np.mean(
            [_ssim_map_single(a[..., c], b[..., c]) for c in range(a.shape[-1])],
            axis=0,
        )
    return full[_SSIM_PAD:-_SSIM_PAD, _SSIM_PAD:-_SSIM_PAD]


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean structural similarity over the valid window region."""
    return float(np.mean(ssim_map(a, b)))


def ws_ssim(a: np.ndarray, b: np.ndarray, grid: ErpGrid) -> float:
    """SSIM map weighted by ERP row solid angles at each map location."""
    a, b = _as_image_pair(a, b)
    if a.shape[:2] != grid.shape:
        raise ValueError("images do not match the grid resolution")
    s = ssim_map(a, b)
    w = erp_weight_map(grid)[_SSIM_PAD:-_SSIM_PAD, _SSIM_PAD:-_SSIM_PAD]
    return float(np.sum(w * s) / np.sum(w))


@dataclass
class MetricReport:
    """Per-frame metric values with arithmetic means."""

    per_frame: dict[str, list[float]]
    n_frames: int
    means: dict[str, float] = field(init=False)

    def __post_init__(self):
        for name, vals in self.per_frame.items():
            if len(vals) != self.n_frames:
                raise ValueError(f"metric {name} has {len(vals)} values, "
                                 f"expected {self.n_frames}")
        self.means = {
            name: float(np.mean(vals)) for name, vals in self.per_frame.items()
        }

    def to_text(self) -> str:
        """Line-delimited records plus a summary block."""
        lines = []
        for name in self.per_frame:
            for i, v in enumerate(self.per_frame[name]):
                lines.append(f"{name} {i} {v!r}")
        lines.append(f"frames {self.n_frames}")
        for name, v in self.means.items():
            lines.append(f"mean_{name} {v!r}")
        return "\n".join(lines) + "\n"

    def summary_table(self) -> str:
        width = max(len(n) for n in self.per_frame) if self.per_frame else 6
        rows = [f"{'metric':<{width}}  mean"]
        for name, v in self.means.items():
            rows.append(f"{name:<{width}}  {v:.4f}")
        return "\n".join(rows)


def compute_report(
    gt_frames: np.ndarray,
    test_frames: np.ndarray,
    grid: ErpGrid,
    metrics: tuple[str, ...] = METRIC_NAMES,
) -> MetricReport:
    """Evaluate the requested metrics per frame over two aligned videos."""
    gt_frames = np.asarray(gt_frames, dtype=float)
    test_frames = np.asarray(test_frames, dtype=float)
    if gt_frames.shape != test_frames.shape:
        raise ValueError("video shapes differ")
    if gt_frames.ndim != 4:
        raise ValueError("videos must have shape (T, H, W, C)")
    unknown = set(metrics) - set(METRIC_NAMES)
    if unknown:
        raise ValueError(f"unknown metrics: {sorted(unknown)}")
    fns = {
        "psnr": lambda a, b: psnr(a, b),
        "ssim": lambda a, b: ssim(a, b),
        "ws_psnr": lambda a, b: ws_psnr(a, b, grid),
        "ws_ssim": lambda a, b: ws_ssim(a, b, grid),
    }
    per_frame = {
        name: [fns[name](g, t) for g, t in zip(gt_frames, test_frames)]
        for name in metrics
    }
    return MetricReport(per_frame=per_frame, n_frames=len(gt_frames))
