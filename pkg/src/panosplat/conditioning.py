"""Numeric conditioning kernels for panoramic video generation.

Everything here is pure array math: splitting a video into observed and
missing streams, assembling the anchor-prefixed condition stack, forward
noising against a schedule, latitude-aware noise warping, and the
latitude-decay loss weighting.  The frame encoder is pluggable so the
algebra can be tested without any learned component; the default encodes
pixels as their own latents.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sphere import ErpGrid, latitude_of_row

DEFAULT_DECAY_LAMBDA = 0.1
DEFAULT_SCHEDULE_STEPS = 1000
DEFAULT_SCHEDULE_FINAL = 0.01


@dataclass
class VideoSequence:
    """Aligned RGB frames and per-frame alpha on one panoramic grid."""

    frames: np.ndarray
    alpha: np.ndarray
    grid: ErpGrid

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=float)
        self.alpha = np.asarray(self.alpha, dtype=float)
        if self.frames.ndim != 4 or self.frames.shape[-1] != 3:
            raise ValueError("frames must have shape (T, H, W, 3)")
        if self.alpha.shape != self.frames.shape[:3]:
            raise ValueError("alpha must have shape (T, H, W) matching frames")
        if self.frames.shape[1:3] != self.grid.shape:
            raise ValueError("frames do not match the grid resolution")
        if np.min(self.frames) < 0 or np.max(self.frames) > 1:
            raise ValueError("frame values must lie in [0, 1]")
        if np.min(self.alpha) < 0 or np.max(self.alpha) > 1:
            raise ValueError("alpha values must lie in [0, 1]")

    def __len__(self) -> int:
        return self.frames.shape[0]


@dataclass
class ConditionTensor:
    """Anchor-prefixed condition stack.

    ``data[0]`` is the anchor slice; ``data[1:]`` are the video slices.
    Channels hold the background stream first, then the foreground stream,
    ``channels_per_stream`` each.
    """

    data: np.ndarray
    channels_per_stream: int

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 4:
            raise ValueError("condition data must be 4D (T+1, H, W, C)")
        if self.data.shape[0] < 1:
            raise ValueError("condition data needs at least the anchor slice")
        if self.data.shape[-1] != 2 * self.channels_per_stream:
            raise ValueError("channel count must be twice channels_per_stream")

    @property
    def anchor(self) -> np.ndarray:
        return self.data[0]

    @property
    def background(self) -> np.ndarray:
        return self.data[..., : self.channels_per_stream]

    @property
    def foreground(self) -> np.ndarray:
        return self.data[..., self.channels_per_stream :]


@dataclass
class NoiseSchedule:
    """Cumulative signal fractions, one per step, starting at exactly 1."""

    alphas: np.ndarray

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=float)
        if self.alphas.ndim != 1 or len(self.alphas) == 0:
            raise ValueError("schedule must be a nonempty 1D array")
        if np.any(self.alphas <= 0) or np.any(self.alphas > 1):
            raise ValueError("schedule values must lie in (0, 1]")
        if np.any(np.diff(self.alphas) > 0):
            raise ValueError("schedule must be monotone non-increasing")
        if self.alphas[0] != 1.0:
            raise ValueError("schedule must start at 1")

    def __len__(self) -> int:
        return len(self.alphas)

    @classmethod
    def linear(
        cls,
        n: int = DEFAULT_SCHEDULE_STEPS,
        final: float = DEFAULT_SCHEDULE_FINAL,
    ) -> "NoiseSchedule":
        if n < 1:
            raise ValueError("schedule needs at least one step")
        return cls(alphas=np.linspace(1.0, final, n))


def decompose(v: VideoSequence) -> tuple[np.ndarray, np.ndarray]:
    """Split into complementary streams: observed background V*(1-M) and
    foreground V*M."""
    m = v.alpha[..., None]
    return v.frames * (1.0 - m), v.frames * m


def identity_encoder(frame: np.ndarray) -> np.ndarray:
    return np.asarray(frame, dtype=float)


def assemble_condition(
    anchor: np.ndarray,
    v: VideoSequence,
    encoder=identity_encoder,
) -> ConditionTensor:
    """Encode both streams per frame and prepend the anchor slice.

    The anchor counts as fully observed: its background stream is the
    encoding of a zero frame and its foreground stream the encoded anchor.
    """
    anchor = np.asarray(anchor, dtype=float)
    if anchor.shape != v.frames.shape[1:]:
        raise ValueError("anchor shape does not match video frames")

    v_bg, v_fg = decompose(v)
    pairs = [(np.zeros_like(anchor), anchor)]
    pairs += [(v_bg[t], v_fg[t]) for t in range(len(v))]
    encoded = [(np.asarray(encoder(bg)), np.asarray(encoder(fg))) for bg, fg in pairs]
    shapes = {e.shape for pair in encoded for e in pair}
    if len(shapes) != 1:
        raise ValueError(f"encoder produced inconsistent slice shapes: {sorted(shapes)}")
    c = encoded[0][0].shape[-1]
    slices = [np.concatenate(pair, axis=-1) for pair in encoded]
    return ConditionTensor(data=np.stack(slices), channels_per_stream=c)


def forward_noise(
    z0: np.ndarray, t: int, sched: NoiseSchedule, eps: np.ndarray
) -> np.ndarray:
    """Noised latent sqrt(abar_t) * z0 + sqrt(1 - abar_t) * eps."""
    z0 = np.asarray(z0, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if not 0 <= t < len(sched):
        raise ValueError(f"step {t} outside schedule of length {len(sched)}")
    if eps.shape != z0.shape:
        raise ValueError("noise shape must match the latent shape")
    a = sched.alphas[t]
    return np.sqrt(a) * z0 + np.sqrt(1.0 - a) * eps


def warp_noise(eps: np.ndarray, grid: ErpGrid) -> np.ndarray:
    """Resample a noise field so its horizontal density follows latitude.

    Output column x of row y reads the source at
    x' = x_c + (x - x_c) * cos(lat(y)), nearest-neighbor with horizontal
    wrap.  Latitudes are taken at integer row indices so the equator row of
    an even-height grid is copied bit-exactly.
    """
    eps = np.asarray(eps)
    if eps.shape[:2] != grid.shape:
        raise ValueError("noise field does not match the grid resolution")
    h, w = grid.shape
    xc = w / 2.0
    rows = latitude_of_row(np.arange(h, dtype=float), grid)
    cos_lat = np.cos(rows)
    x = np.arange(w, dtype=float)
    x_src = xc + (x[None, :] - xc) * cos_lat[:, None]
    idx = np.rint(x_src).astype(int) % w
    return eps[np.arange(h)[:, None], idx]


def decay_weights(grid: ErpGrid, lam: float = DEFAULT_DECAY_LAMBDA) -> np.ndarray:
    """Latitude decay map lam + (1-lam) * cos(lat), constant along rows."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    lat = latitude_of_row(np.arange(grid.height) + 0.5, grid)
    row = lam + (1.0 - lam) * np.cos(lat)
    return np.broadcast_to(row[:, None], grid.shape).copy()


def weighted_loss(pred: np.ndarray, target: np.ndarray, weights: np.ndarray) -> float:
    """Weighted mean squared error, normalized by the total weight."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0):
        raise ValueError("weights must be non-negative")
    err2 = np.broadcast_arrays((pred - target) ** 2, weights)
    total = float(np.sum(err2[1]))
    if total == 0.0:
        raise ValueError("weights sum to zero")
    return float(np.sum(err2[0] * err2[1]) / total)
