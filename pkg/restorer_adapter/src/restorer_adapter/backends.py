"""Built-in restoration backends, and the hook where a model plugs in.

A backend is a single function

    backend(frames, alphas, anchor) -> frames

with float arrays in [0, 1]: frames (T, H, W, 3), alphas (T, H, W),
anchor (H, W, 3).  The return value keeps the input spatial size; the
service layer applies any requested integer upsampling afterwards.  A
learned video restorer replaces one of these functions, nothing else in
the adapter changes.
"""

from __future__ import annotations

import numpy as np

HOLE_ALPHA_THRESHOLD = 0.5


def identity(frames: np.ndarray, alphas: np.ndarray,
             anchor: np.ndarray) -> np.ndarray:
    """Return the degraded frames unchanged."""
    return frames


def _fill(color: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """Weighted push-pull: average down to 1x1, upsample into zero-weight
    pixels only. Requires weight to be positive somewhere."""
    if color.shape[0] == 1 and color.shape[1] == 1:
        return color
    pad_h = color.shape[0] % 2
    pad_w = color.shape[1] % 2
    c = np.pad(color, ((0, pad_h), (0, pad_w), (0, 0)))
    w = np.pad(weight, ((0, pad_h), (0, pad_w)))
    h2, w2 = c.shape[0] // 2, c.shape[1] // 2
    wc = (w[..., None] * c).reshape(h2, 2, w2, 2, 3).sum(axis=(1, 3))
    ww = w.reshape(h2, 2, w2, 2).sum(axis=(1, 3))
    coarse = np.where(ww[..., None] > 0,
                      wc / np.maximum(ww, 1e-300)[..., None], 0.0)
    coarse = _fill(coarse, ww)
    up = coarse.repeat(2, axis=0).repeat(2, axis=1)
    up = up[: color.shape[0], : color.shape[1]]
    return np.where(weight[..., None] > 0, color, up)


def pushpull(frames: np.ndarray, alphas: np.ndarray,
             anchor: np.ndarray) -> np.ndarray:
    """Fill low-alpha pixels per frame by pyramid interpolation of the
    observed ones; frame 0's holes come from the anchor instead."""
    out = frames.copy()
    for t in range(len(frames)):
        holes = alphas[t] < HOLE_ALPHA_THRESHOLD
        if not np.any(holes):
            continue
        weight = np.where(holes, 0.0, alphas[t])
        if not np.any(weight > 0):
            out[t] = np.mean(anchor, axis=(0, 1))[None, None, :]
            continue
        filled = _fill(frames[t], weight)
        out[t] = np.where(holes[..., None], filled, frames[t])
    holes0 = alphas[0] < HOLE_ALPHA_THRESHOLD
    out[0] = np.where(holes0[..., None], anchor, out[0])
    return np.clip(out, 0.0, 1.0)


BACKENDS = {
    "identity": identity,
    "pushpull": pushpull,
}
