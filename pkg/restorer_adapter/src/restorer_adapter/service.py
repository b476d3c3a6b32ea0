"""Request-serving loop: discover, validate, restore, answer.

Requests are handled sequentially in scene-id order.  Discovery only
considers directories whose REQUEST_READY marker exists, so a requester
still writing frames is never raced; a DONE marker (written whether the
scene succeeded or errored) makes handling idempotent across restarts.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .backends import BACKENDS
from .protocol import (
    DONE_MARKER,
    REQUEST_MARKER,
    RequestError,
    atomic_write_bytes,
    load_request,
    write_error,
    write_result,
)

log = logging.getLogger(__name__)

Hook = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass
class AdapterConfig:
    exchange_dir: Path
    backend: str = "identity"
    poll_interval: float = 0.5

    def __post_init__(self):
        self.exchange_dir = Path(self.exchange_dir)
        if not self.exchange_dir.is_dir():
            raise ValueError(
                f"exchange_dir is not a directory: {self.exchange_dir}"
            )
        if self.backend not in BACKENDS:
            raise ValueError(
                f"unknown backend {self.backend!r}, "
                f"choose from {sorted(BACKENDS)}"
            )
        if not self.poll_interval > 0:
            raise ValueError("poll_interval must be > 0")


def discover_requests(cfg: AdapterConfig) -> list[Path]:
    """Scene directories with a request marker and no DONE marker yet."""
    found = []
    for marker in sorted(cfg.exchange_dir.glob(f"*/{REQUEST_MARKER}")):
        root = marker.parent
        if not (root / DONE_MARKER).exists():
            found.append(root)
    return found


def _upsample(frames: np.ndarray, scale: int) -> np.ndarray:
    if scale == 1:
        return frames
    return frames.repeat(scale, axis=1).repeat(scale, axis=2)


def serve_request(root: Path, hook: Hook) -> bool:
    """Handle one request directory end to end.

    Returns True if a result was produced, False if an ERROR was written.
    The DONE marker is written either way, last, so a crash before it
    lets a restarted adapter retry the scene.
    """
    root = Path(root)
    try:
        req = load_request(root)
        restored = np.asarray(hook(req.frames, req.alpha, req.anchor),
                              dtype=float)
        if restored.shape != req.frames.shape:
            raise RequestError(
                f"backend returned shape {restored.shape}, "
                f"expected {req.frames.shape}"
            )
        if not np.all(np.isfinite(restored)):
            raise RequestError("backend returned non-finite values")
        restored = np.clip(restored, 0.0, 1.0)
        write_result(root, _upsample(restored, req.target_scale))
        ok = True
    except Exception as e:
        log.warning("request %s failed: %s", root.name, e)
        write_error(root, str(e))
        ok = False
    atomic_write_bytes(root / DONE_MARKER, b"")
    return ok


def serve_once(cfg: AdapterConfig, hook: Hook | None = None) -> int:
    """Serve every pending request once; returns how many were handled."""
    fn = hook if hook is not None else BACKENDS[cfg.backend]
    handled = 0
    for root in discover_requests(cfg):
        served = serve_request(root, fn)
        log.info("%s: %s", root.name, "ok" if served else "error")
        handled += 1
    return handled


def serve_forever(cfg: AdapterConfig, hook: Hook | None = None,
                  stop: threading.Event | None = None) -> None:
    """Poll the exchange directory until `stop` is set.

    With stop=None this never returns; the CLI wires process signals to
    the event so a signal produces a clean exit.
    """
    while stop is None or not stop.is_set():
        serve_once(cfg, hook)
        if stop is None:
            time.sleep(cfg.poll_interval)
        else:
            stop.wait(cfg.poll_interval)
