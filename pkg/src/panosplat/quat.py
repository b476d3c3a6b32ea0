"""Quaternion helpers shared by the scene model, rasterizer, and planners.

Quaternions are stored as (w, x, y, z). All rotations are world-from-camera
(or world-from-primitive) unless a function says otherwise.
"""

from __future__ import annotations

import numpy as np


def quat_normalize(q: np.ndarray) -> np.ndarray:
    """Return q / ||q||. Accepts (..., 4); raises on near-zero norm."""
    q = np.asarray(q, dtype=np.float64)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(norm < 1e-12):
        raise ValueError("quaternion norm is zero")
    return q / norm


def quat_to_rot(q: np.ndarray) -> np.ndarray:
    """Rotation matrices for unit quaternions, shape (..., 4) -> (..., 3, 3)."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    out = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    out[..., 0, 0] = 1.0 - 2.0 * (y * y + z * z)
    out[..., 0, 1] = 2.0 * (x * y - w * z)
    out[..., 0, 2] = 2.0 * (x * z + w * y)
    out[..., 1, 0] = 2.0 * (x * y + w * z)
    out[..., 1, 1] = 1.0 - 2.0 * (x * x + z * z)
    out[..., 1, 2] = 2.0 * (y * z - w * x)
    out[..., 2, 0] = 2.0 * (x * z - w * y)
    out[..., 2, 1] = 2.0 * (y * z + w * x)
    out[..., 2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return out


def quat_about_y(angle: float) -> np.ndarray:
    """Unit quaternion rotating about the world up axis by `angle` radians."""
    h = 0.5 * float(angle)
    return np.array([np.cos(h), 0.0, np.sin(h), 0.0])


def quat_about_x(angle: float) -> np.ndarray:
    h = 0.5 * float(angle)
    return np.array([np.cos(h), np.sin(h), 0.0, 0.0])


def quat_to_rot_jacobian(q: np.ndarray) -> np.ndarray:
    """d(rotation matrix)/d(unit quaternion), shape (K, 4) -> (K, 4, 3, 3).

    Valid for unit quaternions; callers differentiating through a raw
    (unnormalized) parameter must chain with the normalization Jacobian
    (I - qq^T) / ||q_raw||.
    """
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    zero = np.zeros_like(w)
    jac = np.empty(q.shape[:-1] + (4, 3, 3), dtype=np.float64)
    jac[..., 0, :, :] = 2.0 * np.stack(
        [
            np.stack([zero, -z, y], axis=-1),
            np.stack([z, zero, -x], axis=-1),
            np.stack([-y, x, zero], axis=-1),
        ],
        axis=-2,
    )
    jac[..., 1, :, :] = 2.0 * np.stack(
        [
            np.stack([zero, y, z], axis=-1),
            np.stack([y, -2.0 * x, -w], axis=-1),
            np.stack([z, w, -2.0 * x], axis=-1),
        ],
        axis=-2,
    )
    jac[..., 2, :, :] = 2.0 * np.stack(
        [
            np.stack([-2.0 * y, x, w], axis=-1),
            np.stack([x, zero, z], axis=-1),
            np.stack([-w, z, -2.0 * y], axis=-1),
        ],
        axis=-2,
    )
    jac[..., 3, :, :] = 2.0 * np.stack(
        [
            np.stack([-2.0 * z, -w, x], axis=-1),
            np.stack([w, -2.0 * z, y], axis=-1),
            np.stack([x, y, zero], axis=-1),
        ],
        axis=-2,
    )
    return jac
