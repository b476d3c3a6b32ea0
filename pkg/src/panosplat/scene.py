"""Gaussian scene model and its binary container format.

A scene is a flat set of anisotropic 3D Gaussians, each carrying position,
per-axis log scale, an orientation quaternion (w, x, y, z), an opacity logit,
and an RGB color. Arrays are float64 in memory; the on-disk format stores
little-endian float32 records, so (de)serialization round-trips bit-exactly
for every value the format can represent (in particular anything previously
loaded from disk).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .quat import quat_to_rot

GSB_MAGIC = b"GSBINV01"

_RECORD_DTYPE = np.dtype(
    [
        ("mu", "<f4", (3,)),
        ("log_scale", "<f4", (3,)),
        ("rot", "<f4", (4,)),
        ("opacity_logit", "<f4"),
        ("color", "<f4", (3,)),
    ]
)

# renormalize quaternions inside this tolerance, reject beyond it
QUAT_NORM_TOL = 1e-3


class SceneFormatError(ValueError):
    """Raised on malformed scene container bytes; names the byte offset."""


@dataclass(frozen=True)
class Gaussian:
    """One primitive. All fields finite; rot need not be exactly unit-norm
    (it is renormalized where used, within QUAT_NORM_TOL)."""

    mu: np.ndarray
    log_scale: np.ndarray
    rot: np.ndarray
    opacity_logit: float
    color: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "mu", _vec(self.mu, 3, "mu"))
        object.__setattr__(self, "log_scale", _vec(self.log_scale, 3, "log_scale"))
        object.__setattr__(self, "rot", _vec(self.rot, 4, "rot"))
        object.__setattr__(self, "color", _vec(self.color, 3, "color"))
        if not np.isfinite(self.opacity_logit):
            raise ValueError("opacity_logit must be finite")


def _vec(v, n: int, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be finite")
    return v


def _unit_rows(rot: np.ndarray, tol: float = QUAT_NORM_TOL) -> np.ndarray:
    norms = np.linalg.norm(rot, axis=-1)
    if np.any(np.abs(norms - 1.0) > tol):
        worst = int(np.argmax(np.abs(norms - 1.0)))
        raise ValueError(
            f"quaternion norm {norms.flat[worst]:.6f} deviates from 1 beyond {tol}"
        )
    return rot / norms[..., None]


@dataclass
class GaussianScene:
    """Structure-of-arrays scene: mu (K,3), log_scale (K,3), rot (K,4),
    opacity_logit (K,), color (K,3)."""

    mu: np.ndarray
    log_scale: np.ndarray
    rot: np.ndarray
    opacity_logit: np.ndarray
    color: np.ndarray

    def __post_init__(self) -> None:
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.log_scale = np.asarray(self.log_scale, dtype=np.float64)
        self.rot = np.asarray(self.rot, dtype=np.float64)
        self.opacity_logit = np.asarray(self.opacity_logit, dtype=np.float64)
        self.color = np.asarray(self.color, dtype=np.float64)
        k = self.mu.shape[0] if self.mu.ndim == 2 else -1
        expected = {
            "mu": (k, 3),
            "log_scale": (k, 3),
            "rot": (k, 4),
            "opacity_logit": (k,),
            "color": (k, 3),
        }
        for name, shape in expected.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")

    def __len__(self) -> int:
        return self.mu.shape[0]

    def __getitem__(self, i: int) -> Gaussian:
        return Gaussian(
            mu=self.mu[i],
            log_scale=self.log_scale[i],
            rot=self.rot[i],
            opacity_logit=float(self.opacity_logit[i]),
            color=self.color[i],
        )

    @classmethod
    def from_gaussians(cls, gaussians) -> "GaussianScene":
        gaussians = list(gaussians)
        if not gaussians:
            return cls.empty()
        return cls(
            mu=np.stack([g.mu for g in gaussians]),
            log_scale=np.stack([g.log_scale for g in gaussians]),
            rot=np.stack([g.rot for g in gaussians]),
            opacity_logit=np.array([g.opacity_logit for g in gaussians]),
            color=np.stack([g.color for g in gaussians]),
        )

    @classmethod
    def empty(cls) -> "GaussianScene":
        return cls(
            mu=np.zeros((0, 3)),
            log_scale=np.zeros((0, 3)),
            rot=np.zeros((0, 4)),
            opacity_logit=np.zeros((0,)),
            color=np.zeros((0, 3)),
        )

    def opacities(self) -> np.ndarray:
        """Opacity in (0, 1) via the logistic function."""
        return 1.0 / (1.0 + np.exp(-self.opacity_logit))

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned (min, max) of the Gaussian centers."""
        if len(self) == 0:
            raise ValueError("empty scene has no bounds")
        return self.mu.min(axis=0), self.mu.max(axis=0)

    def copy(self) -> "GaussianScene":
        return GaussianScene(
            mu=self.mu.copy(),
            log_scale=self.log_scale.copy(),
            rot=self.rot.copy(),
            opacity_logit=self.opacity_logit.copy(),
            color=self.color.copy(),
        )


def covariance(g: Gaussian) -> np.ndarray:
    """World-space covariance R S S^T R^T with S = diag(exp(log_scale))."""
    return covariance_batch(g.log_scale[None], g.rot[None])[0]


def covariance_batch(log_scale: np.ndarray, rot: np.ndarray) -> np.ndarray:
    """(K, 3) log scales and (K, 4) quaternions -> (K, 3, 3) covariances."""
    rot = _unit_rows(np.asarray(rot, dtype=np.float64))
    r = quat_to_rot(rot)
    s = np.exp(np.asarray(log_scale, dtype=np.float64))
    m = r * s[:, None, :]
    return m @ np.swapaxes(m, -1, -2)


def eval_density(g: Gaussian, p: np.ndarray) -> np.ndarray:
    """Unnormalized density exp(-0.5 (p - mu)^T Sigma^-1 (p - mu)).

    p is (3,) or (..., 3); returns a scalar array of the leading shape.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.shape[-1] != 3:
        raise ValueError("points must have a trailing dimension of 3")
    cov = covariance(g)
    det = np.linalg.det(cov)
    if not np.isfinite(det) or det < 1e-300:
        raise ValueError("covariance is singular")
    diff = p - g.mu
    sol = np.linalg.solve(cov, diff[..., None])[..., 0]
    m = np.einsum("...i,...i->...", diff, sol)
    return np.exp(-0.5 * m)


def serialize(scene: GaussianScene) -> bytes:
    """Pack a scene into the binary container (magic, u32 count, u32
    sh_degree = 0, then float32 records). Values are cast to float32."""
    k = len(scene)
    records = np.empty(k, dtype=_RECORD_DTYPE)
    records["mu"] = scene.mu.astype("<f4")
    records["log_scale"] = scene.log_scale.astype("<f4")
    records["rot"] = scene.rot.astype("<f4")
    records["opacity_logit"] = scene.opacity_logit.astype("<f4")
    records["color"] = scene.color.astype("<f4")
    header = GSB_MAGIC + struct.pack("<II", k, 0)
    return header + records.tobytes()


def deserialize(data: bytes) -> GaussianScene:
    """Parse container bytes; raises SceneFormatError naming the byte offset
    of the first problem."""
    if len(data) < 8 or data[:8] != GSB_MAGIC:
        raise SceneFormatError("bad magic at byte offset 0")
    if len(data) < 16:
        raise SceneFormatError(f"truncated header at byte offset {len(data)}")
    k, sh_degree = struct.unpack_from("<II", data, 8)
    if sh_degree != 0:
        raise SceneFormatError(f"unsupported sh_degree {sh_degree} at byte offset 12")
    body = data[16:]
    expected = k * _RECORD_DTYPE.itemsize
    if len(body) < expected:
        raise SceneFormatError(f"truncated records at byte offset {16 + len(body)}")
    if len(body) > expected:
        raise SceneFormatError(f"trailing bytes at byte offset {16 + expected}")
    records = np.frombuffer(body, dtype=_RECORD_DTYPE)
    fields = {
        "mu": records["mu"],
        "log_scale": records["log_scale"],
        "rot": records["rot"],
        "opacity_logit": records["opacity_logit"],
        "color": records["color"],
    }
    for name, arr in fields.items():
        if not np.all(np.isfinite(arr)):
            bad = int(np.argmin(np.isfinite(arr).reshape(arr.shape[0], -1).all(axis=1)))
            offset = 16 + bad * _RECORD_DTYPE.itemsize
            raise SceneFormatError(
                f"non-finite {name} in record {bad} at byte offset {offset}"
            )
    return GaussianScene(
        mu=fields["mu"].astype(np.float64),
        log_scale=fields["log_scale"].astype(np.float64),
        rot=fields["rot"].astype(np.float64),
        opacity_logit=fields["opacity_logit"].astype(np.float64),
        color=fields["color"].astype(np.float64),
    )


def write_gsb(scene: GaussianScene, path) -> None:
    with open(path, "wb") as f:
        f.write(serialize(scene))


def read_gsb(path) -> GaussianScene:
    with open(path, "rb") as f:
        return deserialize(f.read())
