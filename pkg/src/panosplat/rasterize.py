"""CPU Gaussian splatting: perspective and panoramic rendering with an
analytic backward pass.

Forward model per pixel x (front-to-back over camera-depth-sorted splats):

    c(x) = sum_k c_k a_k(x) prod_{i<k} (1 - a_i(x))
    a_k(x) = opacity_k * comp_k * exp(-0.5 d^T Conic_k d),  d = x - mean2d_k

where mean2d/Conic come from the local-affine (EWA) projection of the world
covariance, and comp is the anti-alias opacity compensation
sqrt(det A / det(A + aa^2 I)) paired with dilating the 2D covariance by
aa^2 on the diagonal. Contributions with a < 1/255 or Mahalanobis^2 > 9 are
skipped, and blending stops once transmittance falls below 1e-4.

The backward pass differentiates sum(grad_rgb * rgb) with respect to every
Gaussian parameter, treating the skip masks and the depth ordering as
constants (they are flat almost everywhere).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quat import quat_normalize, quat_to_rot, quat_to_rot_jacobian
from .scene import GaussianScene
from .sphere import CUBE_FACE_ORIENTATIONS, ErpGrid, perspective_to_erp

Z_NEAR = 0.01
ALPHA_MIN = 1.0 / 255.0
MAHA_MAX = 9.0
T_MIN = 1e-4
TILE = 16
# splats whose center projects outside this multiple of the image half-extent
# are culled: the linearized footprint of a splat grazing the near plane has
# offset/sigma ~ tz/sigma_world, so its ellipse would cover the whole image
NDC_CULL_MARGIN = 1.3


@dataclass(frozen=True)
class CameraPose:
    """World-from-camera pose: position (3,) and unit quaternion (w,x,y,z).

    The camera looks along its +Z axis with +Y up in camera space."""

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self) -> None:
        pos = np.asarray(self.position, dtype=np.float64)
        ori = np.asarray(self.orientation, dtype=np.float64)
        if pos.shape != (3,) or not np.all(np.isfinite(pos)):
            raise ValueError("position must be a finite 3-vector")
        if ori.shape != (4,):
            raise ValueError("orientation must be a quaternion (w, x, y, z)")
        norm = np.linalg.norm(ori)
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"orientation norm {norm:.8f} deviates from 1 beyond 1e-6")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", ori / norm)

    def rotation(self) -> np.ndarray:
        return quat_to_rot(self.orientation)


@dataclass(frozen=True)
class PerspectiveIntrinsics:
    """Pinhole intrinsics: vertical fov (radians) and image size. The focal
    length derived from fov_y serves both axes; the principal point is the
    image center."""

    fov_y: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if not 0.0 < self.fov_y < np.pi:
            raise ValueError("fov_y must lie in (0, pi)")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be positive")

    @property
    def focal(self) -> float:
        return (self.height / 2.0) / np.tan(self.fov_y / 2.0)


@dataclass
class RenderOutput:
    """rgb (H, W, 3), alpha (H, W) accumulated opacity, depth (H, W) in
    meters: alpha-weighted expected distance from the camera center to the
    contributing Gaussian centers, 0 where alpha is negligible."""

    rgb: np.ndarray
    alpha: np.ndarray
    depth: np.ndarray


@dataclass
class SceneGradients:
    """Per-Gaussian gradients of sum(grad_rgb * rgb), plus the screen-space
    positional gradient magnitude and hit counts used for densification."""

    mu: np.ndarray
    log_scale: np.ndarray
    rot: np.ndarray
    opacity_logit: np.ndarray
    color: np.ndarray
    screen_grad: np.ndarray
    hits: np.ndarray


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _project(scene: GaussianScene, pose: CameraPose, intr: PerspectiveIntrinsics,
             aa_dilation: float):
    """Cull, project, and depth-sort the scene. Returns None if nothing is
    visible, else a dict of per-splat arrays in front-to-back order."""
    if aa_dilation < 0.0:
        raise ValueError("aa_dilation must be >= 0")
    k = len(scene)
    if k == 0:
        return None
    r_wc = pose.rotation()
    r_cw = r_wc.T
    t = (scene.mu - pose.position) @ r_wc  # row-vector form of R_cw (mu - p)
    keep = t[:, 2] > Z_NEAR
    if not np.any(keep):
        return None
    idx0 = np.nonzero(keep)[0]
    t = t[keep]

    f = intr.focal
    cx, cy = intr.width / 2.0, intr.height / 2.0
    tz = t[:, 2]
    mean2d = np.stack([cx + f * t[:, 0] / tz, cy - f * t[:, 1] / tz], axis=-1)
    in_frustum = (np.abs(mean2d[:, 0] - cx) <= NDC_CULL_MARGIN * cx) & (
        np.abs(mean2d[:, 1] - cy) <= NDC_CULL_MARGIN * cy)

    q_hat = quat_normalize(scene.rot[idx0])
    rmat = quat_to_rot(q_hat)
    s = np.exp(scene.log_scale[idx0])
    m3 = rmat * s[:, None, :]
    cov_w = m3 @ np.swapaxes(m3, -1, -2)
    cov_cam = np.einsum("ij,kjl,ml->kim", r_cw, cov_w, r_cw)

    jac = np.zeros((t.shape[0], 2, 3))
    jac[:, 0, 0] = f / tz
    jac[:, 0, 2] = -f * t[:, 0] / tz**2
    jac[:, 1, 1] = -f / tz
    jac[:, 1, 2] = f * t[:, 1] / tz**2
    cov_a = np.einsum("kij,kjl,kml->kim", jac, cov_cam, jac)

    aa = aa_dilation**2
    cov_b = cov_a.copy()
    cov_b[:, 0, 0] += aa
    cov_b[:, 1, 1] += aa
    det_a = cov_a[:, 0, 0] * cov_a[:, 1, 1] - cov_a[:, 0, 1] * cov_a[:, 1, 0]
    det_b = cov_b[:, 0, 0] * cov_b[:, 1, 1] - cov_b[:, 0, 1] * cov_b[:, 1, 0]
    ok = det_b > 1e-12
    if aa > 0.0:
        comp = np.where(ok, np.sqrt(np.maximum(det_a, 0.0) / np.where(ok, det_b, 1.0)), 0.0)
    else:
        comp = np.ones_like(det_b)

    opacity = _sigmoid(scene.opacity_logit[idx0]) * comp
    conic = np.empty_like(cov_b)
    safe_det = np.where(ok, det_b, 1.0)
    conic[:, 0, 0] = cov_b[:, 1, 1] / safe_det
    conic[:, 1, 1] = cov_b[:, 0, 0] / safe_det
    conic[:, 0, 1] = -cov_b[:, 0, 1] / safe_det
    conic[:, 1, 0] = conic[:, 0, 1]

    mid = 0.5 * (cov_b[:, 0, 0] + cov_b[:, 1, 1])
    disc = np.sqrt(np.maximum(0.25 * (cov_b[:, 0, 0] - cov_b[:, 1, 1]) ** 2
                              + cov_b[:, 0, 1] ** 2, 0.0))
    radius = 3.0 * np.sqrt(np.maximum(mid + disc, 0.0))

    x0 = np.floor(mean2d[:, 0] - radius).astype(np.int64)
    x1 = np.ceil(mean2d[:, 0] + radius).astype(np.int64)
    y0 = np.floor(mean2d[:, 1] - radius).astype(np.int64)
    y1 = np.ceil(mean2d[:, 1] + radius).astype(np.int64)
    x0 = np.clip(x0, 0, intr.width)
    x1 = np.clip(x1, 0, intr.width)
    y0 = np.clip(y0, 0, intr.height)
    y1 = np.clip(y1, 0, intr.height)

    vis = ok & in_frustum & (opacity >= ALPHA_MIN) & (x1 > x0) & (y1 > y0)
    if not np.any(vis):
        return None

    order = np.argsort(tz[vis], kind="stable")

    def pick(arr):
        return arr[vis][order]

    return {
        "idx": idx0[vis][order],
        "t": pick(t),
        "mean2d": pick(mean2d),
        "cov_cam": pick(cov_cam),
        "cov_a": pick(cov_a),
        "det_a": pick(det_a),
        "conic": pick(conic),
        "comp": pick(comp),
        "opacity": pick(opacity),
        "jac": pick(jac),
        "color": np.clip(scene.color[idx0], 0.0, 1.0)[vis][order],
        "dist": np.linalg.norm(pick(t), axis=-1),
        "bbox": np.stack([pick(y0), pick(y1), pick(x0), pick(x1)], axis=-1),
        "rmat": pick(rmat),
        "s": pick(s),
        "q_hat": pick(q_hat),
        "q_raw_norm": np.linalg.norm(scene.rot[idx0], axis=-1)[vis][order],
        "sigma": _sigmoid(scene.opacity_logit[idx0])[vis][order],
        "r_cw": r_cw,
        "aa": aa_dilation**2,
    }


def _tile_lists(proj, width: int, height: int):
    """Per-tile splat row indices, preserving front-to-back order."""
    n_ty = (height + TILE - 1) // TILE
    n_tx = (width + TILE - 1) // TILE
    lists: list[list[int]] = [[] for _ in range(n_ty * n_tx)]
    bbox = proj["bbox"]
    for row in range(bbox.shape[0]):
        ty0 = bbox[row, 0] // TILE
        ty1 = (bbox[row, 1] - 1) // TILE
        tx0 = bbox[row, 2] // TILE
        tx1 = (bbox[row, 3] - 1) // TILE
        for ty in range(ty0, ty1 + 1):
            base = ty * n_tx
            for tx in range(tx0, tx1 + 1):
                lists[base + tx].append(row)
    return lists, n_ty, n_tx


def _tile_alphas(proj, rows: np.ndarray, r0: int, r1: int, c0: int, c1: int):
    """Evaluate alphas of the given splats on one tile's pixel centers.

    Returns (dx, dy, m, g, a) with shape (n, p); masked contributions have
    a = 0."""
    ys = np.arange(r0, r1) + 0.5
    xs = np.arange(c0, c1) + 0.5
    yy = np.repeat(ys, len(xs))
    xx = np.tile(xs, len(ys))
    mean = proj["mean2d"][rows]
    conic = proj["conic"][rows]
    dx = xx[None, :] - mean[:, 0, None]
    dy = yy[None, :] - mean[:, 1, None]
    m = (conic[:, 0, 0, None] * dx * dx
         + 2.0 * conic[:, 0, 1, None] * dx * dy
         + conic[:, 1, 1, None] * dy * dy)
    g = np.exp(-0.5 * m)
    a = proj["opacity"][rows, None] * g
    a[(m > MAHA_MAX) | (a < ALPHA_MIN)] = 0.0
    return dx, dy, m, g, a


def render_perspective(
    scene: GaussianScene,
    pose: CameraPose,
    intr: PerspectiveIntrinsics,
    aa_dilation: float = 0.3,
) -> RenderOutput:
    """Render the scene through a pinhole camera over a black background."""
    h, w = intr.height, intr.width
    rgb = np.zeros((h, w, 3))
    alpha = np.zeros((h, w))
    depth_acc = np.zeros((h, w))
    proj = _project(scene, pose, intr, aa_dilation)
    if proj is None:
        return RenderOutput(rgb=rgb, alpha=alpha, depth=depth_acc)

    lists, n_ty, n_tx = _tile_lists(proj, w, h)
    for ty in range(n_ty):
        r0, r1 = ty * TILE, min((ty + 1) * TILE, h)
        for tx in range(n_tx):
            rows = lists[ty * n_tx + tx]
            if not rows:
                continue
            c0, c1 = tx * TILE, min((tx + 1) * TILE, w)
            rows = np.asarray(rows, dtype=np.int64)
            _, _, _, _, a = _tile_alphas(proj, rows, r0, r1, c0, c1)
            t_prev = np.cumprod(1.0 - a, axis=0)
            t_prev = np.vstack([np.ones((1, a.shape[1])), t_prev[:-1]])
            wgt = a * t_prev * (t_prev >= T_MIN)
            shape = (r1 - r0, c1 - c0)
            rgb[r0:r1, c0:c1] += (wgt.T @ proj["color"][rows]).reshape(shape + (3,))
            alpha[r0:r1, c0:c1] += wgt.sum(axis=0).reshape(shape)
            depth_acc[r0:r1, c0:c1] += (wgt * proj["dist"][rows, None]).sum(axis=0).reshape(shape)

    depth = np.where(alpha > 1e-6, depth_acc / np.maximum(alpha, 1e-12), 0.0)
    return RenderOutput(rgb=rgb, alpha=alpha, depth=depth)


def render_backward(
    scene: GaussianScene,
    pose: CameraPose,
    intr: PerspectiveIntrinsics,
    grad_rgb: np.ndarray,
    aa_dilation: float = 0.3,
) -> SceneGradients:
    """Gradients of sum(grad_rgb * rgb) for the render_perspective forward
    pass with the same arguments."""
    k = len(scene)
    grad_rgb = np.asarray(grad_rgb, dtype=np.float64)
    if grad_rgb.shape != (intr.height, intr.width, 3):
        raise ValueError(
            f"grad_rgb shape {grad_rgb.shape} does not match image "
            f"({intr.height}, {intr.width}, 3)"
        )
    zeros = SceneGradients(
        mu=np.zeros((k, 3)),
        log_scale=np.zeros((k, 3)),
        rot=np.zeros((k, 4)),
        opacity_logit=np.zeros(k),
        color=np.zeros((k, 3)),
        screen_grad=np.zeros(k),
        hits=np.zeros(k, dtype=np.int64),
    )
    proj = _project(scene, pose, intr, aa_dilation)
    if proj is None:
        return zeros

    m = proj["mean2d"].shape[0]
    d_color = np.zeros((m, 3))
    d_op_eff = np.zeros(m)
    d_mean = np.zeros((m, 2))
    # quadratic-form gradient accumulators: sum_p dL/dm * [dx^2, dx dy, dy^2]
    p00 = np.zeros(m)
    p01 = np.zeros(m)
    p11 = np.zeros(m)

    lists, n_ty, n_tx = _tile_lists(proj, intr.width, intr.height)
    for ty in range(n_ty):
        r0, r1 = ty * TILE, min((ty + 1) * TILE, intr.height)
        for tx in range(n_tx):
            rows = lists[ty * n_tx + tx]
            if not rows:
                continue
            c0, c1 = tx * TILE, min((tx + 1) * TILE, intr.width)
            rows = np.asarray(rows, dtype=np.int64)
            dx, dy, _, g, a = _tile_alphas(proj, rows, r0, r1, c0, c1)
            t_prev = np.cumprod(1.0 - a, axis=0)
            t_prev = np.vstack([np.ones((1, a.shape[1])), t_prev[:-1]])
            valid = t_prev >= T_MIN
            wgt = a * t_prev * valid

            gtile = grad_rgb[r0:r1, c0:c1].reshape(-1, 3)
            colors = proj["color"][rows]
            # e[n, p] = <grad_rgb(p), color_n>
            e = colors @ gtile.T
            # rows are unique within one tile, so fancy-index += is safe
            d_color[rows] += wgt @ gtile

            ew = e * wgt
            suffix = np.flip(np.cumsum(np.flip(ew, axis=0), axis=0), axis=0) - ew
            da = np.where(
                (a > 0.0) & valid,
                e * t_prev - suffix / (1.0 - a),
                0.0,
            )
            d_op_eff[rows] += (da * g).sum(axis=1)
            dm = -0.5 * da * a
            p00[rows] += (dm * dx * dx).sum(axis=1)
            p01[rows] += (dm * dx * dy).sum(axis=1)
            p11[rows] += (dm * dy * dy).sum(axis=1)
            conic = proj["conic"][rows]
            gx = (dm * -(2.0 * conic[:, 0, 0, None] * dx + 2.0 * conic[:, 0, 1, None] * dy)).sum(axis=1)
            gy = (dm * -(2.0 * conic[:, 1, 1, None] * dy + 2.0 * conic[:, 0, 1, None] * dx)).sum(axis=1)
            d_mean[rows, 0] += gx
            d_mean[rows, 1] += gy

    conic = proj["conic"]
    pmat = np.empty((m, 2, 2))
    pmat[:, 0, 0] = p00
    pmat[:, 0, 1] = p01
    pmat[:, 1, 0] = p01
    pmat[:, 1, 1] = p11
    d_cov_b = -np.einsum("kij,kjl,klm->kim", conic, pmat, conic)

    d_cov_a = d_cov_b.copy()
    aa = proj["aa"]
    if aa > 0.0:
        d_comp = d_op_eff * proj["sigma"]
        det_a = np.maximum(proj["det_a"], 1e-300)
        cov_a = proj["cov_a"]
        inv_a = np.empty_like(cov_a)
        inv_a[:, 0, 0] = cov_a[:, 1, 1] / det_a
        inv_a[:, 1, 1] = cov_a[:, 0, 0] / det_a
        inv_a[:, 0, 1] = -cov_a[:, 0, 1] / det_a
        inv_a[:, 1, 0] = inv_a[:, 0, 1]
        half = 0.5 * d_comp * proj["comp"]
        d_cov_a += half[:, None, None] * (inv_a - conic)

    jac = proj["jac"]
    cov_cam = proj["cov_cam"]
    d_cov_cam = np.einsum("kji,kjl,klm->kim", jac, d_cov_a, jac)
    d_jac = np.einsum("kij,kjl,klm->kim", d_cov_a + np.swapaxes(d_cov_a, -1, -2), jac, cov_cam)

    f = intr.focal
    t = proj["t"]
    tz = t[:, 2]
    d_t = np.zeros_like(t)
    d_t[:, 0] = d_jac[:, 0, 2] * (-f / tz**2)
    d_t[:, 1] = d_jac[:, 1, 2] * (f / tz**2)
    d_t[:, 2] = (d_jac[:, 0, 0] * (-f / tz**2)
                 + d_jac[:, 1, 1] * (f / tz**2)
                 + d_jac[:, 0, 2] * (2.0 * f * t[:, 0] / tz**3)
                 + d_jac[:, 1, 2] * (-2.0 * f * t[:, 1] / tz**3))
    d_t[:, 0] += d_mean[:, 0] * f / tz
    d_t[:, 1] += d_mean[:, 1] * (-f / tz)
    d_t[:, 2] += d_mean[:, 0] * (-f * t[:, 0] / tz**2) + d_mean[:, 1] * (f * t[:, 1] / tz**2)

    r_cw = proj["r_cw"]
    d_cov_w = np.einsum("ji,kjl,lm->kim", r_cw, d_cov_cam, r_cw)
    rmat = proj["rmat"]
    s = proj["s"]
    m3 = rmat * s[:, None, :]
    d_m3 = np.einsum("kij,kjl->kil", d_cov_w + np.swapaxes(d_cov_w, -1, -2), m3)
    d_log_s = np.einsum("kai,kai->ki", rmat, d_m3) * s
    d_rmat = d_m3 * s[:, None, :]
    jac_q = quat_to_rot_jacobian(proj["q_hat"])
    d_q_hat = np.einsum("kqab,kab->kq", jac_q, d_rmat)
    q_hat = proj["q_hat"]
    d_q_raw = (d_q_hat - q_hat * np.sum(q_hat * d_q_hat, axis=-1, keepdims=True))
    d_q_raw /= proj["q_raw_norm"][:, None]

    d_mu = d_t @ r_cw
    d_sigma = d_op_eff * proj["comp"]
    d_logit = d_sigma * proj["sigma"] * (1.0 - proj["sigma"])

    out = zeros
    idx = proj["idx"]
    color_raw = scene.color[idx]
    color_mask = (color_raw > 0.0) & (color_raw < 1.0)
    out.mu[idx] = d_mu
    out.log_scale[idx] = d_log_s
    out.rot[idx] = d_q_raw
    out.opacity_logit[idx] = d_logit
    out.color[idx] = d_color * color_mask
    out.screen_grad[idx] = np.linalg.norm(d_mean, axis=-1) * (max(intr.width, intr.height) / 2.0)
    out.hits[idx] = 1
    return out


def render_erp(
    scene: GaussianScene,
    position: np.ndarray,
    grid: ErpGrid,
    aa_dilation: float = 0.3,
) -> RenderOutput:
    """Render a full panorama at a world position via six 90-degree cube
    faces of size grid.height, composited back onto the ERP grid."""
    size = grid.height
    intr = PerspectiveIntrinsics(fov_y=np.pi / 2.0, width=size, height=size)
    faces = []
    for q in CUBE_FACE_ORIENTATIONS:
        pose = CameraPose(position=np.asarray(position, dtype=np.float64), orientation=q)
        out = render_perspective(scene, pose, intr, aa_dilation)
        faces.append(np.concatenate(
            [out.rgb, out.alpha[..., None], out.depth[..., None]], axis=-1
        ))
    pano = perspective_to_erp(faces, grid)
    return RenderOutput(rgb=pano[..., :3], alpha=pano[..., 3], depth=pano[..., 4])
