"""Scene refinement against perspective views cut from restored panoramas.

The restored ERP frames are projected to pinhole views at evenly spaced
yaws; those views supervise a gradient loop over the Gaussian parameters
with an L1 + SSIM loss, Adam updates per parameter group, and periodic
densify/prune surgery driven by accumulated screen-space gradients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .metrics import SSIM_C1, SSIM_C2, SSIM_WINDOW, _SSIM_PAD, _windowed
from .quat import quat_about_y, quat_normalize, quat_to_rot
from .rasterize import (
    CameraPose,
    PerspectiveIntrinsics,
    render_backward,
    render_perspective,
)
from .scene import GaussianScene, write_gsb
from .sphere import erp_to_perspective

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-15
# positional lr decays exponentially to this fraction of its start value
MU_LR_FINAL_SCALE = 0.01
SPLIT_SCALE_SHRINK = 1.6
# world-size boundary between clone and split, relative to the scene diagonal
DENSIFY_SIZE_RATIO = 0.01
CHECKPOINT_INTERVAL = 1000
DEFAULT_VIEW_FOV = math.pi / 2.0
DEFAULT_VIEWS_PER_FRAME = 4

_PARAM_KEYS = ("mu", "log_scale", "rot", "opacity_logit", "color")


@dataclass(frozen=True)
class RefineConfig:
    """Optimization schedule. Learning rates are per parameter group; the
    positional rate decays exponentially by MU_LR_FINAL_SCALE over the run.
    Densification runs every densify_interval iterations inside
    [densify_start, densify_end]."""

    iters: int = 15000
    lr_mu: float = 1.6e-4
    lr_log_scale: float = 5e-3
    lr_rot: float = 1e-3
    lr_opacity_logit: float = 5e-2
    lr_color: float = 2.5e-3
    lambda_ssim: float = 0.2
    densify_interval: int = 100
    densify_start: int = 500
    densify_end: int = 7500
    densify_grad_threshold: float = 2e-4
    prune_opacity: float = 0.005
    views_per_iter: int = 1

    def __post_init__(self) -> None:
        if self.iters < 1:
            raise ValueError("iters must be >= 1")
        for name in ("lr_mu", "lr_log_scale", "lr_rot", "lr_opacity_logit",
                     "lr_color"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be > 0")
        if not 0.0 <= self.lambda_ssim <= 1.0:
            raise ValueError("lambda_ssim must lie in [0, 1]")
        if self.densify_interval < 1:
            raise ValueError("densify_interval must be >= 1")
        if self.densify_start > self.densify_end:
            raise ValueError("densify window is inverted")
        if self.densify_grad_threshold <= 0.0:
            raise ValueError("densify_grad_threshold must be > 0")
        if not 0.0 <= self.prune_opacity <= 1.0:
            raise ValueError("prune_opacity must lie in [0, 1]")
        if self.views_per_iter < 1:
            raise ValueError("views_per_iter must be >= 1")


@dataclass(frozen=True)
class PseudoView:
    """One supervision view: camera pose, intrinsics, and target image."""

    pose: CameraPose
    intr: PerspectiveIntrinsics
    image: np.ndarray

    def __post_init__(self) -> None:
        img = np.asarray(self.image, dtype=np.float64)
        expected = (self.intr.height, self.intr.width, 3)
        if img.shape != expected:
            raise ValueError(f"view image shape {img.shape}, expected {expected}")
        if not np.all(np.isfinite(img)):
            raise ValueError("view image must be finite")
        if img.min() < 0.0 or img.max() > 1.0:
            raise ValueError("view image values must lie in [0, 1]")
        object.__setattr__(self, "image", img)


@dataclass(frozen=True)
class PseudoGtSet:
    """Nonempty collection of supervision views."""

    views: tuple[PseudoView, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "views", tuple(self.views))
        if not self.views:
            raise ValueError("pseudo ground-truth set is empty")

    def __len__(self) -> int:
        return len(self.views)

    def __getitem__(self, i: int) -> PseudoView:
        return self.views[i]

    def __iter__(self):
        return iter(self.views)


def build_pseudo_gt(
    frames: np.ndarray,
    positions: np.ndarray,
    views_per_frame: int = DEFAULT_VIEWS_PER_FRAME,
    fov: float = DEFAULT_VIEW_FOV,
    out_size: int | None = None,
) -> PseudoGtSet:
    """Cut each ERP frame into pinhole views at evenly spaced yaws.

    frames is (T, H, W, 3) with W = 2H; positions is (T, 3) world camera
    centers. Views are square, pitch 0, rendered by resampling the panorama.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 4 or frames.shape[-1] != 3:
        raise ValueError("frames must have shape (T, H, W, 3)")
    t_n, h, w = frames.shape[:3]
    if w != 2 * h:
        raise ValueError(f"frames must be 2:1 equirectangular, got {h}x{w}")
    positions = np.asarray(positions, dtype=np.float64)
    if positions.shape != (t_n, 3):
        raise ValueError(f"positions must have shape ({t_n}, 3)")
    if not np.all(np.isfinite(positions)):
        raise ValueError("positions must be finite")
    if views_per_frame < 1:
        raise ValueError("views_per_frame must be >= 1")
    if not 0.0 < fov < math.pi:
        raise ValueError("fov must lie in (0, pi)")
    size = h if out_size is None else int(out_size)
    if size < 1:
        raise ValueError("out_size must be positive")

    intr = PerspectiveIntrinsics(fov_y=fov, width=size, height=size)
    views = []
    for t in range(t_n):
        for k in range(views_per_frame):
            yaw = 2.0 * math.pi * k / views_per_frame
            q = quat_about_y(yaw)
            img = erp_to_perspective(frames[t], q, fov, size, size)
            pose = CameraPose(position=positions[t], orientation=q)
            views.append(PseudoView(pose=pose, intr=intr, image=img))
    return PseudoGtSet(views=tuple(views))


def _ssim_value_and_grad(a: np.ndarray, b: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean SSIM of a against b and its gradient with respect to a.

    Shares the kernel and constants with the metrics module, so the value
    matches metrics.ssim exactly. The gradient flows through the three
    windowed moments of a. The mean is taken over the cropped region, whose
    border band is as wide as the kernel radius, so every contributing
    window reads only real pixels and the filter is self-adjoint there.
    """
    h, w, c = a.shape
    crop = np.s_[_SSIM_PAD:-_SSIM_PAD, _SSIM_PAD:-_SSIM_PAD]
    weight = np.zeros((h, w))
    weight[crop] = 1.0 / ((h - 2 * _SSIM_PAD) * (w - 2 * _SSIM_PAD) * c)
    maps = []
    grad = np.empty_like(a)
    for ch in range(c):
        ac = a[..., ch]
        bc = b[..., ch]
        mu_a = _windowed(ac)
        mu_b = _windowed(bc)
        var_a = _windowed(ac * ac) - mu_a**2
        var_b = _windowed(bc * bc) - mu_b**2
        cov = _windowed(ac * bc) - mu_a * mu_b
        num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2)
        den = (mu_a**2 + mu_b**2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
        s = num / den
        maps.append(s)

        a1 = 2.0 * mu_a * mu_b + SSIM_C1
        a2 = 2.0 * cov + SSIM_C2
        b1 = mu_a**2 + mu_b**2 + SSIM_C1
        b2 = var_a + var_b + SSIM_C2
        # partials with respect to the windowed moments of a: the window
        # mean mu_a also feeds var_a and cov, hence the combined term
        ds_dmean = (2.0 * mu_b * (a2 - a1)) / den \
            - 2.0 * mu_a * s * (1.0 / b1 - 1.0 / b2)
        ds_dsq = -s / b2
        ds_dcross = 2.0 * a1 / den
        grad[..., ch] = (
            _windowed(weight * ds_dmean)
            + 2.0 * ac * _windowed(weight * ds_dsq)
            + bc * _windowed(weight * ds_dcross)
        )
    full = np.mean(maps, axis=0)
    return float(np.mean(full[crop])), grad


class _Adam:
    """Adam over the five parameter-group arrays, with row remapping so
    moments follow surviving Gaussians across densify/prune surgery."""

    def __init__(self, params: dict[str, np.ndarray]) -> None:
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray],
             grads: dict[str, np.ndarray], lrs: dict[str, float]) -> None:
        self.t += 1
        c1 = 1.0 - ADAM_BETA1**self.t
        c2 = 1.0 - ADAM_BETA2**self.t
        for key in _PARAM_KEYS:
            g = grads[key]
            m = self.m[key]
            v = self.v[key]
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * g * g
            params[key] -= lrs[key] * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)

    def reindex(self, old_rows: np.ndarray) -> None:
        """Rebuild moment arrays for a new row layout; old_rows[i] is the
        previous index of new row i, or -1 for a fresh row (zero moments)."""
        has = old_rows >= 0
        src = old_rows[has]
        for d in (self.m, self.v):
            for key, arr in d.items():
                out = np.zeros((len(old_rows),) + arr.shape[1:])
                out[has] = arr[src]
                d[key] = out


@dataclass(frozen=True)
class LossRecord:
    """One optimization step: loss parts and the live Gaussian count."""

    iteration: int
    l1: float
    ssim_term: float
    total: float
    count: int

    def to_line(self) -> str:
        return (f"{self.iteration} {self.l1!r} {self.ssim_term!r} "
                f"{self.total!r} {self.count}")


def write_loss_log(records: list[LossRecord], path) -> None:
    """Line-delimited records: iter, L1, SSIM term, total, Gaussian count."""
    text = "\n".join(r.to_line() for r in records)
    Path(path).write_text(text + "\n" if text else "", encoding="ascii")


def _mu_lr(cfg: RefineConfig, it: int) -> float:
    progress = it / max(cfg.iters - 1, 1)
    return cfg.lr_mu * MU_LR_FINAL_SCALE**progress


def _densify_and_prune(
    params: dict[str, np.ndarray],
    adam: _Adam,
    ss_sum: np.ndarray,
    mu_sum: np.ndarray,
    hits: np.ndarray,
    cfg: RefineConfig,
    extent: float,
    lr_mu_now: float,
    rng: np.random.Generator,
    step: int,
) -> dict[str, np.ndarray]:
    """Clone small / split large Gaussians whose mean screen-space gradient
    exceeds the threshold, then prune by opacity. Relocates Adam moments;
    raises if pruning empties the scene."""
    k = len(params["mu"])
    denom = np.maximum(hits, 1)
    cand = ss_sum / denom > cfg.densify_grad_threshold
    sizes = np.exp(params["log_scale"]).max(axis=1)
    large = sizes > DENSIFY_SIZE_RATIO * extent
    clone_idx = np.nonzero(cand & ~large)[0]
    split_idx = np.nonzero(cand & large)[0]

    keep_mask = np.ones(k, dtype=bool)
    keep_mask[split_idx] = False

    clones = {key: params[key][clone_idx].copy() for key in _PARAM_KEYS}
    # nudge each clone one gradient-descent step along its positional gradient
    clones["mu"] -= lr_mu_now * (mu_sum[clone_idx] / denom[clone_idx, None])

    n_split = len(split_idx)
    if n_split:
        rmat = quat_to_rot(quat_normalize(params["rot"][split_idx]))
        s = np.exp(params["log_scale"][split_idx])
        local = rng.standard_normal((n_split, 2, 3)) * s[:, None, :]
        offsets = np.einsum("nij,nkj->nki", rmat, local)
        child_mu = (params["mu"][split_idx][:, None, :] + offsets).reshape(-1, 3)
        splits = {
            "mu": child_mu,
            "log_scale": np.repeat(
                params["log_scale"][split_idx] - math.log(SPLIT_SCALE_SHRINK),
                2, axis=0),
            "rot": np.repeat(params["rot"][split_idx], 2, axis=0),
            "opacity_logit": np.repeat(params["opacity_logit"][split_idx], 2),
            "color": np.repeat(params["color"][split_idx], 2, axis=0),
        }
    else:
        splits = {key: params[key][:0].copy() for key in _PARAM_KEYS}

    merged = {
        key: np.concatenate([params[key][keep_mask], clones[key], splits[key]])
        for key in _PARAM_KEYS
    }
    old_rows = np.concatenate([
        np.nonzero(keep_mask)[0],
        np.full(len(clone_idx) + 2 * n_split, -1, dtype=np.int64),
    ])

    opacity = 1.0 / (1.0 + np.exp(-merged["opacity_logit"]))
    alive = opacity >= cfg.prune_opacity
    if not np.any(alive):
        raise RuntimeError(f"scene emptied by pruning at iteration {step}")
    for key in _PARAM_KEYS:
        merged[key] = merged[key][alive]
    merged["rot"] = quat_normalize(merged["rot"])
    adam.reindex(old_rows[alive])
    return merged


def refine_scene(
    scene: GaussianScene,
    gt: PseudoGtSet,
    cfg: RefineConfig | None = None,
    seed: int = 0,
    checkpoint_dir=None,
) -> tuple[GaussianScene, list[LossRecord]]:
    """Optimize the scene against the pseudo ground-truth views.

    Each iteration renders views_per_iter views drawn from a seeded,
    epoch-cycled shuffle, averages (1 - lambda)·L1 + lambda·(1 - SSIM)
    over them, and applies one Adam step per parameter group. Checkpoints
    go to checkpoint_dir (if given) every CHECKPOINT_INTERVAL iterations.
    Returns the refined scene and the per-iteration loss log.
    """
    if cfg is None:
        cfg = RefineConfig()
    if len(scene) == 0:
        raise ValueError("cannot refine an empty scene")
    if not isinstance(gt, PseudoGtSet):
        raise TypeError("gt must be a PseudoGtSet")
    if cfg.lambda_ssim > 0.0:
        for view in gt:
            if min(view.intr.height, view.intr.width) < SSIM_WINDOW:
                raise ValueError(
                    f"views must be at least {SSIM_WINDOW}px per side "
                    "for the SSIM loss term"
                )

    params = {
        "mu": scene.mu.copy(),
        "log_scale": scene.log_scale.copy(),
        "rot": scene.rot.copy(),
        "opacity_logit": scene.opacity_logit.copy(),
        "color": scene.color.copy(),
    }
    lo, hi = scene.bounds()
    extent = max(float(np.linalg.norm(hi - lo)), 1e-6)

    adam = _Adam(params)
    rng = np.random.default_rng(seed)
    order: list[int] = []

    k = len(params["mu"])
    ss_sum = np.zeros(k)
    mu_sum = np.zeros((k, 3))
    hit_sum = np.zeros(k, dtype=np.int64)
    records: list[LossRecord] = []

    if checkpoint_dir is not None:
        checkpoint_dir = Path(checkpoint_dir)
        checkpoint_dir.mkdir(parents=True, exist_ok=True)

    for it in range(cfg.iters):
        picked = []
        for _ in range(cfg.views_per_iter):
            if not order:
                order = list(rng.permutation(len(gt)))
            picked.append(order.pop(0))

        current = GaussianScene(**params)
        n_views = len(picked)
        grads_acc = {key: np.zeros_like(params[key]) for key in _PARAM_KEYS}
        l1_total = 0.0
        ssim_term_total = 0.0
        for vi in picked:
            view = gt[vi]
            out = render_perspective(current, view.pose, view.intr)
            diff = out.rgb - view.image
            l1 = float(np.mean(np.abs(diff)))
            if l1 == 0.0 and np.array_equal(out.rgb, view.image):
                # exact fit: the true gradient is zero, and computing it
                # numerically would leave float dust that Adam, being
                # scale-free, would amplify into full-size steps
                continue
            grad_rgb = (1.0 - cfg.lambda_ssim) * np.sign(diff) / diff.size
            if cfg.lambda_ssim > 0.0:
                ssim_val, ssim_grad = _ssim_value_and_grad(out.rgb, view.image)
                ssim_term = 1.0 - ssim_val
                grad_rgb -= cfg.lambda_ssim * ssim_grad
            else:
                ssim_term = 0.0
            l1_total += l1
            ssim_term_total += ssim_term
            g = render_backward(current, view.pose, view.intr, grad_rgb)
            parts = {
                "mu": g.mu, "log_scale": g.log_scale, "rot": g.rot,
                "opacity_logit": g.opacity_logit, "color": g.color,
            }
            for key in _PARAM_KEYS:
                grads_acc[key] += parts[key]
            # densification compares against a resolution-independent
            # threshold, so positional gradients go to [-1, 1] screen units
            ss_sum += g.screen_grad * (max(view.intr.width, view.intr.height) / 2.0)
            mu_sum += g.mu
            hit_sum += g.hits

        l1_mean = l1_total / n_views
        ssim_mean = ssim_term_total / n_views
        total = (1.0 - cfg.lambda_ssim) * l1_mean + cfg.lambda_ssim * ssim_mean
        if not math.isfinite(total):
            raise RuntimeError(f"non-finite loss at iteration {it}")
        records.append(LossRecord(
            iteration=it, l1=l1_mean, ssim_term=ssim_mean, total=total,
            count=len(params["mu"]),
        ))

        lr_mu_now = _mu_lr(cfg, it)
        lrs = {
            "mu": lr_mu_now,
            "log_scale": cfg.lr_log_scale,
            "rot": cfg.lr_rot,
            "opacity_logit": cfg.lr_opacity_logit,
            "color": cfg.lr_color,
        }
        grads = {key: grads_acc[key] / n_views for key in _PARAM_KEYS}
        adam.step(params, grads, lrs)
        for key in _PARAM_KEYS:
            if not np.all(np.isfinite(params[key])):
                raise RuntimeError(f"non-finite parameters at iteration {it}")

        step = it + 1
        if (cfg.densify_start <= step <= cfg.densify_end
                and step % cfg.densify_interval == 0):
            params = _densify_and_prune(
                params, adam, ss_sum, mu_sum, hit_sum, cfg, extent,
                lr_mu_now, rng, step,
            )
            k = len(params["mu"])
            ss_sum = np.zeros(k)
            mu_sum = np.zeros((k, 3))
            hit_sum = np.zeros(k, dtype=np.int64)

        if checkpoint_dir is not None and step % CHECKPOINT_INTERVAL == 0:
            snap = {key: val.copy() for key, val in params.items()}
            snap["rot"] = quat_normalize(snap["rot"])
            write_gsb(GaussianScene(**snap),
                      checkpoint_dir / f"scene_{step:06d}.gsb")

    params["rot"] = quat_normalize(params["rot"])
    return GaussianScene(**params), records
