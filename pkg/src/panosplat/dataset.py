"""Paired sample generation: ground-truth video vs coarse-scene video.

A sample starts from a dense "true" GaussianScene standing in for a real
indoor environment. The tool plans a linear camera path inside it, renders
the ground-truth panoramic video along the path, lifts the first frame's
RGB-D into a coarse scene, renders that coarse scene along the identical
poses (RGB plus alpha), and writes everything into a frozen directory
layout with a manifest.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .io_formats import (
    read_pfm,
    read_png,
    read_trajectory,
    to_u8,
    trajectory_text,
    write_pfm,
    write_png,
    write_trajectory,
)
from .lift import Panorama, lift_panorama
from .nav import build_nav_map, longest_linear_segment, trajectory_to_poses
from .rasterize import render_erp
from .scene import GaussianScene
from .sphere import ErpGrid

log = logging.getLogger(__name__)

MANIFEST_SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.json"
DEFAULT_N_FRAMES = 41
DEFAULT_FPS = 10.0
DEFAULT_SPEED = 1.0
DEFAULT_CAMERA_HEIGHT = 1.6
# closed-room invariant: alpha >= CLOSED_ROOM_ALPHA on >= CLOSED_ROOM_FRACTION
# of the origin panorama's pixels
CLOSED_ROOM_ALPHA = 0.95
CLOSED_ROOM_FRACTION = 0.90
# wider than the lift default (0.7): the smallest gain at which the lifted
# sheet re-renders fully opaque (u8 alpha 255) at the panorama's own
# resolution, so frame 0 of the degraded video has no quantized holes
LIFT_SCALE_GAIN = 0.9
FIXTURE_KINDS = ("box_room", "corridor", "cluttered")
THREADS_ENV_VAR = "PANOSPLAT_THREADS"


@dataclass(frozen=True)
class SceneSpec:
    """A ground-truth scene plus its room box and generation seed."""

    gt_scene: GaussianScene
    room_bounds: tuple[np.ndarray, np.ndarray]
    seed: int

    def __post_init__(self) -> None:
        if len(self.gt_scene) == 0:
            raise ValueError("gt_scene is empty")
        lo = np.asarray(self.room_bounds[0], dtype=np.float64)
        hi = np.asarray(self.room_bounds[1], dtype=np.float64)
        if lo.shape != (3,) or hi.shape != (3,):
            raise ValueError("room_bounds must be a pair of 3-vectors")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("room_bounds must be finite")
        if np.any(lo >= hi):
            raise ValueError("room_bounds box is empty or inverted")
        object.__setattr__(self, "room_bounds", (lo, hi))


def closed_room_fraction(spec: SceneSpec, grid: ErpGrid) -> float:
    """Fraction of origin-panorama pixels with alpha >= CLOSED_ROOM_ALPHA."""
    out = render_erp(spec.gt_scene, np.zeros(3), grid, aa_dilation=0.0)
    return float(np.mean(out.alpha >= CLOSED_ROOM_ALPHA))


def _surfel_sheet(points: np.ndarray, colors: np.ndarray, sigma: float,
                  opacity: float = 0.995) -> GaussianScene:
    k = points.shape[0]
    rot = np.zeros((k, 4))
    rot[:, 0] = 1.0
    logit = float(np.log(opacity / (1.0 - opacity)))
    return GaussianScene(
        mu=points,
        log_scale=np.full((k, 3), np.log(sigma)),
        rot=rot,
        opacity_logit=np.full(k, logit),
        color=colors,
    )


def _plane_points(u_lo, u_hi, v_lo, v_hi, spacing, rng):
    """Jittered grid covering [u_lo, u_hi] x [v_lo, v_hi]."""
    us = np.arange(u_lo + spacing / 2.0, u_hi, spacing)
    vs = np.arange(v_lo + spacing / 2.0, v_hi, spacing)
    uu, vv = np.meshgrid(us, vs)
    uu = uu.ravel() + rng.uniform(-0.25, 0.25, uu.size) * spacing
    vv = vv.ravel() + rng.uniform(-0.25, 0.25, vv.size) * spacing
    return uu, vv


def _wall_colors(uu: np.ndarray, vv: np.ndarray, base: np.ndarray,
                 rng: np.random.Generator) -> np.ndarray:
    """Smooth low-frequency coloring: base tint, mild gradients, light grain."""
    n = uu.shape[0]
    c = np.tile(base, (n, 1))
    c += 0.08 * np.sin(0.9 * uu)[:, None] * np.array([1.0, 0.6, 0.3])
    c += 0.06 * np.cos(1.3 * vv)[:, None] * np.array([0.4, 1.0, 0.7])
    c += rng.uniform(-0.02, 0.02, (n, 3))
    return np.clip(c, 0.02, 0.98)


def _box_shell(x_half, z_half, floor_y, ceil_y, spacing, rng):
    """Six Gaussian sheets closing a rectangular room around the origin."""
    palette = {
        "floor": np.array([0.45, 0.36, 0.28]),
        "ceil": np.array([0.82, 0.82, 0.80]),
        "x+": np.array([0.55, 0.60, 0.70]),
        "x-": np.array([0.62, 0.55, 0.48]),
        "z+": np.array([0.50, 0.62, 0.55]),
        "z-": np.array([0.66, 0.52, 0.58]),
    }
    pts, cols = [], []

    uu, vv = _plane_points(-x_half, x_half, -z_half, z_half, spacing, rng)
    pts.append(np.stack([uu, np.full_like(uu, floor_y), vv], axis=-1))
    cols.append(_wall_colors(uu, vv, palette["floor"], rng))
    uu, vv = _plane_points(-x_half, x_half, -z_half, z_half, spacing, rng)
    pts.append(np.stack([uu, np.full_like(uu, ceil_y), vv], axis=-1))
    cols.append(_wall_colors(uu, vv, palette["ceil"], rng))

    for sign, name in ((x_half, "x+"), (-x_half, "x-")):
        uu, vv = _plane_points(floor_y, ceil_y, -z_half, z_half, spacing, rng)
        pts.append(np.stack([np.full_like(uu, sign), uu, vv], axis=-1))
        cols.append(_wall_colors(uu, vv, palette[name], rng))
    for sign, name in ((z_half, "z+"), (-z_half, "z-")):
        uu, vv = _plane_points(-x_half, x_half, floor_y, ceil_y, spacing, rng)
        pts.append(np.stack([uu, vv, np.full_like(uu, sign)], axis=-1))
        cols.append(_wall_colors(uu, vv, palette[name], rng))

    return np.concatenate(pts), np.concatenate(cols)


def _furniture_blobs(rng, x_half, z_half, floor_y, n_blobs, spacing):
    """Boxy clutter standing on the floor, kept away from the origin."""
    pts, cols = [], []
    for _ in range(n_blobs):
        for _attempt in range(50):
            cx = rng.uniform(-x_half + 0.5, x_half - 0.5)
            cz = rng.uniform(-z_half + 0.5, z_half - 0.5)
            if np.hypot(cx, cz) > 1.2:
                break
        else:
            continue
        w = rng.uniform(0.3, 0.6)
        d = rng.uniform(0.3, 0.6)
        h = rng.uniform(0.5, 1.1)
        base = rng.uniform(0.2, 0.8, 3)
        # five visible faces of the block (no bottom)
        uu, vv = _plane_points(-w, w, -d, d, spacing, rng)
        pts.append(np.stack([cx + uu, np.full_like(uu, floor_y + h),
                             cz + vv], axis=-1))
        cols.append(_wall_colors(uu, vv, base, rng))
        for sx in (-w, w):
            uu, vv = _plane_points(floor_y, floor_y + h, -d, d, spacing, rng)
            pts.append(np.stack([np.full_like(uu, cx + sx), uu, cz + vv],
                                axis=-1))
            cols.append(_wall_colors(uu, vv, base, rng))
        for sz in (-d, d):
            uu, vv = _plane_points(-w, w, floor_y, floor_y + h, spacing, rng)
            pts.append(np.stack([cx + uu, vv, np.full_like(uu, cz + sz)],
                                axis=-1))
            cols.append(_wall_colors(uu, vv, base, rng))
    if not pts:
        return np.zeros((0, 3)), np.zeros((0, 3))
    return np.concatenate(pts), np.concatenate(cols)


def synth_fixture_scene(kind: str, seed: int,
                        surfel_spacing: float = 0.15) -> SceneSpec:
    """Procedural closed-room scene, deterministic per (kind, seed).

    The room is built in the start camera's frame: the camera sits at the
    origin, the floor at -1.6 m. Surfel spacing bounds the resolution the
    closed-room property holds at; the default suits panoramas up to about
    128 rows.
    """
    if kind not in FIXTURE_KINDS:
        raise ValueError(f"unknown fixture kind {kind!r}, "
                         f"expected one of {FIXTURE_KINDS}")
    rng = np.random.default_rng(seed)
    floor_y = -DEFAULT_CAMERA_HEIGHT
    ceil_y = rng.uniform(0.9, 1.3)
    if kind == "corridor":
        x_half = rng.uniform(0.9, 1.2)
        z_half = rng.uniform(3.8, 5.0)
    else:
        x_half = rng.uniform(2.2, 3.2)
        z_half = rng.uniform(2.6, 4.0)

    pts, cols = _box_shell(x_half, z_half, floor_y, ceil_y,
                           surfel_spacing, rng)
    if kind == "cluttered":
        n_blobs = int(rng.integers(3, 6))
        bp, bc = _furniture_blobs(rng, x_half, z_half, floor_y, n_blobs,
                                  surfel_spacing)
        pts = np.concatenate([pts, bp])
        cols = np.concatenate([cols, bc])

    scene = _surfel_sheet(pts, cols, sigma=0.7 * surfel_spacing)
    lo = np.array([-x_half, floor_y, -z_half])
    hi = np.array([x_half, ceil_y, z_half])
    return SceneSpec(gt_scene=scene, room_bounds=(lo, hi), seed=seed)


def _frame_name(i: int) -> str:
    return f"{i:05d}.png"


def _sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("ascii")).hexdigest()


def generate_pair(
    spec: SceneSpec,
    grid: ErpGrid,
    out_dir,
    n_frames: int = DEFAULT_N_FRAMES,
    fps: float = DEFAULT_FPS,
    speed: float = DEFAULT_SPEED,
    lift_stride: int = 1,
    lift_scale_gain: float = LIFT_SCALE_GAIN,
) -> Path | None:
    """Write one paired sample under out_dir; None if the sample is skipped.

    Pipeline: origin panorama -> navigation map -> longest linear segment ->
    ground-truth video from the segment start -> coarse scene lifted from
    frame 0 -> degraded RGB+alpha video along the identical poses. A scene
    whose planner finds only a zero-length path is skipped (logged), since
    a static video pair carries no disocclusion signal.
    """
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    origin = render_erp(spec.gt_scene, np.zeros(3), grid, aa_dilation=0.0)
    frac = float(np.mean(origin.alpha >= CLOSED_ROOM_ALPHA))
    if frac < CLOSED_ROOM_FRACTION:
        raise ValueError(
            f"scene is not a closed room: alpha >= {CLOSED_ROOM_ALPHA} on "
            f"only {frac:.1%} of origin pixels"
        )
    nav = build_nav_map(
        Panorama(rgb=np.clip(origin.rgb, 0.0, 1.0), grid=grid,
                 depth=origin.depth))
    traj = longest_linear_segment(nav, speed=speed, fps=fps)
    if traj.length == 0.0:
        log.warning("skipping sample (seed %d): planner found only a "
                    "zero-length segment", spec.seed)
        return None

    poses = trajectory_to_poses(traj, n_frames)

    out_dir = Path(out_dir)
    for sub in ("gt", "degraded", "alpha"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)

    gt_frames = []
    depth0 = None
    for i, pose in enumerate(poses):
        out = render_erp(spec.gt_scene, pose.position, grid, aa_dilation=0.0)
        gt_frames.append(out.rgb)
        if i == 0:
            depth0 = out.depth
        write_png(out_dir / "gt" / _frame_name(i), out.rgb)
    gt_traj_sha = _sha256_text(trajectory_text(poses))

    coarse = lift_panorama(
        Panorama(rgb=np.clip(gt_frames[0], 0.0, 1.0), grid=grid,
                 depth=depth0),
        stride=lift_stride,
        scale_gain=lift_scale_gain,
    )
    # the lift is camera-centered; move it to the frame-0 camera position
    coarse = GaussianScene(
        mu=coarse.mu + poses[0].position,
        log_scale=coarse.log_scale,
        rot=coarse.rot,
        opacity_logit=coarse.opacity_logit,
        color=coarse.color,
    )

    for i, pose in enumerate(poses):
        out = render_erp(coarse, pose.position, grid, aa_dilation=0.0)
        write_png(out_dir / "degraded" / _frame_name(i), out.rgb)
        write_png(out_dir / "alpha" / _frame_name(i),
                  np.clip(out.alpha, 0.0, 1.0))
    degraded_traj_sha = _sha256_text(trajectory_text(poses))

    write_png(out_dir / "anchor.png", gt_frames[0])
    write_pfm(out_dir / "depth0.pfm", depth0.astype(np.float32))
    write_trajectory(out_dir / "trajectory.txt", poses)

    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "seed": spec.seed,
        "grid": {"height": grid.height, "width": grid.width},
        "n_frames": n_frames,
        "fps": fps,
        "speed": speed,
        "camera_height": DEFAULT_CAMERA_HEIGHT,
        "files": {
            "gt": [f"gt/{_frame_name(i)}" for i in range(n_frames)],
            "degraded": [f"degraded/{_frame_name(i)}" for i in range(n_frames)],
            "alpha": [f"alpha/{_frame_name(i)}" for i in range(n_frames)],
            "anchor": "anchor.png",
            "depth0": "depth0.pfm",
            "trajectory": "trajectory.txt",
        },
        "gt_trajectory_sha256": gt_traj_sha,
        "degraded_trajectory_sha256": degraded_traj_sha,
    }
    (out_dir / MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n",
        encoding="ascii",
    )
    return out_dir


def verify_sample(sample_dir) -> list[str]:
    """Consistency check of one sample directory; returns found problems."""
    sample_dir = Path(sample_dir)
    problems: list[str] = []
    manifest_path = sample_dir / MANIFEST_NAME
    if not manifest_path.exists():
        return [f"missing {MANIFEST_NAME}"]
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as e:
        return [f"unreadable manifest: {e}"]

    if manifest.get("schema_version") != MANIFEST_SCHEMA_VERSION:
        problems.append(
            f"schema_version {manifest.get('schema_version')!r}, "
            f"expected {MANIFEST_SCHEMA_VERSION}")
        return problems

    required = ("grid", "n_frames", "fps", "speed", "camera_height", "files",
                "gt_trajectory_sha256", "degraded_trajectory_sha256")
    missing = [key for key in required if key not in manifest]
    if missing:
        return [f"manifest missing keys: {missing}"]

    n = manifest["n_frames"]
    files = manifest["files"]
    h, w = manifest["grid"]["height"], manifest["grid"]["width"]

    for stream in ("gt", "degraded", "alpha"):
        names = files.get(stream, [])
        if len(names) != n:
            problems.append(f"{stream} lists {len(names)} frames, "
                            f"manifest says {n}")
        for name in names:
            p = sample_dir / name
            if not p.exists():
                problems.append(f"missing file {name}")
                continue
            img = read_png(p)
            if img.shape[:2] != (h, w):
                problems.append(f"{name}: shape {img.shape[:2]}, "
                                f"expected {(h, w)}")

    anchor_path = sample_dir / files.get("anchor", "anchor.png")
    if not anchor_path.exists():
        problems.append("missing anchor.png")
    depth_path = sample_dir / files.get("depth0", "depth0.pfm")
    if not depth_path.exists():
        problems.append("missing depth0.pfm")
    else:
        try:
            depth = read_pfm(depth_path)
            if depth.shape != (h, w):
                problems.append(f"depth0.pfm: shape {depth.shape}, "
                                f"expected {(h, w)}")
            if np.any(depth < 0.0):
                problems.append("depth0.pfm: negative depths")
        except ValueError as e:
            problems.append(str(e))

    traj_path = sample_dir / files.get("trajectory", "trajectory.txt")
    if not traj_path.exists():
        problems.append("missing trajectory.txt")
    else:
        try:
            poses = read_trajectory(traj_path)
            if len(poses) != n:
                problems.append(f"trajectory has {len(poses)} poses, "
                                f"manifest says {n}")
        except ValueError as e:
            problems.append(str(e))
        sha = _sha256_text(traj_path.read_text(encoding="ascii"))
        if sha != manifest["gt_trajectory_sha256"]:
            problems.append("gt trajectory hash mismatch")
        if manifest["gt_trajectory_sha256"] != \
                manifest["degraded_trajectory_sha256"]:
            problems.append("gt and degraded pose hashes differ")

    return problems


def worker_count(threads: int | None = None) -> int:
    """Worker cap: explicit argument, else the environment, else one."""
    if threads is not None:
        if threads < 1:
            raise ValueError("threads must be >= 1")
        return threads
    env = os.environ.get(THREADS_ENV_VAR)
    if env:
        try:
            n = int(env)
        except ValueError as e:
            raise ValueError(f"{THREADS_ENV_VAR} must be an integer") from e
        if n < 1:
            raise ValueError(f"{THREADS_ENV_VAR} must be >= 1")
        return n
    return 1


def generate_dataset(
    out_root,
    kinds: tuple[str, ...] = FIXTURE_KINDS,
    count: int = 3,
    base_seed: int = 0,
    grid: ErpGrid | None = None,
    n_frames: int = DEFAULT_N_FRAMES,
    threads: int | None = None,
    surfel_spacing: float = 0.15,
    lift_stride: int = 1,
) -> list[Path]:
    """Generate `count` samples cycling through fixture kinds.

    Sample i uses seed base_seed + i and writes to out_root/sample_{i:04d}.
    Samples are independent and generated in parallel; skipped samples
    (degenerate trajectories) leave no directory behind.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if grid is None:
        grid = ErpGrid(128, 256)
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)

    def one(i: int) -> Path | None:
        kind = kinds[i % len(kinds)]
        spec = synth_fixture_scene(kind, seed=base_seed + i,
                                   surfel_spacing=surfel_spacing)
        return generate_pair(
            spec, grid, out_root / f"sample_{i:04d}",
            n_frames=n_frames, lift_stride=lift_stride,
        )

    n_workers = worker_count(threads)
    if n_workers == 1:
        results = [one(i) for i in range(count)]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(one, range(count)))
    return [r for r in results if r is not None]
