"""Command-line surface for the panorama-to-scene pipeline.

Stages run in order: init -> plan -> render-degraded -> restore -> refine
-> eval, plus the standalone dataset-gen and verify commands. Images move
between stages as 8-bit PNGs, depth as PFM, scenes as .gsb, trajectories
as line-delimited text, configuration as one JSON file.

Exit codes: 0 success, 2 usage error (bad flags or a missing input file,
named in the message), 3 pipeline error.

When --run is given, each stage checks its predecessors in the run
manifest before doing work and records sha256 hashes of its inputs and
outputs after, so `verify --run` can re-check provenance later. Manifest
content has no timestamps; re-running a stage with identical inputs and
seed leaves every artifact, the manifest included, bit-identical.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .conditioning import VideoSequence
from .config import PipelineConfig, load_config, config_to_json
from .dataset import FIXTURE_KINDS, generate_dataset, verify_sample
from .io_formats import (
    read_pfm,
    read_png,
    read_trajectory,
    write_pfm,
    write_png,
    write_trajectory,
)
from .lift import Panorama, lift_panorama
from .metrics import compute_report
from .nav import build_nav_map, fps_eval_cameras, plan_radial, trajectory_to_poses
from .quat import quat_about_y
from .rasterize import (
    CameraPose,
    PerspectiveIntrinsics,
    render_erp,
    render_perspective,
)
from .refine import build_pseudo_gt, refine_scene, write_loss_log
from .restore import (
    RestoreProtocolError,
    RestoreRequest,
    RestoreTimeout,
    restore_external,
    restore_identity,
    restore_pushpull,
)
from .scene import SceneFormatError, read_gsb, write_gsb
from .sphere import ErpGrid

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PIPELINE = 3

RUN_SCHEMA_VERSION = 1

# predecessors a stage needs in the run manifest before it may run
STAGE_REQUIRES = {
    "init": (),
    "plan": ("init",),
    "render-degraded": ("plan",),
    "restore": ("render-degraded",),
    "refine": ("restore",),
    "eval": ("refine",),
}


class UsageError(Exception):
    """Bad invocation: wrong flags or inputs that cannot exist."""


class PipelineError(RuntimeError):
    """A stage failed on well-formed inputs."""


def _require_file(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"input file not found: {p}")
    return p


def _config_for(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def _grid_for(cfg: PipelineConfig, height: int | None) -> ErpGrid:
    h = height if height is not None else cfg.grid_height
    return ErpGrid(h, 2 * h)


def _read_frame_dir(d) -> np.ndarray:
    d = Path(d)
    if not d.is_dir():
        raise FileNotFoundError(f"frame directory not found: {d}")
    files = sorted(d.glob("*.png"))
    if not files:
        raise PipelineError(f"no PNG frames in {d}")
    return np.stack([read_png(f) for f in files])


def _load_panorama(pano_path, depth_path) -> Panorama:
    rgb = read_png(_require_file(pano_path))
    if rgb.ndim != 3 or rgb.shape[-1] != 3:
        raise PipelineError(f"panorama must be RGB: {pano_path}")
    depth = np.asarray(read_pfm(_require_file(depth_path)), dtype=np.float64)
    if depth.shape != rgb.shape[:2]:
        raise PipelineError(
            f"depth shape {depth.shape} does not match panorama "
            f"{rgb.shape[:2]}: {depth_path}")
    grid = ErpGrid(rgb.shape[0], rgb.shape[1])
    return Panorama(rgb=rgb, grid=grid, depth=depth)


def _render_origin_panorama(scene, grid: ErpGrid) -> Panorama:
    out = render_erp(scene, np.zeros(3), grid, aa_dilation=0.0)
    return Panorama(rgb=np.clip(out.rgb, 0.0, 1.0), grid=grid, depth=out.depth)


# ---------------------------------------------------------------------------
# run manifest


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_run(path: Path) -> dict:
    if not path.exists():
        return {"schema_version": RUN_SCHEMA_VERSION, "stages": {}}
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise PipelineError(f"run manifest is not valid JSON: {path}: {e}") from e
    if data.get("schema_version") != RUN_SCHEMA_VERSION:
        raise PipelineError(
            f"unsupported run manifest schema in {path}: "
            f"{data.get('schema_version')!r}")
    return data


def _stage_preflight(args, stage: str) -> dict | None:
    """Load the run manifest and enforce stage order; None without --run."""
    run = getattr(args, "run", None)
    if run is None:
        return None
    data = _load_run(Path(run))
    missing = [s for s in STAGE_REQUIRES[stage] if s not in data["stages"]]
    if missing:
        raise PipelineError(
            f"stage-order violation: {stage} requires completed stage(s) "
            f"{', '.join(missing)} in run manifest {run}")
    return data


def _stage_record(args, data, stage: str, cfg: PipelineConfig,
                  inputs, outputs) -> None:
    if data is None:
        return
    run_path = Path(args.run)
    base = run_path.resolve().parent

    def rel(p: Path) -> str:
        return os.path.relpath(p.resolve(), base)

    def hashed(paths) -> dict[str, str]:
        table: dict[str, str] = {}
        for p in paths:
            p = Path(p)
            if p.is_dir():
                for f in sorted(p.rglob("*")):
                    if f.is_file():
                        table[rel(f)] = _sha256_file(f)
            elif p.is_file():
                table[rel(p)] = _sha256_file(p)
        return table

    data["stages"][stage] = {
        "seed": cfg.seed,
        "inputs": hashed(inputs),
        "outputs": hashed(outputs),
    }
    run_path.parent.mkdir(parents=True, exist_ok=True)
    run_path.write_text(
        json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def verify_run(path) -> list[str]:
    """Re-hash every file a run manifest records; list what changed."""
    path = Path(path)
    if not path.is_file():
        return [f"run manifest not found: {path}"]
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        return [f"run manifest is not valid JSON: {e}"]
    if data.get("schema_version") != RUN_SCHEMA_VERSION:
        return [f"unsupported schema_version: {data.get('schema_version')!r}"]
    stages = data.get("stages", {})
    base = path.resolve().parent
    problems = []
    for stage in sorted(stages):
        rec = stages[stage]
        for s in STAGE_REQUIRES.get(stage, ()):
            if s not in stages:
                problems.append(
                    f"{stage}: required stage {s!r} missing from manifest")
        for role in ("inputs", "outputs"):
            for relp in sorted(rec.get(role, {})):
                f = base / relp
                if not f.is_file():
                    problems.append(f"{stage}: {role[:-1]} file missing: {relp}")
                elif _sha256_file(f) != rec[role][relp]:
                    problems.append(f"{stage}: {role[:-1]} hash mismatch: {relp}")
    return problems


# ---------------------------------------------------------------------------
# commands


def cmd_init(args) -> int:
    cfg = _config_for(args)
    run = _stage_preflight(args, "init")
    pano_path = _require_file(args.pano)
    depth_path = _require_file(args.depth)
    pano = _load_panorama(pano_path, depth_path)
    stride = args.stride if args.stride is not None else cfg.lift_stride
    scene = lift_panorama(pano, stride=stride)
    if len(scene) == 0:
        raise PipelineError("lift produced an empty scene (no valid depth)")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_gsb(scene, out)
    lo, hi = scene.bounds()
    print(f"K={len(scene)}")
    print(f"bounds lo=({lo[0]:.6g}, {lo[1]:.6g}, {lo[2]:.6g}) "
          f"hi=({hi[0]:.6g}, {hi[1]:.6g}, {hi[2]:.6g})")
    _stage_record(args, run, "init", cfg, [pano_path, depth_path], [out])
    return EXIT_OK


def cmd_plan(args) -> int:
    cfg = _config_for(args)
    run = _stage_preflight(args, "plan")
    tau = args.tau if args.tau is not None else cfg.plan.tau
    inputs: list[Path] = []
    if args.pano is not None or args.depth is not None:
        if args.pano is None or args.depth is None:
            raise UsageError("--pano and --depth must be given together")
        pano = _load_panorama(args.pano, args.depth)
        inputs = [Path(args.pano), Path(args.depth)]
    elif args.scene is not None:
        scene = read_gsb(_require_file(args.scene))
        pano = _render_origin_panorama(scene, _grid_for(cfg, args.height))
        inputs = [Path(args.scene)]
    else:
        raise UsageError("plan requires --pano/--depth or --scene")
    nav = build_nav_map(
        pano,
        camera_height=cfg.nav.camera_height,
        clearance=cfg.nav.clearance,
        cell_size=cfg.nav.cell_size,
    )
    trajectories, best_psi = plan_radial(
        nav, tau,
        n_offsets=cfg.plan.n_offsets,
        max_range=cfg.nav.max_range,
        speed=cfg.plan.speed,
        fps=cfg.plan.fps,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, traj in enumerate(trajectories):
        poses = trajectory_to_poses(traj, cfg.plan.n_frames)
        write_trajectory(out / f"trajectory_{i:02d}.txt", poses)
    meta = {
        "best_psi": best_psi,
        "tau": tau,
        "n_frames": cfg.plan.n_frames,
        "lengths": [t.length for t in trajectories],
    }
    (out / "plan.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {len(trajectories)} trajectories, best_psi={best_psi:.6g}")
    _stage_record(args, run, "plan", cfg, inputs, [out])
    return EXIT_OK


def cmd_render_degraded(args) -> int:
    cfg = _config_for(args)
    run = _stage_preflight(args, "render-degraded")
    scene_path = _require_file(args.scene)
    traj_path = _require_file(args.trajectory)
    scene = read_gsb(scene_path)
    poses = read_trajectory(traj_path)
    grid = _grid_for(cfg, args.height)
    out = Path(args.out)
    (out / "degraded").mkdir(parents=True, exist_ok=True)
    (out / "alpha").mkdir(parents=True, exist_ok=True)
    for k, pose in enumerate(poses):
        r = render_erp(scene, pose.position, grid, aa_dilation=0.0)
        write_png(out / "degraded" / f"{k:05d}.png", np.clip(r.rgb, 0.0, 1.0))
        write_png(out / "alpha" / f"{k:05d}.png", np.clip(r.alpha, 0.0, 1.0))
        if k == 0:
            write_pfm(out / "depth0.pfm", np.asarray(r.depth, dtype=np.float32))
    write_trajectory(out / "trajectory.txt", poses)
    print(f"rendered {len(poses)} frames at {grid.height}x{grid.width}")
    _stage_record(args, run, "render-degraded", cfg,
                  [scene_path, traj_path], [out])
    return EXIT_OK


def cmd_restore(args) -> int:
    cfg = _config_for(args)
    run = _stage_preflight(args, "restore")
    frames_dir = Path(args.frames)
    degraded = _read_frame_dir(frames_dir / "degraded")
    alpha = _read_frame_dir(frames_dir / "alpha")
    if degraded.shape[0] != alpha.shape[0]:
        raise PipelineError(
            f"frame count mismatch in {frames_dir}: "
            f"{degraded.shape[0]} degraded vs {alpha.shape[0]} alpha")
    grid = ErpGrid(degraded.shape[1], degraded.shape[2])
    seq = VideoSequence(frames=degraded, alpha=alpha, grid=grid)
    anchor_path = _require_file(args.anchor)
    anchor = read_png(anchor_path)
    req = RestoreRequest(
        degraded=seq,
        anchor=anchor,
        scene_id=args.scene_id,
        target_scale=cfg.restore.target_scale,
    )
    backend = args.backend if args.backend is not None else cfg.restore.backend
    if backend == "identity":
        result = restore_identity(req)
    elif backend == "pushpull":
        result = restore_pushpull(req)
    elif backend == "external":
        exchange = args.exchange_dir or cfg.restore.exchange_dir
        if not exchange:
            raise UsageError("external backend requires --exchange-dir")
        timeout = args.timeout if args.timeout is not None else cfg.restore.timeout
        result = restore_external(req, Path(exchange), timeout=timeout)
    else:
        raise UsageError(f"unknown backend: {backend}")
    out = Path(args.out)
    (out / "restored").mkdir(parents=True, exist_ok=True)
    for k, frame in enumerate(result.frames):
        write_png(out / "restored" / f"{k:05d}.png", frame)
    (out / "provenance.txt").write_text(result.provenance + "\n", encoding="utf-8")
    print(f"restored {len(result.frames)} frames via {backend}")
    _stage_record(args, run, "restore", cfg,
                  [frames_dir / "degraded", frames_dir / "alpha", anchor_path],
                  [out])
    return EXIT_OK


def cmd_refine(args) -> int:
    cfg = _config_for(args)
    run = _stage_preflight(args, "refine")
    scene_path = _require_file(args.scene)
    traj_path = _require_file(args.trajectory)
    scene = read_gsb(scene_path)
    frames_dir = Path(args.frames)
    if (frames_dir / "restored").is_dir():
        frames_dir = frames_dir / "restored"
    frames = _read_frame_dir(frames_dir)
    poses = read_trajectory(traj_path)
    if len(poses) != len(frames):
        raise PipelineError(
            f"{len(frames)} frames in {frames_dir} but {len(poses)} poses "
            f"in {traj_path}")
    positions = np.stack([p.position for p in poses])
    rcfg = cfg.refine
    if args.iters is not None:
        rcfg = dataclasses.replace(rcfg, iters=args.iters)
    gt = build_pseudo_gt(frames, positions)
    refined, records = refine_scene(scene, gt, rcfg, seed=cfg.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_gsb(refined, out)
    loss_path = out.with_suffix(".loss.txt")
    write_loss_log(records, loss_path)
    print(f"refined K={len(refined)}")
    if records:
        print(f"final {records[-1].to_line()}")
    _stage_record(args, run, "refine", cfg,
                  [scene_path, frames_dir, traj_path], [out, loss_path])
    return EXIT_OK


def _contact_sheet(images: list[np.ndarray], rows: int, cols: int) -> np.ndarray:
    assert len(images) == rows * cols
    strips = [np.concatenate(images[r * cols:(r + 1) * cols], axis=1)
              for r in range(rows)]
    return np.concatenate(strips, axis=0)


def cmd_eval(args) -> int:
    cfg = _config_for(args)
    run = _stage_preflight(args, "eval")
    if args.mode != "fps5":
        raise UsageError(f"unknown eval mode: {args.mode}")
    gt_path = _require_file(args.gt_scene)
    test_path = _require_file(args.scene)
    gt_scene = read_gsb(gt_path)
    test_scene = read_gsb(test_path)
    grid = _grid_for(cfg, args.height)
    pano = _render_origin_panorama(gt_scene, grid)
    nav = build_nav_map(
        pano,
        camera_height=cfg.nav.camera_height,
        clearance=cfg.nav.clearance,
        cell_size=cfg.nav.cell_size,
    )
    cams = fps_eval_cameras(
        nav,
        n_total=cfg.eval.n_cameras,
        pool_size=cfg.eval.pool_size,
        seed=cfg.seed,
    )
    intr = PerspectiveIntrinsics(
        fov_y=np.pi / 2.0,
        width=cfg.eval.view_size,
        height=cfg.eval.view_size,
    )
    out = Path(args.out)
    views_dir = out / "views"
    views_dir.mkdir(parents=True, exist_ok=True)
    gt_views: list[np.ndarray] = []
    test_views: list[np.ndarray] = []
    for i, (x, z) in enumerate(cams):
        for k in range(cfg.eval.views_per_camera):
            yaw = 2.0 * np.pi * k / cfg.eval.views_per_camera
            pose = CameraPose(
                position=np.array([x, 0.0, z]),
                orientation=quat_about_y(yaw),
            )
            g = np.clip(render_perspective(gt_scene, pose, intr).rgb, 0.0, 1.0)
            t = np.clip(render_perspective(test_scene, pose, intr).rgb, 0.0, 1.0)
            write_png(views_dir / f"gt_c{i:02d}_v{k}.png", g)
            write_png(views_dir / f"test_c{i:02d}_v{k}.png", t)
            gt_views.append(g)
            test_views.append(t)
    # sphere-weighted metrics are defined on panoramas; the evaluation views
    # are perspective, so only the unweighted entries of the list apply here
    names = tuple(m for m in cfg.eval.metrics if not m.startswith("ws_"))
    if not names:
        raise PipelineError(
            "config metric list has no perspective-applicable metrics")
    report = compute_report(np.stack(gt_views), np.stack(test_views), grid, names)
    (out / "metrics.txt").write_text(report.to_text(), encoding="utf-8")
    n_cams = len(cams)
    per_cam = cfg.eval.views_per_camera
    write_png(out / "contact_gt.png", _contact_sheet(gt_views, n_cams, per_cam))
    write_png(out / "contact_test.png",
              _contact_sheet(test_views, n_cams, per_cam))
    print(f"evaluated {n_cams * per_cam} views "
          f"({n_cams} cameras x {per_cam} views)")
    print(report.summary_table())
    _stage_record(args, run, "eval", cfg, [gt_path, test_path], [out])
    return EXIT_OK


def cmd_dataset_gen(args) -> int:
    cfg = _config_for(args)
    kinds = tuple(args.kinds) if args.kinds else FIXTURE_KINDS
    written = generate_dataset(
        Path(args.out),
        kinds=kinds,
        count=args.count,
        base_seed=cfg.seed,
        grid=_grid_for(cfg, args.height),
        n_frames=args.n_frames if args.n_frames is not None else cfg.plan.n_frames,
        threads=args.threads,
    )
    for d in written:
        print(d)
    print(f"wrote {len(written)} of {args.count} samples")
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.sample is None and args.run is None:
        raise UsageError("verify requires --sample and/or --run")
    problems: list[str] = []
    if args.sample is not None:
        sample = Path(args.sample)
        problems += [f"sample {sample}: {p}" for p in verify_sample(sample)]
    if args.run is not None:
        problems += [f"run {args.run}: {p}" for p in verify_run(Path(args.run))]
    for p in problems:
        print(p)
    if problems:
        return EXIT_PIPELINE
    print("ok")
    return EXIT_OK


def cmd_show_config(args) -> int:
    cfg = _config_for(args)
    sys.stdout.write(config_to_json(cfg))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="panosplat",
        description="Panorama-to-3D-scene pipeline tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None,
                        help="pipeline config JSON (defaults apply if absent)")
    common.add_argument("--seed", type=int, default=None,
                        help="seed for all random behavior (overrides config)")
    common.add_argument("--run", type=Path, default=None,
                        help="run-manifest path for stage-order and "
                             "provenance tracking")
    common.add_argument("--verbose", action="store_true",
                        help="log at INFO level")

    p = sub.add_parser("init", parents=[common],
                       help="lift a panorama with depth into a .gsb scene")
    p.add_argument("--pano", type=Path, required=True, help="ERP RGB PNG")
    p.add_argument("--depth", type=Path, required=True, help="ERP depth PFM")
    p.add_argument("--out", type=Path, required=True, help="output .gsb path")
    p.add_argument("--stride", type=int, default=None,
                   help="lift every Nth pixel per axis")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("plan", parents=[common],
                       help="plan radial exploration trajectories")
    p.add_argument("--pano", type=Path, default=None, help="ERP RGB PNG")
    p.add_argument("--depth", type=Path, default=None, help="ERP depth PFM")
    p.add_argument("--scene", type=Path, default=None,
                   help=".gsb scene; its origin render supplies the map")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--tau", type=int, default=None,
                   help="number of radial trajectories")
    p.add_argument("--height", type=int, default=None,
                   help="ERP height when rendering from --scene")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("render-degraded", parents=[common],
                       help="render the coarse scene along a trajectory")
    p.add_argument("--scene", type=Path, required=True, help=".gsb scene")
    p.add_argument("--trajectory", type=Path, required=True,
                   help="trajectory text file")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--height", type=int, default=None, help="ERP height")
    p.set_defaults(func=cmd_render_degraded)

    p = sub.add_parser("restore", parents=[common],
                       help="fill holes in a degraded video")
    p.add_argument("--frames", type=Path, required=True,
                   help="render-degraded output directory")
    p.add_argument("--anchor", type=Path, required=True,
                   help="clean anchor panorama PNG")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--backend", choices=("identity", "pushpull", "external"),
                   default=None, help="restoration backend")
    p.add_argument("--exchange-dir", type=Path, default=None,
                   help="exchange directory for the external backend")
    p.add_argument("--timeout", type=float, default=None,
                   help="external backend timeout in seconds")
    p.add_argument("--scene-id", default="run",
                   help="scene identifier for exchange requests")
    p.set_defaults(func=cmd_restore)

    p = sub.add_parser("refine", parents=[common],
                       help="optimize a scene against restored frames")
    p.add_argument("--scene", type=Path, required=True,
                   help="initial .gsb scene")
    p.add_argument("--frames", type=Path, required=True,
                   help="restored frames directory")
    p.add_argument("--trajectory", type=Path, required=True,
                   help="trajectory text file matching the frames")
    p.add_argument("--out", type=Path, required=True,
                   help="output .gsb path (loss log written alongside)")
    p.add_argument("--iters", type=int, default=None,
                   help="optimization iterations")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("eval", parents=[common],
                       help="compare a scene against ground truth")
    p.add_argument("--gt-scene", type=Path, required=True,
                   help="ground-truth .gsb scene")
    p.add_argument("--scene", type=Path, required=True,
                   help=".gsb scene under test")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--mode", default="fps5", choices=("fps5",),
                   help="camera placement mode")
    p.add_argument("--height", type=int, default=None,
                   help="ERP height for the navigation render")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("dataset-gen", parents=[common],
                       help="generate synthetic degraded/ground-truth pairs")
    p.add_argument("--out", type=Path, required=True, help="output root")
    p.add_argument("--count", type=int, default=3, help="samples to generate")
    p.add_argument("--kinds", nargs="+", choices=FIXTURE_KINDS, default=None,
                   help="fixture kinds to cycle through")
    p.add_argument("--height", type=int, default=None, help="ERP height")
    p.add_argument("--n-frames", type=int, default=None,
                   help="frames per sample")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (PANOSPLAT_THREADS also applies)")
    p.set_defaults(func=cmd_dataset_gen)

    p = sub.add_parser("verify", parents=[common],
                       help="check a dataset sample or a run manifest")
    p.add_argument("--sample", type=Path, default=None,
                   help="dataset sample directory")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("show-config", parents=[common],
                       help="print the effective config as JSON")
    p.set_defaults(func=cmd_show_config)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, SceneFormatError, RestoreProtocolError,
            RestoreTimeout, RuntimeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    raise SystemExit(main())
