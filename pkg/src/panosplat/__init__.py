"""Panoramic Gaussian splatting: lift, plan, render, restore, refine, eval."""

from .conditioning import VideoSequence
from .config import (
    EvalConfig,
    NavConfig,
    PipelineConfig,
    PlanConfig,
    RestoreConfig,
    config_from_json,
    config_to_json,
    load_config,
)
from .lift import Panorama, lift_panorama
from .metrics import METRIC_NAMES, MetricReport, compute_report
from .nav import (
    NavMap,
    Trajectory,
    build_nav_map,
    fps_eval_cameras,
    longest_linear_segment,
    plan_radial,
    trajectory_to_poses,
)
from .rasterize import (
    CameraPose,
    PerspectiveIntrinsics,
    RenderOutput,
    render_erp,
    render_perspective,
)
from .refine import RefineConfig, build_pseudo_gt, refine_scene
from .restore import (
    RestoreRequest,
    RestoreResult,
    restore_external,
    restore_identity,
    restore_pushpull,
)
from .scene import (
    Gaussian,
    GaussianScene,
    SceneFormatError,
    read_gsb,
    write_gsb,
)
from .sphere import ErpGrid

__version__ = "0.1.0"

__all__ = [
    "METRIC_NAMES",
    "CameraPose",
    "ErpGrid",
    "EvalConfig",
    "Gaussian",
    "GaussianScene",
    "MetricReport",
    "NavConfig",
    "NavMap",
    "Panorama",
    "PerspectiveIntrinsics",
    "PipelineConfig",
    "PlanConfig",
    "RefineConfig",
    "RenderOutput",
    "RestoreConfig",
    "RestoreRequest",
    "RestoreResult",
    "SceneFormatError",
    "Trajectory",
    "VideoSequence",
    "build_nav_map",
    "build_pseudo_gt",
    "compute_report",
    "config_from_json",
    "config_to_json",
    "fps_eval_cameras",
    "lift_panorama",
    "load_config",
    "longest_linear_segment",
    "plan_radial",
    "read_gsb",
    "refine_scene",
    "render_erp",
    "render_perspective",
    "restore_external",
    "restore_identity",
    "restore_pushpull",
    "trajectory_to_poses",
    "write_gsb",
]
