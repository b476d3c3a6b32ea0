"""One structured configuration for the whole pipeline.

Every stage reads its settings from a single PipelineConfig, serialized as
JSON. Parsing is strict: unknown keys anywhere in the document are an
error, and a config survives a serialize/parse round trip unchanged. All
defaults live in the dataclass definitions below, so a freshly dumped
config file documents every knob.
"""

from __future__ import annotations

import dataclasses
import json
import typing
from dataclasses import dataclass, field

from .metrics import METRIC_NAMES
from .refine import RefineConfig

RESTORE_BACKENDS = ("identity", "pushpull", "external")


@dataclass(frozen=True)
class NavConfig:
    """Navigation-map construction settings."""

    camera_height: float = 1.6
    clearance: float = 0.3
    cell_size: float = 0.05
    max_range: float = 10.0

    def __post_init__(self) -> None:
        if self.camera_height <= 0.0:
            raise ValueError("camera_height must be positive")
        if self.clearance < 0.0:
            raise ValueError("clearance must be non-negative")
        if self.cell_size <= 0.0:
            raise ValueError("cell_size must be positive")
        if self.max_range <= 0.0:
            raise ValueError("max_range must be positive")


@dataclass(frozen=True)
class PlanConfig:
    """Radial exploration and video timing settings.

    tau is the number of evenly spaced radial trajectories; 4 and 8 are the
    evaluated settings, 8 the default.
    """

    tau: int = 8
    n_offsets: int = 32
    speed: float = 1.0
    fps: float = 10.0
    n_frames: int = 41

    def __post_init__(self) -> None:
        if self.tau < 1:
            raise ValueError("tau must be at least 1")
        if self.n_offsets < 1:
            raise ValueError("n_offsets must be at least 1")
        if self.speed <= 0.0:
            raise ValueError("speed must be positive")
        if self.fps <= 0.0:
            raise ValueError("fps must be positive")
        if self.n_frames < 1:
            raise ValueError("n_frames must be at least 1")


@dataclass(frozen=True)
class RestoreConfig:
    """Restoration backend selection.

    backend "external" hands frames to an adapter over exchange_dir and
    requires that directory to be set.
    """

    backend: str = "pushpull"
    exchange_dir: str | None = None
    timeout: float = 60.0
    target_scale: int = 1

    def __post_init__(self) -> None:
        if self.backend not in RESTORE_BACKENDS:
            raise ValueError(
                f"backend {self.backend!r} not one of {RESTORE_BACKENDS}")
        if self.backend == "external" and not self.exchange_dir:
            raise ValueError("external backend requires exchange_dir")
        if self.timeout <= 0.0:
            raise ValueError("timeout must be positive")
        if not (isinstance(self.target_scale, int) and self.target_scale >= 1):
            raise ValueError("target_scale must be an integer >= 1")


@dataclass(frozen=True)
class EvalConfig:
    """Evaluation camera and metric settings.

    fps5 mode: n_cameras spatially diverse locations (farthest point
    sampling seeded from the origin), 4 horizontal perspective views each.
    """

    metrics: tuple[str, ...] = METRIC_NAMES
    n_cameras: int = 5
    views_per_camera: int = 4
    view_size: int = 128
    pool_size: int = 512

    def __post_init__(self) -> None:
        unknown = set(self.metrics) - set(METRIC_NAMES)
        if unknown:
            raise ValueError(f"unknown metrics: {sorted(unknown)}")
        if not self.metrics:
            raise ValueError("metric list must not be empty")
        if self.n_cameras < 1:
            raise ValueError("n_cameras must be at least 1")
        if self.views_per_camera < 1:
            raise ValueError("views_per_camera must be at least 1")
        if self.view_size < 8:
            raise ValueError("view_size must be at least 8")
        if self.pool_size < 1:
            raise ValueError("pool_size must be at least 1")


@dataclass(frozen=True)
class PipelineConfig:
    """Top-level pipeline settings; ERP width is always twice grid_height."""

    seed: int = 0
    grid_height: int = 128
    lift_stride: int = 1
    nav: NavConfig = field(default_factory=NavConfig)
    plan: PlanConfig = field(default_factory=PlanConfig)
    restore: RestoreConfig = field(default_factory=RestoreConfig)
    refine: RefineConfig = field(default_factory=RefineConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def __post_init__(self) -> None:
        if not isinstance(self.seed, int):
            raise ValueError("seed must be an integer")
        if self.grid_height < 2 or self.grid_height % 2 != 0:
            raise ValueError("grid_height must be an even integer >= 2")
        if self.lift_stride < 1:
            raise ValueError("lift_stride must be at least 1")

    @property
    def grid_width(self) -> int:
        return 2 * self.grid_height


def _from_dict(cls, data, path: str):
    """Build a dataclass from a dict, rejecting unknown keys anywhere."""
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected an object, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValueError(f"{path}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        value = data[f.name]
        hint = hints[f.name]
        if dataclasses.is_dataclass(hint):
            value = _from_dict(hint, value, f"{path}.{f.name}")
        elif typing.get_origin(hint) is tuple:
            if not isinstance(value, list):
                raise ValueError(f"{path}.{f.name}: expected a list")
            value = tuple(value)
        kwargs[f.name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ValueError(f"{path}: {e}") from e


def config_to_json(config: PipelineConfig) -> str:
    """Serialize with sorted keys and a trailing newline (diff-friendly)."""
    return json.dumps(dataclasses.asdict(config), indent=2, sort_keys=True) + "\n"


def config_from_json(text: str) -> PipelineConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValueError(f"config is not valid JSON: {e}") from e
    return _from_dict(PipelineConfig, data, "config")


def load_config(path) -> PipelineConfig:
    from pathlib import Path

    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file not found: {p}")
    return config_from_json(p.read_text(encoding="utf-8"))
