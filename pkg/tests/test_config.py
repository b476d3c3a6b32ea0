import json

import pytest

from panosplat.config import (
    EvalConfig,
    NavConfig,
    PipelineConfig,
    PlanConfig,
    RestoreConfig,
    config_from_json,
    config_to_json,
    load_config,
)
from panosplat.metrics import METRIC_NAMES


class TestDefaults:
    def test_documented_defaults(self):
        cfg = PipelineConfig()
        assert cfg.seed == 0
        assert cfg.grid_height == 128
        assert cfg.grid_width == 256
        assert cfg.lift_stride == 1
        assert cfg.plan.tau == 8
        assert cfg.plan.n_frames == 41
        assert cfg.plan.fps == 10.0
        assert cfg.plan.speed == 1.0
        assert cfg.nav.camera_height == 1.6
        assert cfg.nav.clearance == 0.3
        assert cfg.nav.cell_size == 0.05
        assert cfg.restore.backend == "pushpull"
        assert cfg.restore.exchange_dir is None
        assert cfg.eval.metrics == METRIC_NAMES
        assert cfg.eval.n_cameras == 5
        assert cfg.eval.views_per_camera == 4
        assert cfg.refine.iters == 15000

    def test_dump_lists_every_field(self):
        # a dumped default config names every knob of every sub-config
        data = json.loads(config_to_json(PipelineConfig()))
        assert set(data) == {
            "seed", "grid_height", "lift_stride",
            "nav", "plan", "restore", "refine", "eval",
        }
        assert set(data["plan"]) == {
            "tau", "n_offsets", "speed", "fps", "n_frames"}
        assert set(data["restore"]) == {
            "backend", "exchange_dir", "timeout", "target_scale"}


class TestRoundTrip:
    def test_default_round_trip(self):
        cfg = PipelineConfig()
        assert config_from_json(config_to_json(cfg)) == cfg

    def test_modified_round_trip(self):
        cfg = PipelineConfig(
            seed=7,
            grid_height=64,
            plan=PlanConfig(tau=4, n_frames=9),
            restore=RestoreConfig(backend="external", exchange_dir="/tmp/x"),
            eval=EvalConfig(metrics=("psnr",), view_size=32),
        )
        back = config_from_json(config_to_json(cfg))
        assert back == cfg
        assert back.eval.metrics == ("psnr",)

    def test_partial_document_keeps_defaults(self):
        cfg = config_from_json('{"plan": {"tau": 4}}')
        assert cfg.plan.tau == 4
        assert cfg.plan.fps == 10.0
        assert cfg.seed == 0
        assert cfg.nav == NavConfig()

    def test_file_round_trip(self, tmp_path):
        cfg = PipelineConfig(seed=3)
        p = tmp_path / "cfg.json"
        p.write_text(config_to_json(cfg))
        assert load_config(p) == cfg

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="nope.json"):
            load_config(tmp_path / "nope.json")


class TestUnknownKeys:
    def test_top_level(self):
        with pytest.raises(ValueError, match=r"unknown keys \['wibble'\]"):
            config_from_json('{"wibble": 1}')

    def test_nested_names_path(self):
        with pytest.raises(ValueError, match=r"config\.nav.*typo"):
            config_from_json('{"nav": {"typo": 1}}')

    def test_nested_section_must_be_object(self):
        with pytest.raises(ValueError, match="expected an object"):
            config_from_json('{"nav": 3}')

    def test_not_json(self):
        with pytest.raises(ValueError, match="not valid JSON"):
            config_from_json("{")


class TestValidation:
    def test_bad_backend(self):
        with pytest.raises(ValueError, match="backend"):
            RestoreConfig(backend="magic")

    def test_external_needs_exchange_dir(self):
        with pytest.raises(ValueError, match="exchange_dir"):
            RestoreConfig(backend="external")

    def test_tau_positive(self):
        with pytest.raises(ValueError, match="tau"):
            PlanConfig(tau=0)

    def test_grid_height_even(self):
        with pytest.raises(ValueError, match="even"):
            PipelineConfig(grid_height=63)

    def test_unknown_metric(self):
        with pytest.raises(ValueError, match="lpips"):
            EvalConfig(metrics=("psnr", "lpips"))

    def test_empty_metrics(self):
        with pytest.raises(ValueError, match="empty"):
            EvalConfig(metrics=())

    def test_seed_must_be_int(self):
        with pytest.raises(ValueError, match="seed"):
            config_from_json('{"seed": 1.5}')

    def test_nested_error_names_section(self):
        with pytest.raises(ValueError, match=r"config\.plan"):
            config_from_json('{"plan": {"fps": -1}}')

    def test_nav_validation(self):
        with pytest.raises(ValueError, match="cell_size"):
            NavConfig(cell_size=0.0)
