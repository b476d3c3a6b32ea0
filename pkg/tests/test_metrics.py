from __future__ import annotations

import numpy as np
import pytest
from skimage.metrics import structural_similarity as sk_ssim

from panosplat.metrics import (
    MetricReport,
    compute_report,
    psnr,
    ssim,
    ssim_map,
    ws_psnr,
    ws_ssim,
)
from panosplat.sphere import ErpGrid, erp_weight_map


class TestPsnr:
    def test_identical_caps(self, rng):
        a = rng.uniform(0, 1, (16, 16, 3))
        assert psnr(a, a) == 99.0

    def test_constant_difference(self):
        a = np.full((8, 8), 0.5)
        b = np.full((8, 8), 0.6)
        assert psnr(a, b) == pytest.approx(20.0, abs=1e-9)

    def test_symmetry(self, rng):
        a = rng.uniform(0, 1, (12, 12))
        b = rng.uniform(0, 1, (12, 12))
        assert psnr(a, b) == psnr(b, a)

    def test_monotone_through_cap(self):
        # values just above the MSE floor must not exceed the cap
        a = np.zeros((100, 100))
        b = np.full((100, 100), 1.1e-5)
        assert psnr(a, b) <= 99.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            psnr(np.zeros((4, 4)), np.zeros((4, 5)))


class TestSsim:
    def test_identical_is_one(self, rng):
        a = rng.uniform(0, 1, (24, 24, 3))
        assert ssim(a, a) == pytest.approx(1.0, abs=1e-12)

    def test_anticorrelated_binary_negative(self, rng):
        a = (rng.uniform(0, 1, (32, 32)) > 0.5).astype(float)
        assert ssim(a, 1.0 - a) < 0.0

    def test_brightness_shift_frozen_value(self):
        # constant images: variance terms vanish and the map is constant,
        # so the reference formula collapses to a ratio of the mean terms
        a = np.full((32, 32), 0.5)
        b = np.full((32, 32), 0.6)
        c1, c2 = 0.01**2, 0.03**2
        expect = ((2 * 0.5 * 0.6 + c1) * c2) / ((0.25 + 0.36 + c1) * c2)
        assert expect == pytest.approx(0.6001 / 0.6101, rel=1e-15)
        assert ssim(a, b) == pytest.approx(expect, rel=1e-12)

    def test_matches_skimage_gray(self, rng):
        a = rng.uniform(0, 1, (40, 56))
        b = np.clip(a + rng.normal(0, 0.08, a.shape), 0, 1)
        ref = sk_ssim(
            a, b, data_range=1.0, gaussian_weights=True, sigma=1.5,
            use_sample_covariance=False,
        )
        assert ssim(a, b) == pytest.approx(ref, abs=1e-12)

    def test_matches_skimage_color(self, rng):
        a = rng.uniform(0, 1, (36, 48, 3))
        b = np.clip(a + rng.normal(0, 0.05, a.shape), 0, 1)
        ref = sk_ssim(
            a, b, data_range=1.0, gaussian_weights=True, sigma=1.5,
            use_sample_covariance=False, channel_axis=2,
        )
        assert ssim(a, b) == pytest.approx(ref, abs=1e-12)

    def test_too_small_rejected(self):
        with pytest.raises(ValueError, match="11"):
            ssim(np.zeros((10, 64)), np.zeros((10, 64)))

    def test_map_shape_is_cropped(self, rng):
        a = rng.uniform(0, 1, (20, 30))
        m = ssim_map(a, a)
        assert m.shape == (10, 20)


class TestWsPsnr:
    def test_identical_caps(self, rng):
        grid = ErpGrid(16, 32)
        a = rng.uniform(0, 1, (16, 32, 3))
        assert ws_psnr(a, a, grid) == 99.0

    def test_constant_error_equals_psnr(self):
        grid = ErpGrid(16, 32)
        a = np.full((16, 32), 0.3)
        b = np.full((16, 32), 0.45)
        assert ws_psnr(a, b, grid) == pytest.approx(psnr(a, b), rel=1e-13)

    def test_pole_error_scores_higher(self, rng):
        grid = ErpGrid(32, 64)
        a = rng.uniform(0, 1, (32, 64))
        pole = a.copy()
        pole[0, :] = np.clip(pole[0, :] + 0.5, 0, 1)
        pole[-1, :] = np.clip(pole[-1, :] - 0.5, 0, 1)
        assert ws_psnr(a, pole, grid) > psnr(a, pole)

    def test_equator_error_scores_lower(self, rng):
        grid = ErpGrid(32, 64)
        a = rng.uniform(0, 1, (32, 64))
        eq = a.copy()
        eq[16, :] = np.clip(eq[16, :] + 0.5, 0, 1)
        assert ws_psnr(a, eq, grid) < psnr(a, eq)

    def test_weight_normalization_matches_row_weights(self):
        grid = ErpGrid(16, 32)
        w = erp_weight_map(grid)
        assert np.sum(w) == np.sum(erp_weight_map(grid))

    def test_grid_mismatch(self):
        with pytest.raises(ValueError, match="grid"):
            ws_psnr(np.zeros((8, 16)), np.zeros((8, 16)), ErpGrid(16, 32))


class TestWsSsim:
    def test_identical_is_one(self, rng):
        grid = ErpGrid(24, 48)
        a = rng.uniform(0, 1, (24, 48, 3))
        assert ws_ssim(a, a, grid) == pytest.approx(1.0, abs=1e-12)

    def test_pole_distortion_scores_higher(self, rng):
        grid = ErpGrid(48, 96)
        a = rng.uniform(0, 1, (48, 96))
        pole = a.copy()
        pole[:14] = rng.uniform(0, 1, (14, 96))
        assert ws_ssim(a, pole, grid) > ssim(a, pole)

    def test_uniform_distortion_close_to_ssim(self, rng):
        # structure-free distortion gives a near-constant map, where the
        # weighted and plain means coincide
        grid = ErpGrid(32, 64)
        a = rng.uniform(0, 1, (32, 64))
        b = np.clip(a * 0.9 + 0.05, 0, 1)
        assert ws_ssim(a, b, grid) == pytest.approx(ssim(a, b), abs=1e-3)

    def test_constant_map_equals_ssim_exactly(self):
        grid = ErpGrid(32, 64)
        a = np.full((32, 64), 0.5)
        b = np.full((32, 64), 0.6)
        got = ws_ssim(a, b, grid)
        assert got == pytest.approx(ssim(a, b), rel=1e-9)


class TestReport:
    def test_means_are_arithmetic(self, rng):
        grid = ErpGrid(16, 32)
        gt = rng.uniform(0, 1, (3, 16, 32, 3))
        noisy = np.clip(gt + rng.normal(0, 0.05, gt.shape), 0, 1)
        rep = compute_report(gt, noisy, grid)
        assert rep.n_frames == 3
        for name, vals in rep.per_frame.items():
            assert len(vals) == 3
            assert rep.means[name] == pytest.approx(float(np.mean(vals)), rel=1e-15)

    def test_text_round_trip_values(self, rng):
        grid = ErpGrid(16, 32)
        gt = rng.uniform(0, 1, (2, 16, 32, 3))
        rep = compute_report(gt, gt, grid, metrics=("psnr", "ws_psnr"))
        text = rep.to_text()
        assert "psnr 0 99.0" in text
        assert "mean_psnr 99.0" in text
        assert "frames 2" in text

    def test_summary_table(self, rng):
        grid = ErpGrid(16, 32)
        gt = rng.uniform(0, 1, (2, 16, 32, 3))
        rep = compute_report(gt, gt, grid, metrics=("psnr",))
        table = rep.summary_table()
        assert "psnr" in table and "99.0" in table

    def test_unknown_metric_rejected(self, rng):
        grid = ErpGrid(16, 32)
        gt = rng.uniform(0, 1, (1, 16, 32, 3))
        with pytest.raises(ValueError, match="unknown"):
            compute_report(gt, gt, grid, metrics=("psnr", "fvd"))

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="expected"):
            MetricReport(per_frame={"psnr": [1.0, 2.0]}, n_frames=3)
