from __future__ import annotations

import numpy as np
import pytest

from panosplat.sphere import (
    CUBE_FACE_ORIENTATIONS,
    ErpGrid,
    dir_to_pixel,
    erp_to_perspective,
    erp_weight_map,
    erp_weight_row,
    latitude_of_row,
    longitude_of_col,
    perspective_to_erp,
    pixel_to_dir,
    sample_bilinear,
    warp_coords,
)
from conftest import make_smooth_pano


class TestGrid:
    def test_valid(self):
        g = ErpGrid(2, 4)
        assert g.shape == (2, 4)

    def test_rejects_odd_width(self):
        with pytest.raises(ValueError, match="even"):
            ErpGrid(4, 5)

    def test_rejects_tiny(self):
        with pytest.raises(ValueError):
            ErpGrid(1, 4)


class TestAngles:
    def test_latitude_endpoints(self):
        g = ErpGrid(4, 8)
        assert latitude_of_row(0.0, g) == pytest.approx(np.pi / 2)
        assert latitude_of_row(4.0, g) == pytest.approx(-np.pi / 2)
        assert latitude_of_row(2.0, g) == 0.0
        assert latitude_of_row(1.0, g) == pytest.approx(np.pi / 4)

    def test_longitude_endpoints(self):
        g = ErpGrid(4, 8)
        assert longitude_of_col(0.0, g) == pytest.approx(-np.pi)
        assert longitude_of_col(4.0, g) == 0.0
        assert longitude_of_col(6.0, g) == pytest.approx(np.pi / 2)

    def test_domain_errors(self):
        g = ErpGrid(4, 8)
        with pytest.raises(ValueError):
            latitude_of_row(-0.1, g)
        with pytest.raises(ValueError):
            latitude_of_row(4.1, g)
        with pytest.raises(ValueError):
            longitude_of_col(8.5, g)


class TestPixelDir:
    def test_forward_center(self):
        g = ErpGrid(8, 16)
        d = pixel_to_dir(4.0, 8.0, g)
        assert np.allclose(d, [0.0, 0.0, 1.0])

    def test_east(self):
        g = ErpGrid(8, 16)
        d = pixel_to_dir(4.0, 12.0, g)
        assert np.allclose(d, [1.0, 0.0, 0.0])

    def test_example_pixel_center(self):
        # H=2, W=4, pixel (1, 2): phi = -pi/4, theta = pi/4
        g = ErpGrid(2, 4)
        d = pixel_to_dir(1.5, 2.5, g)
        expected = [0.5, -np.sqrt(2) / 2, 0.5]
        assert np.allclose(d, expected)

    def test_unit_norm(self, rng):
        g = ErpGrid(16, 32)
        y = rng.uniform(0, g.height, 500)
        x = rng.uniform(0, g.width, 500)
        d = pixel_to_dir(y, x, g)
        assert np.allclose(np.linalg.norm(d, axis=-1), 1.0, atol=1e-12)

    def test_poles(self):
        g = ErpGrid(8, 16)
        y, x = dir_to_pixel(np.array([0.0, 1.0, 0.0]), g)
        assert y == 0.0 and x == 0.0
        y, x = dir_to_pixel(np.array([0.0, -1.0, 0.0]), g)
        assert y == g.height and x == 0.0

    def test_round_trip_pixels(self, rng):
        g = ErpGrid(64, 128)
        y = rng.uniform(0.01, g.height - 0.01, 2000)
        x = rng.uniform(0.0, g.width - 1e-9, 2000)
        d = pixel_to_dir(y, x, g)
        y2, x2 = dir_to_pixel(d, g)
        assert np.max(np.abs(y2 - y)) < 1e-6
        # wrap-aware column distance
        dx = np.abs(x2 - x)
        dx = np.minimum(dx, g.width - dx)
        assert np.max(dx) < 1e-6

    def test_round_trip_dirs(self, rng):
        g = ErpGrid(64, 128)
        d = rng.normal(size=(2000, 3))
        d /= np.linalg.norm(d, axis=-1, keepdims=True)
        y, x = dir_to_pixel(d, g)
        d2 = pixel_to_dir(y, x, g)
        assert np.max(np.abs(d2 - d)) < 1e-9

    def test_x_in_range(self, rng):
        g = ErpGrid(32, 64)
        d = rng.normal(size=(5000, 3))
        d /= np.linalg.norm(d, axis=-1, keepdims=True)
        _, x = dir_to_pixel(d, g)
        assert np.all(x >= 0.0) and np.all(x < g.width)

    def test_rejects_non_unit(self):
        g = ErpGrid(8, 16)
        with pytest.raises(ValueError, match="unit"):
            dir_to_pixel(np.array([0.0, 0.0, 2.0]), g)


class TestWeights:
    def test_h4_values(self):
        g = ErpGrid(4, 8)
        assert erp_weight_row(0, g) == pytest.approx(np.cos(3 * np.pi / 8))
        assert erp_weight_row(1, g) == pytest.approx(np.cos(np.pi / 8))
        assert erp_weight_row(3, g) == pytest.approx(erp_weight_row(0, g))

    def test_symmetry(self):
        g = ErpGrid(16, 32)
        w = erp_weight_row(np.arange(16), g)
        assert np.allclose(w, w[::-1])
        assert np.all(w > 0.0)

    def test_riemann_sum(self):
        # mean weight approximates (1/pi) * integral of cos = 2/pi
        g = ErpGrid(512, 1024)
        w = erp_weight_row(np.arange(512), g)
        assert abs(w.mean() - 2.0 / np.pi) / (2.0 / np.pi) < 0.01

    def test_map_shape(self):
        g = ErpGrid(6, 12)
        m = erp_weight_map(g)
        assert m.shape == (6, 12)
        assert np.allclose(m[:, 0], m[:, 5])


class TestWarp:
    def test_equator_identity(self):
        g = ErpGrid(8, 16)
        x = np.linspace(0, 15, 16)
        assert np.array_equal(warp_coords(x, 4.0, g), x)

    def test_pole_collapses(self):
        g = ErpGrid(8, 16)
        x = np.linspace(0, 15, 16)
        assert np.allclose(warp_coords(x, 0.0, g), 8.0)

    def test_quarter(self):
        # y = H/4 -> phi = pi/4 -> x' = xc + (x - xc) sqrt(2)/2
        g = ErpGrid(8, 16)
        out = warp_coords(0.0, 2.0, g)
        assert out == pytest.approx(8.0 * (1 - np.sqrt(2) / 2))

    def test_contraction(self, rng):
        g = ErpGrid(32, 64)
        x = rng.uniform(0, 64, 100)
        for y in (3.0, 10.0, 29.0):
            out = warp_coords(x, y, g)
            assert np.all(np.abs(out - 32.0) <= np.abs(x - 32.0) + 1e-12)


class TestResample:
    def test_bilinear_constant(self):
        img = np.full((8, 16, 3), 0.37)
        vals = sample_bilinear(img, np.array([0.2, 4.7]), np.array([15.9, 0.1]))
        assert np.array_equal(vals, np.full((2, 3), 0.37))

    def test_perspective_constant_exact(self):
        pano = np.full((32, 64, 3), 0.61)
        out = erp_to_perspective(pano, np.array([1.0, 0, 0, 0]), np.pi / 2, 16, 16)
        assert np.array_equal(out, np.full((16, 16, 3), 0.61))

    def test_perspective_scaling_commutes(self, rng):
        grid = ErpGrid(32, 64)
        pano = make_smooth_pano(grid, None).rgb
        q = rng.normal(size=4)
        q /= np.linalg.norm(q)
        a = erp_to_perspective(pano, q, 1.2, 20, 14)
        b = erp_to_perspective(0.5 * pano, q, 1.2, 20, 14)
        assert np.allclose(b, 0.5 * a, atol=1e-12)

    def test_perspective_center_looks_forward(self):
        grid = ErpGrid(64, 128)
        pano = make_smooth_pano(grid, None).rgb
        out = erp_to_perspective(pano, np.array([1.0, 0, 0, 0]), np.pi / 2, 64, 64)
        # center of the view samples the pano at (H/2, W/2)
        expected = sample_bilinear(pano, 32.0, 64.0)
        assert np.allclose(out[31:33, 31:33].mean(axis=(0, 1)), expected, atol=0.02)

    def test_perspective_rejects_bad_fov(self):
        pano = np.zeros((8, 16))
        with pytest.raises(ValueError):
            erp_to_perspective(pano, np.array([1.0, 0, 0, 0]), 0.0, 8, 8)


def _psnr(a, b):
    mse = np.mean((a - b) ** 2)
    return 10.0 * np.log10(1.0 / mse) if mse > 0 else np.inf


class TestCubemap:
    def test_face_count_and_shape_errors(self):
        with pytest.raises(ValueError, match="six"):
            perspective_to_erp([np.zeros((4, 4))] * 5, ErpGrid(4, 8))
        faces = [np.zeros((4, 4))] * 5 + [np.zeros((4, 6))]
        with pytest.raises(ValueError, match="shape"):
            perspective_to_erp(faces, ErpGrid(4, 8))

    def test_orientations_axes(self):
        from panosplat.quat import quat_to_rot

        axes = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
        for q, axis in zip(CUBE_FACE_ORIENTATIONS, axes):
            fwd = quat_to_rot(np.asarray(q)) @ np.array([0.0, 0.0, 1.0])
            assert np.allclose(fwd, axis, atol=1e-12)

    def test_round_trip_psnr(self):
        grid = ErpGrid(256, 512)
        pano = make_smooth_pano(grid, None).rgb
        faces = [
            erp_to_perspective(pano, q, np.pi / 2, grid.height, grid.height)
            for q in CUBE_FACE_ORIENTATIONS
        ]
        back = perspective_to_erp(faces, grid)
        assert _psnr(back, pano) >= 35.0

    def test_constant_round_trip(self):
        grid = ErpGrid(32, 64)
        faces = [np.full((32, 32, 3), 0.25)] * 6
        back = perspective_to_erp(faces, grid)
        assert np.array_equal(back, np.full((32, 64, 3), 0.25))
