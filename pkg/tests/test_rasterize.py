from __future__ import annotations

import numpy as np
import pytest

from panosplat.lift import Panorama, lift_panorama
from panosplat.rasterize import (
    CameraPose,
    PerspectiveIntrinsics,
    RenderOutput,
    render_backward,
    render_erp,
    render_perspective,
)
from panosplat.scene import Gaussian, GaussianScene
from panosplat.sphere import ErpGrid
from conftest import GRAD_INTR, make_blob_scene, make_wild_scene
from oracles import finite_difference_grads, splat_reference

IDENTITY_POSE = CameraPose(position=np.zeros(3), orientation=np.array([1.0, 0, 0, 0]))


def _single(mu, scale=0.15, logit=3.0, color=(1.0, 0.2, 0.2)):
    return GaussianScene.from_gaussians(
        [
            Gaussian(
                mu=np.asarray(mu, dtype=float),
                log_scale=np.full(3, np.log(scale)),
                rot=np.array([1.0, 0, 0, 0]),
                opacity_logit=logit,
                color=np.asarray(color, dtype=float),
            )
        ]
    )


class TestForwardBasics:
    def test_empty_scene(self):
        intr = PerspectiveIntrinsics(fov_y=1.0, width=8, height=6)
        out = render_perspective(GaussianScene.empty(), IDENTITY_POSE, intr)
        assert np.array_equal(out.rgb, np.zeros((6, 8, 3)))
        assert np.array_equal(out.alpha, np.zeros((6, 8)))
        assert np.array_equal(out.depth, np.zeros((6, 8)))

    def test_behind_camera_culled(self):
        intr = PerspectiveIntrinsics(fov_y=1.0, width=8, height=6)
        out = render_perspective(_single([0, 0, -2.0]), IDENTITY_POSE, intr)
        assert np.all(out.alpha == 0)

    def test_alpha_in_range(self, rng):
        intr = PerspectiveIntrinsics(fov_y=1.2, width=32, height=24)
        for _ in range(5):
            scene = make_wild_scene(rng, 12)
            out = render_perspective(scene, IDENTITY_POSE, intr)
            assert np.all(out.alpha >= 0.0)
            assert np.all(out.alpha < 1.0)
            assert np.all(out.rgb >= 0.0)

    def test_depth_of_single_splat(self):
        intr = PerspectiveIntrinsics(fov_y=1.0, width=16, height=16)
        out = render_perspective(_single([0, 0, 3.0], scale=0.4, logit=6.0), IDENTITY_POSE, intr)
        center = out.depth[8, 8]
        assert abs(center - 3.0) < 1e-6
        assert out.alpha[8, 8] > 0.9

    def test_determinism(self, rng):
        intr = PerspectiveIntrinsics(fov_y=1.2, width=24, height=20)
        scene = make_wild_scene(rng, 20)
        a = render_perspective(scene, IDENTITY_POSE, intr)
        b = render_perspective(scene, IDENTITY_POSE, intr)
        assert np.array_equal(a.rgb, b.rgb)
        assert np.array_equal(a.alpha, b.alpha)
        assert np.array_equal(a.depth, b.depth)

    def test_color_clamped_at_render(self):
        intr = PerspectiveIntrinsics(fov_y=1.0, width=8, height=8)
        out = render_perspective(
            _single([0, 0, 2.0], scale=0.5, logit=8.0, color=(2.0, -1.0, 0.5)),
            IDENTITY_POSE,
            intr,
        )
        assert out.rgb[4, 4, 0] <= 1.0
        assert out.rgb[4, 4, 1] >= 0.0

    def test_two_splat_blend_formula(self):
        # direct two-term expansion of the blending equation at one pixel
        intr = PerspectiveIntrinsics(fov_y=1.0, width=9, height=9)
        near = _single([0, 0, 2.0], scale=0.8, logit=0.5, color=(1.0, 0.0, 0.0))
        far = _single([0, 0, 4.0], scale=1.6, logit=1.0, color=(0.0, 1.0, 0.0))
        both = GaussianScene.from_gaussians([near[0], far[0]])
        out_near = render_perspective(near, IDENTITY_POSE, intr)
        out_far = render_perspective(far, IDENTITY_POSE, intr)
        out = render_perspective(both, IDENTITY_POSE, intr)
        a1 = out_near.alpha[4, 4]
        a2 = out_far.alpha[4, 4]
        expected_r = a1 * 1.0
        expected_g = (1.0 - a1) * a2
        assert out.rgb[4, 4, 0] == pytest.approx(expected_r, abs=1e-12)
        assert out.rgb[4, 4, 1] == pytest.approx(expected_g, abs=1e-12)
        assert out.alpha[4, 4] == pytest.approx(a1 + (1 - a1) * a2, abs=1e-12)

    def test_aa_compensation_shrinks_small_splats(self):
        intr = PerspectiveIntrinsics(fov_y=1.0, width=16, height=16)
        # offset so the projection lands exactly on the (8, 8) pixel center
        off = 0.5 * 4.0 / intr.focal
        tiny = _single([off, -off, 4.0], scale=0.01, logit=2.0)
        sharp = render_perspective(tiny, IDENTITY_POSE, intr, aa_dilation=0.0)
        soft = render_perspective(tiny, IDENTITY_POSE, intr, aa_dilation=0.3)
        assert soft.alpha.max() < sharp.alpha.max()
        # but the dilated footprint must not gain total energy
        assert soft.alpha.sum() <= sharp.alpha.sum() * 1.5

    def test_near_plane_grazer_does_not_smear(self):
        # a splat far off-axis but barely past the near plane has a
        # linearized footprint wider than the image; the frustum-margin
        # cull must keep it from shading pixels it does not cover
        intr = PerspectiveIntrinsics(fov_y=np.pi / 2, width=32, height=32)
        grazer = _single([2.5, 0.011, -2.3], scale=0.1, logit=6.0)
        up = CameraPose(
            position=np.zeros(3),
            orientation=np.array([np.cos(-np.pi / 4), np.sin(-np.pi / 4), 0, 0]),
        )
        out = render_perspective(grazer, up, intr, aa_dilation=0.0)
        assert np.all(out.alpha == 0.0)

    def test_far_off_axis_center_culled(self):
        intr = PerspectiveIntrinsics(fov_y=1.0, width=16, height=16)
        # center projects at ~5x the image half-extent; tails must not leak
        wide = _single([3.0, 0, 1.1], scale=1.0, logit=8.0)
        out = render_perspective(wide, IDENTITY_POSE, intr, aa_dilation=0.0)
        assert np.all(out.alpha == 0.0)

    def test_rejects_bad_intrinsics(self):
        with pytest.raises(ValueError):
            PerspectiveIntrinsics(fov_y=4.0, width=8, height=8)
        with pytest.raises(ValueError):
            PerspectiveIntrinsics(fov_y=1.0, width=0, height=8)

    def test_rejects_bad_pose(self):
        with pytest.raises(ValueError, match="orientation"):
            CameraPose(position=np.zeros(3), orientation=np.array([1.0, 0.1, 0, 0]))
        with pytest.raises(ValueError, match="position"):
            CameraPose(position=np.array([0.0, np.nan, 0.0]), orientation=np.array([1.0, 0, 0, 0]))


class TestCompositorOracle:
    def test_matches_reference_on_random_scenes(self, rng):
        intr = PerspectiveIntrinsics(fov_y=1.1, width=36, height=28)
        for trial in range(8):
            k = int(rng.integers(1, 11))
            scene = make_wild_scene(rng, k)
            pos = rng.normal(scale=0.3, size=3)
            q = rng.normal(size=4)
            q /= np.linalg.norm(q)
            pose = CameraPose(position=pos, orientation=q)
            for aa in (0.3, 0.0):
                ours = render_perspective(scene, pose, intr, aa_dilation=aa)
                rgb, alpha, depth = splat_reference(scene, pose, intr, aa)
                assert np.max(np.abs(ours.rgb - rgb)) <= 1.0 / 255.0
                assert np.max(np.abs(ours.alpha - alpha)) <= 1.0 / 255.0

    def test_matches_reference_rotated_anisotropic(self, rng):
        intr = PerspectiveIntrinsics(fov_y=0.9, width=20, height=26)
        scene = make_blob_scene(rng, 5)
        ours = render_perspective(scene, IDENTITY_POSE, intr)
        rgb, alpha, _ = splat_reference(scene, IDENTITY_POSE, intr, 0.3)
        assert np.max(np.abs(ours.rgb - rgb)) <= 1.0 / 255.0
        assert np.max(np.abs(ours.alpha - alpha)) <= 1.0 / 255.0


def _fd_check(scene, pose, intr, rng, aa=0.3):
    g = rng.uniform(-1.0, 1.0, (intr.height, intr.width, 3))

    def loss(s):
        return float(np.sum(render_perspective(s, pose, intr, aa).rgb * g))

    analytic = render_backward(scene, pose, intr, g, aa)
    numeric = finite_difference_grads(loss, scene)
    for name in ("mu", "log_scale", "rot", "opacity_logit", "color"):
        a = getattr(analytic, name)
        n = numeric[name]
        tol = np.maximum(1e-3 * np.maximum(np.abs(a), np.abs(n)), 1e-6)
        ok = np.abs(a - n) <= tol
        assert np.all(ok), (
            f"{name}: worst {np.max(np.abs(a - n) - tol):.3e} "
            f"analytic {a[~ok][:3]} numeric {n[~ok][:3]}"
        )


class TestGradients:
    def test_gradcheck_small_batch(self, rng):
        for trial in range(6):
            k = int(rng.integers(1, 6))
            scene = make_blob_scene(rng, k)
            _fd_check(scene, IDENTITY_POSE, GRAD_INTR, rng)

    def test_gradcheck_rotated_camera(self, rng):
        q = rng.normal(size=4)
        q /= np.linalg.norm(q)
        pose = CameraPose(position=rng.normal(scale=0.1, size=3), orientation=q)
        # place splats in front of this camera: transform canonical scene
        scene = make_blob_scene(rng, 3)
        r = pose.rotation()
        scene.mu = scene.mu @ r.T + pose.position
        _fd_check(scene, pose, GRAD_INTR, rng)

    def test_gradcheck_no_aa(self, rng):
        scene = make_blob_scene(rng, 3)
        _fd_check(scene, IDENTITY_POSE, GRAD_INTR, rng, aa=0.0)

    def test_hits_and_screen_grad(self, rng):
        scene = make_blob_scene(rng, 4)
        # push one splat behind the camera
        scene.mu[2] = [0.0, 0.0, -5.0]
        g = rng.uniform(-1, 1, (GRAD_INTR.height, GRAD_INTR.width, 3))
        grads = render_backward(scene, IDENTITY_POSE, GRAD_INTR, g)
        assert grads.hits[2] == 0
        assert grads.screen_grad[2] == 0.0
        visible = [0, 1, 3]
        assert np.all(grads.hits[visible] == 1)
        assert np.all(grads.screen_grad[visible] > 0.0)

    def test_grad_shape_validation(self, rng):
        scene = make_blob_scene(rng, 2)
        with pytest.raises(ValueError, match="grad_rgb"):
            render_backward(scene, IDENTITY_POSE, GRAD_INTR, np.zeros((4, 4, 3)))

    def test_backward_empty_scene(self):
        grads = render_backward(
            GaussianScene.empty(), IDENTITY_POSE, GRAD_INTR,
            np.zeros((GRAD_INTR.height, GRAD_INTR.width, 3)),
        )
        assert grads.mu.shape == (0, 3)


class TestErpRender:
    def test_constant_pano_self_reconstruction(self):
        grid = ErpGrid(32, 64)
        rgb = np.full((32, 64, 3), [0.3, 0.6, 0.9])
        pano = Panorama(rgb=rgb, grid=grid, depth=np.full((32, 64), 2.0))
        scene = lift_panorama(pano, stride=1)
        out = render_erp(scene, np.zeros(3), grid)
        assert out.rgb.shape == (32, 64, 3)
        inner = slice(2, 30)  # poles are the hardest; keep them in view below
        assert np.mean(out.alpha) >= 0.9
        err = np.abs(out.rgb[inner] - rgb[inner])
        assert np.mean(err) < 0.05

    def test_depth_matches_lift_radius(self):
        grid = ErpGrid(32, 64)
        rgb = np.full((32, 64, 3), 0.5)
        pano = Panorama(rgb=rgb, grid=grid, depth=np.full((32, 64), 2.5))
        scene = lift_panorama(pano, stride=1)
        out = render_erp(scene, np.zeros(3), grid)
        sampled = out.depth[out.alpha > 0.9]
        assert np.median(np.abs(sampled - 2.5)) < 0.1
