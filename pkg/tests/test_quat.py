from __future__ import annotations

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from panosplat.quat import (
    quat_about_x,
    quat_about_y,
    quat_normalize,
    quat_to_rot,
    quat_to_rot_jacobian,
)


def test_matches_scipy(rng):
    q = rng.normal(size=(50, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    ours = quat_to_rot(q)
    theirs = Rotation.from_quat(q[:, [1, 2, 3, 0]]).as_matrix()
    assert np.allclose(ours, theirs, atol=1e-12)


def test_axis_rotations():
    r = quat_to_rot(quat_about_y(np.pi / 2))
    assert np.allclose(r @ [0, 0, 1], [1, 0, 0], atol=1e-12)
    r = quat_to_rot(quat_about_x(np.pi / 2))
    assert np.allclose(r @ [0, 1, 0], [0, 0, 1], atol=1e-12)


def test_normalize_rejects_zero():
    with pytest.raises(ValueError):
        quat_normalize(np.zeros(4))


def test_jacobian_finite_difference(rng):
    q = rng.normal(size=(10, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    jac = quat_to_rot_jacobian(q)
    eps = 1e-6
    for k in range(10):
        for j in range(4):
            hi = q[k].copy()
            lo = q[k].copy()
            hi[j] += eps
            lo[j] -= eps
            # derivative of the un-normalized quadratic form
            num = (quat_to_rot(hi) - quat_to_rot(lo)) / (2 * eps)
            assert np.allclose(jac[k, j], num, atol=1e-6)
