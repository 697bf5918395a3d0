import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synthgen.render import camera_rays, generate_camera_ray
from synthgen.scene import CameraIntrinsics, CameraKeyframe

ORIGIN = CameraKeyframe((0.0, 0.0, 0.0))


def test_center_ray_is_optical_axis():
    intr = CameraIntrinsics(65, 33)
    ray = generate_camera_ray(intr, ORIGIN, 32, 16)
    assert np.allclose(ray.direction, [0, 0, -1], atol=1e-9)


def test_even_resolution_center_corner():
    intr = CameraIntrinsics(64, 64)
    ray = generate_camera_ray(intr, ORIGIN, 32, 32, 0.0, 0.0)
    assert np.allclose(ray.direction, [0, 0, -1], atol=1e-12)


def test_stereo_rig_is_parallel():
    intr = CameraIntrinsics(32, 24, stereo=True, interocular_distance=0.07)
    kf = CameraKeyframe((1.0, 2.0, 3.0), (0.3, -0.4, 1.1))
    left = generate_camera_ray(intr, kf, 5, 7, eye="left")
    right = generate_camera_ray(intr, kf, 5, 7, eye="right")
    assert np.allclose(left.direction, right.direction)
    x_axis = kf.rotation_matrix()[:, 0]
    assert np.allclose(right.origin - left.origin, 0.07 * x_axis, atol=1e-12)
    assert np.allclose((left.origin + right.origin) / 2, kf.location)


@pytest.mark.parametrize("res_y", [2, 9, 64, 513])
def test_top_center_matches_frustum(res_y):
    intr = CameraIntrinsics(res_y + 1 - res_y % 2, res_y, vertical_fov=math.pi / 2)
    ray = generate_camera_ray(intr, ORIGIN, intr.resolution_x // 2, 0)
    angle = math.acos(-ray.direction[2])
    assert abs(angle - math.atan(1 - 1 / res_y)) < 1e-12
    assert ray.direction[1] > 0


def test_pixel_outside_image():
    with pytest.raises(ValueError):
        generate_camera_ray(CameraIntrinsics(4, 4), ORIGIN, 4, 0)


def test_zero_pose_sees_point_on_negative_z():
    intr = CameraIntrinsics(11, 11)
    ray = generate_camera_ray(intr, ORIGIN, 5, 5)
    d = 3.7
    assert np.allclose(ray.origin + d * ray.direction, [0, 0, -d])


@given(st.tuples(*[st.floats(-3.2, 3.2)] * 3), st.floats(0.05, 3.0))
@settings(max_examples=50)
def test_rays_unit_and_inside_frustum(rotation, fov):
    intr = CameraIntrinsics(20, 10, vertical_fov=fov)
    kf = CameraKeyframe((0, 0, 0), rotation)
    xs, ys = np.meshgrid(np.linspace(0, 20, 7), np.linspace(0, 10, 5))
    _, dirs = camera_rays(intr, kf, xs.ravel(), ys.ravel())
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1)
    local = dirs @ kf.rotation_matrix()
    assert (local[:, 2] < 0).all()
    assert (np.abs(local[:, 1] / -local[:, 2]) <= math.tan(fov / 2) * (1 + 1e-12)).all()
