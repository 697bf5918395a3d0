"""Pinhole camera rays, including a parallel stereo rig."""

from __future__ import annotations

import math

import numpy as np

from synthgen.render.bvh import Ray
from synthgen.scene import CameraIntrinsics, CameraKeyframe

EYES = ("mono", "left", "right")


def eye_offset(intrinsics: CameraIntrinsics, eye: str) -> float:
    if eye == "mono":
        return 0.0
    if eye == "left":
        return -intrinsics.interocular_distance / 2
    if eye == "right":
        return intrinsics.interocular_distance / 2
    raise ValueError(f"unknown eye '{eye}'")


def camera_rays(
    intrinsics: CameraIntrinsics,
    keyframe: CameraKeyframe,
    px: np.ndarray,
    py: np.ndarray,
    eye: str = "mono",
) -> tuple[np.ndarray, np.ndarray]:
    """World-space rays through continuous image coordinates.

    ``px`` runs 0..resolution_x left to right and ``py`` 0..resolution_y top
    to bottom, so pixel ``(x, y)`` has its center at ``(x + .5, y + .5)``.
    """
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    w, h = intrinsics.resolution_x, intrinsics.resolution_y
    tan_half = math.tan(intrinsics.vertical_fov / 2)
    sx = (2.0 * px / w - 1.0) * tan_half * (w / h)
    sy = (1.0 - 2.0 * py / h) * tan_half
    local = np.stack([sx, sy, -np.ones_like(sx)], axis=-1)
    local /= np.linalg.norm(local, axis=-1, keepdims=True)

    rot = keyframe.rotation_matrix()
    directions = local @ rot.T
    origin = np.asarray(keyframe.location, dtype=np.float64) + rot[:, 0] * eye_offset(intrinsics, eye)
    origins = np.broadcast_to(origin, directions.shape).copy()
    return origins, directions


def generate_camera_ray(
    intrinsics: CameraIntrinsics,
    keyframe: CameraKeyframe,
    x: int,
    y: int,
    u: float = 0.5,
    v: float = 0.5,
    eye: str = "mono",
) -> Ray:
    """Ray through pixel ``(x, y)`` at sub-pixel position ``(u, v)`` in [0, 1)."""
    if not (0 <= x < intrinsics.resolution_x and 0 <= y < intrinsics.resolution_y):
        raise ValueError(f"pixel ({x}, {y}) outside the image")
    origins, directions = camera_rays(intrinsics, keyframe, np.array([x + u]), np.array([y + v]), eye)
    return Ray(origins[0], directions[0])


def pixel_centers(intrinsics: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Row-major pixel-center coordinates for the whole image."""
    ys, xs = np.divmod(np.arange(intrinsics.resolution_x * intrinsics.resolution_y), intrinsics.resolution_x)
    return xs + 0.5, ys + 0.5
