"""Ray tracing backend: BVH, camera model, path tracer and render passes."""

from synthgen.render.bvh import Bvh, BvhCache, Hit, Ray, build_bvh, intersect_nearest
from synthgen.render.camera import camera_rays, generate_camera_ray
from synthgen.render.frames import PASSES, FrameBuffer, render_frame
from synthgen.render.tracer import RenderSettings, trace_path, trace_paths

__all__ = [
    "PASSES",
    "Bvh",
    "BvhCache",
    "FrameBuffer",
    "Hit",
    "Ray",
    "RenderSettings",
    "build_bvh",
    "camera_rays",
    "generate_camera_ray",
    "intersect_nearest",
    "render_frame",
    "trace_path",
    "trace_paths",
]
