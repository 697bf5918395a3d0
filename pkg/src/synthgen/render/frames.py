"""Render passes for a single camera keyframe."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from synthgen.render.bvh import Bvh
from synthgen.render.camera import camera_rays, pixel_centers
from synthgen.render.tracer import MaterialArrays, RenderSettings, trace_paths
from synthgen.scene import CameraIntrinsics, CameraKeyframe, Scene

PASSES = ("colors", "depth", "normals", "segmap")

# fixed work partition: results never depend on the thread count
TILE_PIXELS = 1024
PATH_BATCH = 1 << 16

_EYE_CODE = {"mono": 0, "left": 1, "right": 2}


@dataclass
class FrameBuffer:
    pass_name: str
    data: np.ndarray
    keyframe: int
    eye: str = "mono"
    key: str = ""
    mapping: list[dict] | None = field(default=None)

    def __post_init__(self):
        if not self.key:
            self.key = self.pass_name

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def intrinsics_for(scene: Scene, settings: RenderSettings) -> CameraIntrinsics:
    return scene.intrinsics.with_(
        resolution_x=settings.resolution_x,
        resolution_y=settings.resolution_y,
        stereo=settings.stereo,
    )


def _workers(threads: int) -> int:
    if threads == 0:
        return os.cpu_count() or 1
    return max(1, threads)


def _map_tiles(fn, n_tiles: int, threads: int) -> list:
    workers = _workers(threads)
    if workers == 1 or n_tiles == 1:
        return [fn(i) for i in range(n_tiles)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n_tiles)))


def render_colors(scene, bvh, keyframe, settings, intrinsics, eye="mono", threads=1) -> np.ndarray:
    n_pixels = intrinsics.resolution_x * intrinsics.resolution_y
    xs, ys = pixel_centers(intrinsics)
    xs, ys = xs - 0.5, ys - 0.5
    mats = MaterialArrays.from_scene(scene, bvh) if bvh is not None else None
    n_tiles = -(-n_pixels // TILE_PIXELS)

    def tile(index: int) -> np.ndarray:
        lo, hi = index * TILE_PIXELS, min(n_pixels, (index + 1) * TILE_PIXELS)
        rng = np.random.default_rng(
            np.random.SeedSequence([settings.seed, keyframe.frame_index, _EYE_CODE[eye], index])
        )
        count = hi - lo
        total = np.zeros((count, 3))
        chunk = max(1, PATH_BATCH // count)
        done = 0
        while done < settings.samples:
            spp = min(chunk, settings.samples - done)
            jitter = rng.random((count, spp, 2))
            px = (xs[lo:hi, None] + jitter[..., 0]).ravel()
            py = (ys[lo:hi, None] + jitter[..., 1]).ravel()
            origins, directions = camera_rays(intrinsics, keyframe, px, py, eye)
            radiance = trace_paths(bvh, scene, origins, directions, settings, rng, mats)
            total += radiance.reshape(count, spp, 3).sum(axis=1)
            done += spp
        return total / settings.samples

    tiles = _map_tiles(tile, n_tiles, threads)
    image = np.concatenate(tiles, axis=0)
    return image.reshape(intrinsics.resolution_y, intrinsics.resolution_x, 3)


def primary_hits(bvh: Bvh | None, intrinsics, keyframe, eye="mono"):
    """Pixel-center rays and their nearest hits (no jitter)."""
    xs, ys = pixel_centers(intrinsics)
    origins, directions = camera_rays(intrinsics, keyframe, xs, ys, eye)
    if bvh is None:
        return origins, directions, None
    return origins, directions, bvh.intersect(origins, directions)


def render_depth(bvh, keyframe, intrinsics, eye="mono") -> np.ndarray:
    origins, directions, hits = primary_hits(bvh, intrinsics, keyframe, eye)
    depth = np.full(len(origins), np.inf)
    if hits is not None:
        forward = keyframe.forward()
        hit = hits.hit
        depth[hit] = hits.t[hit] * (directions[hit] @ forward)
    return depth.reshape(intrinsics.resolution_y, intrinsics.resolution_x)


def render_normals(bvh, keyframe, intrinsics, eye="mono") -> np.ndarray:
    origins, directions, hits = primary_hits(bvh, intrinsics, keyframe, eye)
    normals = np.zeros((len(origins), 3))
    if hits is not None:
        hit = hits.hit
        sub = type(hits)(hits.t[hit], hits.tri[hit], hits.bary[hit])
        _, _, ns = bvh.surface(sub, origins[hit], directions[hit])
        # world -> camera: inverse of the camera-to-world rotation
        cam = ns @ keyframe.rotation_matrix()
        normals[hit] = cam / np.linalg.norm(cam, axis=1, keepdims=True)
    return normals.reshape(intrinsics.resolution_y, intrinsics.resolution_x, 3)


def render_segmap(scene, bvh, keyframe, intrinsics, map_by="class", eye="mono"):
    origins, directions, hits = primary_hits(bvh, intrinsics, keyframe, eye)
    seg = np.zeros(len(origins), dtype=np.int32)
    if map_by == "class":
        per_mesh = np.array([m.category_id for m in scene.meshes], dtype=np.int32)
    elif map_by == "instance":
        per_mesh = np.array([m.instance_id for m in scene.meshes], dtype=np.int32)
    else:
        raise ValueError(f"map_by must be 'class' or 'instance', got '{map_by}'")
    if hits is not None:
        hit = hits.hit
        seg[hit] = per_mesh[bvh.mesh_index[hits.tri[hit]]]
    mapping = None
    if map_by == "instance":
        mapping = [
            {"id": m.instance_id, "name": m.object_name, "category_id": m.category_id}
            for m in scene.meshes
        ]
    return seg.reshape(intrinsics.resolution_y, intrinsics.resolution_x), mapping


def eyes_for(settings: RenderSettings) -> tuple[str, ...]:
    return ("left", "right") if settings.stereo else ("mono",)


def render_frame(
    scene: Scene,
    bvh: Bvh | None,
    keyframe: CameraKeyframe,
    settings: RenderSettings,
    pass_name: str,
    threads: int = 1,
) -> list[FrameBuffer]:
    """Render one pass for one keyframe; returns one buffer per eye."""
    intrinsics = intrinsics_for(scene, settings)
    frames = []
    for eye in eyes_for(settings):
        mapping = None
        if pass_name == "colors":
            data = render_colors(scene, bvh, keyframe, settings, intrinsics, eye, threads).astype(np.float32)
            key = "colors"
        elif pass_name == "depth":
            data = render_depth(bvh, keyframe, intrinsics, eye).astype(np.float32)
            key = settings.depth_output_key
        elif pass_name == "normals":
            data = render_normals(bvh, keyframe, intrinsics, eye).astype(np.float32)
            key = "normals"
        elif pass_name == "segmap":
            data, mapping = render_segmap(scene, bvh, keyframe, intrinsics, settings.map_by, eye)
            key = "segmap"
        else:
            raise ValueError(f"unknown pass '{pass_name}'")
        frames.append(FrameBuffer(pass_name, data, keyframe.frame_index, eye, key, mapping))
    return frames
