"""Built-in pipeline modules, registered under their config names.

Each module reads its settings (its ``config`` tree merged over
``global.all``) at construction and mutates the pipeline state in ``run``.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from synthgen.errors import Exhausted, SchemaError
from synthgen.loader import load_camera_poses, load_lights, load_obj
from synthgen.pipeline import DEFAULT_SEED, Module, PipelineState, register
from synthgen.render.frames import render_frame
from synthgen.render.tracer import RenderSettings
from synthgen.sampler import (
    DEFAULT_GRID,
    DEFAULT_MAX_ATTEMPTS,
    ProximitySpec,
    check_proximity,
    resolve_sampler,
    sample,
    sample_collision_free,
)
from synthgen.scene import CameraIntrinsics, CameraKeyframe, Light, compute_aabb, look_at_rotation
from synthgen.writer import export_png, write_container

log = logging.getLogger(__name__)


@register("main.Initializer")
class Initializer(Module):
    """Clears the scene and sets render defaults.

    Defaults are 512x512, 32 samples, seed 42; any render setting key in the
    module settings overrides them. ``fov`` sets the vertical field of view
    in radians.
    """

    def run(self, state: PipelineState) -> None:
        state.scene.clear()
        state.pending_frames.clear()
        seed = int(self.settings.get("seed", state.seed if state.seed is not None else DEFAULT_SEED))
        state.seed = seed
        state.render_defaults = RenderSettings.from_mapping(self.settings, RenderSettings(seed=seed))
        if "output_dir" in self.settings:
            state.output_dir = Path(self.settings["output_dir"])
        defaults = state.render_defaults
        state.scene.intrinsics = CameraIntrinsics(
            resolution_x=defaults.resolution_x,
            resolution_y=defaults.resolution_y,
            vertical_fov=float(self.settings.get("fov", CameraIntrinsics.vertical_fov)),
            stereo=defaults.stereo,
            interocular_distance=float(
                self.settings.get("interocular_distance", CameraIntrinsics.interocular_distance)
            ),
        )


@register("loader.ObjLoader")
class ObjLoader(Module):
    """Loads one OBJ file (``path``); optional ``category_id`` for all its objects."""

    def __init__(self, settings):
        super().__init__(settings)
        self.path = settings.get("path")
        self.category_id = settings.get("category_id", None)

    def run(self, state: PipelineState) -> None:
        meshes = load_obj(state.scene, self.path, category_id=self.category_id)
        log.info("loaded %d object(s) from %s", len(meshes), self.path)


@register("loader.CameraLoader")
class CameraLoader(Module):
    """Appends keyframes from a pose file.

    Settings: ``path``, ``file_format`` (e.g. ``"location_x location_y
    location_z rotation_x rotation_y rotation_z"``), optional ``fov`` and
    ``interocular_distance``.
    """

    def __init__(self, settings):
        super().__init__(settings)
        self.path = settings.get("path")
        self.file_format = settings.get("file_format")

    def run(self, state: PipelineState) -> None:
        changes = {}
        if "fov" in self.settings:
            changes["vertical_fov"] = float(self.settings["fov"])
        if "interocular_distance" in self.settings:
            changes["interocular_distance"] = float(self.settings["interocular_distance"])
        if changes:
            state.scene.intrinsics = state.scene.intrinsics.with_(**changes)
        load_camera_poses(state.scene, self.path, self.file_format)


@register("loader.LightLoader")
class LightLoader(Module):
    """Adds point lights from a file (``path`` + ``file_format``) and/or a ``lights`` list.

    List items are ``{"location": <3-vector or sampler tree>, "intensity": [r, g, b]}``.
    """

    def __init__(self, settings):
        super().__init__(settings)
        self.path = settings.get("path", None)
        self.file_format = settings.get("file_format", "location_x location_y location_z")
        self.lights = settings.get("lights", [])
        if self.path is None and not self.lights:
            raise SchemaError("LightLoader needs 'path' or 'lights'")
        self.specs = [resolve_sampler(item["location"]) for item in self.lights]

    def run(self, state: PipelineState) -> None:
        if self.path is not None:
            load_lights(state.scene, self.path, self.file_format)
        rng = state.rng()
        for item, spec in zip(self.lights, self.specs):
            intensity = tuple(float(v) for v in item.get("intensity", (1.0, 1.0, 1.0)))
            state.scene.add_light(Light(tuple(sample(spec, rng)), intensity))


@register("sampler.CameraSampler")
class CameraSampler(Module):
    """Samples camera poses that pass the proximity checks.

    Settings: ``location`` (sampler tree or 3-vector), either ``look_at``
    (sampler tree or 3-vector) with an optional world ``up`` vector (default
    +Z), or ``rotation`` (Euler XYZ, sampler tree or 3-vector),
    ``number_of_samples`` (default 1), ``proximity_checks``,
    ``proximity_grid`` (default 10) and ``max_attempts`` per pose (default 1000).
    """

    def __init__(self, settings):
        super().__init__(settings)
        self.location = resolve_sampler(settings.get("location"))
        self.look_at = None
        self.rotation = None
        self.up = tuple(float(v) for v in settings.get("up", (0.0, 0.0, 1.0)))
        if len(self.up) != 3 or not any(self.up):
            raise SchemaError("CameraSampler 'up' must be a non-zero 3-vector")
        if "look_at" in settings:
            self.look_at = resolve_sampler(settings["look_at"])
        else:
            self.rotation = resolve_sampler(settings.get("rotation", [0.0, 0.0, 0.0]))
        self.count = int(settings.get("number_of_samples", 1))
        self.proximity = ProximitySpec.from_mapping(settings.get("proximity_checks", None))
        self.grid = int(settings.get("proximity_grid", DEFAULT_GRID))
        self.max_attempts = int(settings.get("max_attempts", DEFAULT_MAX_ATTEMPTS))

    def _draw(self, rng) -> tuple[np.ndarray, tuple[float, float, float]]:
        location = sample(self.location, rng)
        if self.look_at is not None:
            rotation = look_at_rotation(location, sample(self.look_at, rng), self.up)
        else:
            rotation = tuple(float(v) for v in sample(self.rotation, rng))
        return location, rotation

    def run(self, state: PipelineState) -> None:
        rng = state.rng()
        bvh = state.bvh()
        intrinsics = state.scene.intrinsics
        for _ in range(self.count):
            for _attempt in range(self.max_attempts):
                location, rotation = self._draw(rng)
                pose = CameraKeyframe(tuple(location), rotation, len(state.scene.keyframes))
                if check_proximity(pose, intrinsics, self.proximity, bvh, self.grid):
                    state.scene.add_camera_keyframe(location, rotation)
                    break
            else:
                raise Exhausted(self.max_attempts, "camera pose")


@register("sampler.ObjectPlacer")
class ObjectPlacer(Module):
    """Moves objects to collision-free positions inside a ``location`` box.

    ``objects`` lists object names to place (default: every object); each is
    checked against the bounding boxes of all other objects.
    """

    def __init__(self, settings):
        super().__init__(settings)
        self.location = resolve_sampler(settings.get("location"))
        self.names = settings.get("objects", None)
        self.max_attempts = int(settings.get("max_attempts", DEFAULT_MAX_ATTEMPTS))

    def run(self, state: PipelineState) -> None:
        rng = state.rng()
        scene = state.scene
        targets = [m for m in scene.meshes if self.names is None or m.object_name in self.names]
        for mesh in targets:
            lo, hi = compute_aabb(mesh)
            center, _ = sample_collision_free(
                self.location, (lo, hi), scene.object_aabbs(exclude=mesh), rng, self.max_attempts
            )
            scene.translate_mesh(mesh, center - (lo + hi) / 2)


class _Renderer(Module):
    renders = True
    passes: tuple[str, ...] = ()

    def render_settings(self, state: PipelineState) -> RenderSettings:
        return RenderSettings.from_mapping(self.settings, state.render_defaults)

    def run(self, state: PipelineState) -> None:
        settings = self.render_settings(state)
        bvh = state.bvh()
        frames = []
        for pass_name in self.passes_for(settings):
            for keyframe in state.scene.keyframes:
                frames.extend(render_frame(state.scene, bvh, keyframe, settings, pass_name, state.threads))
        state.add_frames(frames)
        log.info(
            "%s: %d buffer(s) at %dx%d",
            self.name, len(frames), settings.resolution_x, settings.resolution_y,
        )

    def passes_for(self, settings: RenderSettings) -> tuple[str, ...]:
        return self.passes


@register("renderer.RgbRenderer")
class RgbRenderer(_Renderer):
    """Path-traced colors; with ``render_depth`` also the z-depth pass."""

    def passes_for(self, settings):
        return ("colors", "depth") if settings.render_depth else ("colors",)


@register("renderer.NormalRenderer")
class NormalRenderer(_Renderer):
    passes = ("normals",)


@register("renderer.SegMapRenderer")
class SegMapRenderer(_Renderer):
    """Class (``map_by: class``) or instance (``map_by: instance``) segmentation."""

    passes = ("segmap",)


@register("writer.ContainerWriter")
class ContainerWriter(Module):
    """Writes ``{index}.bpc`` per keyframe into ``output_dir``; ``export_png`` adds previews."""

    writes = True

    def run(self, state: PipelineState) -> None:
        out_dir = Path(self.settings.get("output_dir", state.output_dir))
        out_dir.mkdir(parents=True, exist_ok=True)
        png = bool(self.settings.get("export_png", state.export_png))
        for keyframe in state.scene.keyframes:
            frames = state.frames_for(keyframe.frame_index)
            path = write_container(frames, out_dir, keyframe.frame_index)
            state.written.append(path)
            if png:
                export_png(frames, out_dir)
