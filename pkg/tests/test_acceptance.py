"""Acceptance criteria, one test per criterion, each with its time budget.

A PASS/FAIL line per criterion is printed in the terminal summary (see conftest).
"""

import io
import json
import time

import numpy as np
import pytest
from scipy import stats

from synthgen.cli import run
from synthgen.config import parse_config, resolve_module_config, substitute_args
from synthgen.pipeline import build_pipeline, initial_state, run_pipeline
from synthgen.render import Bvh, BvhCache, RenderSettings, render_frame
from synthgen.sampler import ProximitySpec, check_proximity, proximity_distances, resolve_sampler, sample
from synthgen.scene import CameraIntrinsics, CameraKeyframe, Material, Scene
from synthgen.scenes import (
    cornell_config,
    furnace_radiance,
    furnace_scene,
    three_object_scene,
    wall,
    write_cornell_assets,
)
from synthgen.writer import decode_container, encode_container, read_container

from oracles import brute_force_nearest, camera_grid_directions, planes_mean_depth, random_rays, random_triangles


SETUP = """"setup": {
  "blender_install_path": "/PATH",
  "blender_version": "blender-2.80",
  "pip": [
    "h5py",
    "imageio"
  ]
}"""
GLOBAL = """"global": {
  "all": {
    "output_dir": "<args:0>"
  }
}"""
MODULES = """"modules": [
  {
    "name": "main.Initializer"
  },
  {
    "name": "loader.ObjLoader",
    "config": { "path": "<args:1>" }
  }
]"""


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.2f} s, budget {self.seconds} s"


def test_1_config_conformance(tri_obj, tmp_path):
    with Budget(1.0):
        text = "{\n" + ",\n".join([SETUP, GLOBAL, MODULES]) + "\n}\n"
        doc = substitute_args(parse_config(text), [str(tmp_path / "out"), str(tri_obj)])
        assert doc.setup.pip == ["h5py", "imageio"]
        assert doc.global_settings["all"]["output_dir"] == str(tmp_path / "out")
        assert resolve_module_config(doc, doc.modules[1])["path"] == str(tri_obj)

        modules = build_pipeline(doc)
        state = run_pipeline(modules, initial_state(doc, dry_run=True))
        assert [m.name for m in modules] == ["main.Initializer", "loader.ObjLoader"]
        assert state.events == ["main.Initializer", "loader.ObjLoader"]
        assert len(state.scene.meshes) == 1

        config = tmp_path / "config.yaml"
        config.write_text(text)
        out = io.StringIO()
        assert run(str(config), ["o", str(tri_obj)], dry_run=True, out=out) == 0
        plan = out.getvalue()
        assert plan.index("0: main.Initializer") < plan.index("1: loader.ObjLoader")


@pytest.mark.slow
def test_2_bvh_oracle():
    with Budget(60.0):
        rng = np.random.default_rng(2024)
        mismatched_ids = 0
        worst_dt = 0.0
        for _ in range(1000):
            tris = random_triangles(rng, int(rng.integers(1, 201)))
            origins, dirs = random_rays(rng, 100)
            hits = Bvh.from_triangles(tris).intersect(origins, dirs)
            ids, ts = brute_force_nearest(tris, origins, dirs)
            mismatched_ids += int((hits.tri != ids).sum())
            both = ids >= 0
            if both.any():
                worst_dt = max(worst_dt, float(np.abs(hits.t[both] - ts[both]).max()))
        assert mismatched_ids == 0
        assert worst_dt < 1e-9


@pytest.mark.slow
def test_3_furnace():
    with Budget(300.0):
        scene = furnace_scene(albedo=0.5, emission=0.2)
        settings = RenderSettings(16, 16, samples=4096, max_bounces=8)
        (frame,) = render_frame(scene, BvhCache().get(scene), scene.keyframes[0], settings, "colors", threads=1)
        expected = 0.2 * (1 - 0.5**9) / (1 - 0.5)
        assert expected == pytest.approx(furnace_radiance(0.5, 0.2, 8))
        assert abs(frame.data.mean() - expected) < 0.02 * expected


def test_4_pass_invariants():
    with Budget(30.0):
        scene = three_object_scene()
        bvh = BvhCache().get(scene)
        kf = scene.keyframes[0]
        settings = RenderSettings(64, 64, map_by="instance")
        (depth,) = render_frame(scene, bvh, kf, settings, "depth")
        (normals,) = render_frame(scene, bvh, kf, settings, "normals")
        (seg,) = render_frame(scene, bvh, kf, settings, "segmap")
        (cls,) = render_frame(scene, bvh, kf, RenderSettings(64, 64, map_by="class"), "segmap")

        wall_id = scene.meshes[0].instance_id
        on_wall = seg.data == wall_id
        assert on_wall.sum() > 100
        assert np.abs(depth.data[on_wall] - 4.0).max() <= 1e-6

        hit = np.isfinite(depth.data)
        assert np.abs(np.linalg.norm(normals.data[hit], axis=-1) - 1).max() <= 1e-4
        assert np.array_equal(seg.data == 0, ~hit)
        assert np.array_equal(cls.data == 0, ~hit)

        ids = sorted(np.unique(seg.data[hit]).tolist())
        assert ids == sorted(m.instance_id for m in scene.meshes)
        assert len(seg.mapping) == len(scene.meshes) == len(ids)
        assert {e["id"]: e["name"] for e in seg.mapping} == {m.instance_id: m.object_name for m in scene.meshes}


def test_5_sampler_statistics():
    with Budget(5.0):
        rng = np.random.default_rng(5)
        box = resolve_sampler({"name": "Uniform3dSampler", "parameters": {"min": [0, 0, 0], "max": [1, 1, 1]}})
        pts = np.array([sample(box, rng) for _ in range(10_000)])
        assert np.all(np.abs(pts.mean(axis=0) - 0.5) < 0.02)
        for axis in range(3):
            counts, _ = np.histogram(pts[:, axis], bins=10, range=(0, 1))
            assert stats.chisquare(counts).pvalue > 0.001

        sphere = resolve_sampler(
            {"name": "SphereSampler", "parameters": {"center": [0, 0, 1], "radius": 4, "mode": "SURFACE"}}
        )
        pts = np.array([sample(sphere, rng) for _ in range(10_000)]) - [0, 0, 1]
        radius = np.linalg.norm(pts, axis=1)
        assert np.abs(radius - 4).max() < 1e-9
        dirs = pts / radius[:, None]
        assert np.linalg.norm(dirs.mean(axis=0)) < 0.05
        octant = (dirs[:, 0] > 0) * 4 + (dirs[:, 1] > 0) * 2 + (dirs[:, 2] > 0)
        assert stats.chisquare(np.bincount(octant, minlength=8)).pvalue > 0.001


def _walls(*walls):
    scene = Scene()
    mat = scene.add_material(Material())
    for depth, x_range in walls:
        scene.add_mesh(wall(depth, x_range=x_range, material_id=mat))
    return BvhCache().get(scene)


def test_6_proximity_filter():
    with Budget(5.0):
        pose = CameraKeyframe((0.0, 0.0, 0.0))
        intr = CameraIntrinsics(64, 64)
        spec = ProximitySpec.from_mapping({"min": 1.0, "avg": [1, 4]})
        assert check_proximity(pose, intr, spec, _walls((2.0, None)))
        assert not check_proximity(pose, intr, spec, _walls((0.5, None)))

        two = _walls((1.0, (-100.0, 0.0)), (3.0, (0.0, 100.0)))
        mean = proximity_distances(pose, intr, two).mean()
        oracle = planes_mean_depth(camera_grid_directions(intr.vertical_fov, 64, 64, 100),
                                   [(1.0, -100.0, 0.0), (3.0, 0.0, 100.0)])
        assert abs(mean - oracle) < 1e-9
        assert check_proximity(pose, intr, ProximitySpec.from_mapping({"avg": {"min": 1, "max": 4}}), two)


def _cornell_config(tmp_path, n_poses, resolution, samples, stereo=False):
    obj, poses, light = write_cornell_assets(tmp_path, n_poses)
    path = tmp_path / "cornell.json"
    doc = cornell_config(obj, poses, light, resolution=resolution, samples=samples, stereo=stereo)
    path.write_text(json.dumps(doc, indent=2))
    return path


def test_7_determinism_and_container(tmp_path):
    config = _cornell_config(tmp_path, 2, 16, 4)
    a, b = tmp_path / "run_a", tmp_path / "run_b"
    assert run(str(config), [str(a)], seed=42, threads=1, out=io.StringIO()) == 0
    assert run(str(config), [str(b)], seed=42, threads=0, out=io.StringIO()) == 0
    files = sorted(p.name for p in a.glob("*.bpc"))
    assert files == ["0.bpc", "1.bpc"] == sorted(p.name for p in b.glob("*.bpc"))
    for name in files:
        data = (a / name).read_bytes()
        assert data == (b / name).read_bytes()
        container = read_container(a / name)
        assert encode_container(decode_container(data)) == data
        assert container.keys() == ["colors", "depth", "normals", "segmap", "segmap_mapping"]
        assert container["colors"].shape == (16, 16, 3) and container["colors"].dtype == np.float32
        assert container["segmap"].dtype == np.int32

    stereo_dir = tmp_path / "stereo"
    stereo = _cornell_config(tmp_path / "stereo_assets", 3, 8, 1, stereo=True)
    assert run(str(stereo), [str(stereo_dir)], threads=1, out=io.StringIO()) == 0
    written = sorted(stereo_dir.glob("*.bpc"))
    assert [p.name for p in written] == ["0.bpc", "1.bpc", "2.bpc"]
    for path in written:
        keys = read_container(path).keys()
        assert "colors_L" in keys and "colors_R" in keys


@pytest.mark.slow
def test_8_cornell_throughput(tmp_path):
    config = _cornell_config(tmp_path, 5, 64, 16)
    doc = substitute_args(parse_config(config.read_text()), [str(tmp_path / "out")])
    with Budget(60.0):
        state = run_pipeline(build_pipeline(doc), initial_state(doc, threads=1))
    assert len(state.written) == 5
    assert state.frame_count("colors") == 5
    assert state.bvh_cache.builds == 1
    image = read_container(state.written[2])["colors"]
    assert np.isfinite(image).all() and image.mean() > 0.01
