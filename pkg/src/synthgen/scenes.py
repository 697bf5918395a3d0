"""Small procedural scenes used by tests, scripts and examples."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from synthgen.scene import Light, Material, Scene, TriangleMesh

_CUBE_FACES = [(0, 1, 3, 2), (4, 6, 7, 5), (0, 4, 5, 1), (2, 3, 7, 6), (0, 2, 6, 4), (1, 5, 7, 3)]


def box_mesh(lo, hi, name="box", material_id=0, category_id=0) -> TriangleMesh:
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    corners = np.array([[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
    tris = []
    for a, b, c, d in _CUBE_FACES:
        tris += [(a, b, c), (a, c, d)]
    return TriangleMesh(corners, tris, material_id=material_id, object_name=name, category_id=category_id)


def quad_mesh(corners, name="quad", material_id=0, category_id=0) -> TriangleMesh:
    """Two triangles over four corners given in order around the quad."""
    return TriangleMesh(np.asarray(corners, float), [(0, 1, 2), (0, 2, 3)],
                        material_id=material_id, object_name=name, category_id=category_id)


def wall(depth: float, half_size: float = 100.0, x_range=None, name="wall", material_id=0, category_id=1):
    """Plane z = -depth facing +Z, i.e. fronto-parallel to the default camera."""
    x0, x1 = x_range if x_range is not None else (-half_size, half_size)
    z = -depth
    return quad_mesh([(x0, -half_size, z), (x1, -half_size, z), (x1, half_size, z), (x0, half_size, z)],
                     name=name, material_id=material_id, category_id=category_id)


def furnace_scene(albedo=0.5, emission=0.2, half_size=1.0) -> Scene:
    """Closed box, every wall diffuse with the same albedo and emission; camera at the center."""
    scene = Scene()
    mat = scene.add_material(Material(diffuse_albedo=(albedo,) * 3, emission=(emission,) * 3, name="furnace"))
    scene.add_mesh(box_mesh((-half_size,) * 3, (half_size,) * 3, "furnace", mat))
    scene.add_camera_keyframe((0.0, 0.0, 0.0), (0.3, 0.2, 0.1))
    return scene


def furnace_radiance(albedo: float, emission: float, max_bounces: int) -> float:
    """Analytic interior radiance: emission summed over max_bounces + 1 path vertices."""
    return sum(emission * albedo**k for k in range(max_bounces + 1))


def cornell_scene(light_intensity: float = 4.0) -> Scene:
    """Cornell-style room (2 m cube, open front) with two boxes and a ceiling light.

    The room spans x, z in [-1, 1] and y in [0, 2]; the open side faces +z.
    """
    scene = Scene()
    white = scene.add_material(Material((0.73, 0.73, 0.73), name="white"))
    red = scene.add_material(Material((0.65, 0.05, 0.05), name="red"))
    green = scene.add_material(Material((0.12, 0.45, 0.15), name="green"))
    glossy = scene.add_material(Material((0.4, 0.4, 0.4), (0.3, 0.3, 0.3), 40.0, name="glossy"))
    lamp = scene.add_material(Material((0.0, 0.0, 0.0), emission=(8.0, 8.0, 8.0), name="lamp"))

    scene.add_mesh(quad_mesh([(-1, 0, 1), (1, 0, 1), (1, 0, -1), (-1, 0, -1)], "floor", white, 1))
    scene.add_mesh(quad_mesh([(-1, 2, 1), (-1, 2, -1), (1, 2, -1), (1, 2, 1)], "ceiling", white, 1))
    scene.add_mesh(quad_mesh([(-1, 0, -1), (1, 0, -1), (1, 2, -1), (-1, 2, -1)], "back", white, 1))
    scene.add_mesh(quad_mesh([(-1, 0, 1), (-1, 0, -1), (-1, 2, -1), (-1, 2, 1)], "left", red, 2))
    scene.add_mesh(quad_mesh([(1, 0, -1), (1, 0, 1), (1, 2, 1), (1, 2, -1)], "right", green, 2))
    scene.add_mesh(quad_mesh([(-0.25, 1.99, -0.25), (0.25, 1.99, -0.25), (0.25, 1.99, 0.25), (-0.25, 1.99, 0.25)],
                             "lamp", lamp, 3))
    scene.add_mesh(box_mesh((-0.7, 0.0, -0.6), (-0.1, 1.2, 0.0), "tall_box", white, 4))
    scene.add_mesh(box_mesh((0.15, 0.0, -0.1), (0.7, 0.6, 0.45), "short_box", glossy, 5))

    scene.add_light(Light((0.0, 1.8, 0.0), (light_intensity,) * 3))
    return scene


def cornell_poses(count: int) -> list[tuple[tuple[float, float, float], tuple[float, float, float]]]:
    """Camera poses in front of the open side, swinging slightly left to right."""
    poses = []
    for i in range(count):
        yaw = (i - (count - 1) / 2) * 0.08
        poses.append(((3.4 * np.sin(yaw), 1.0, 3.4 * np.cos(yaw)), (0.0, float(yaw), 0.0)))
    return poses


def write_obj(path: str | Path, meshes: list[TriangleMesh], materials: list[Material] | None = None) -> Path:
    """Export meshes as OBJ (plus an MTL next to it when materials are given)."""
    path = Path(path)
    lines = []
    if materials is not None:
        mtl = path.with_suffix(".mtl")
        mtl_lines = []
        for i, m in enumerate(materials):
            mtl_lines += [
                f"newmtl mat{i}",
                "Kd {:.17g} {:.17g} {:.17g}".format(*m.diffuse_albedo),
                "Ks {:.17g} {:.17g} {:.17g}".format(*m.specular_albedo),
                f"Ns {m.shininess:.17g}",
                "Ke {:.17g} {:.17g} {:.17g}".format(*m.emission),
            ]
        mtl.write_text("\n".join(mtl_lines) + "\n", encoding="utf-8")
        lines.append(f"mtllib {mtl.name}")
    offset = 0
    n_offset = 0
    for mesh in meshes:
        lines.append(f"o {mesh.object_name}")
        if materials is not None:
            lines.append(f"usemtl mat{mesh.material_id}")
        lines += ["v {:.17g} {:.17g} {:.17g}".format(*v) for v in mesh.vertices]
        if mesh.normals is not None:
            lines += ["vn {:.17g} {:.17g} {:.17g}".format(*n) for n in mesh.normals]
            lines += [
                "f " + " ".join(f"{offset + i + 1}//{n_offset + i + 1}" for i in tri)
                for tri in mesh.triangles
            ]
            n_offset += len(mesh.normals)
        else:
            lines += ["f " + " ".join(str(offset + i + 1) for i in tri) for tri in mesh.triangles]
        offset += len(mesh.vertices)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def three_object_scene() -> Scene:
    """Fronto-parallel back wall at z-depth 4 plus two boxes in front of it.

    The wall only covers the left two thirds of a 64x64 view from the origin,
    so the right edge of the image sees nothing.
    """
    scene = Scene()
    grey = scene.add_material(Material((0.6, 0.6, 0.6), name="grey"))
    blue = scene.add_material(Material((0.1, 0.2, 0.7), (0.2, 0.2, 0.2), 25.0, name="blue"))
    scene.add_mesh(wall(4.0, half_size=10.0, x_range=(-10.0, 0.8), name="back_wall", material_id=grey, category_id=1))
    scene.add_mesh(box_mesh((-1.2, -0.8, -3.0), (-0.4, 0.0, -2.2), "crate", blue, 2))
    scene.add_mesh(box_mesh((0.1, 0.2, -2.8), (0.6, 0.9, -2.3), "cube", grey, 2))
    scene.add_light(Light((0.0, 2.0, 0.0), (6.0, 6.0, 6.0)))
    scene.add_camera_keyframe((0.0, 0.0, 0.0))
    return scene


POSE_FORMAT = "location_x location_y location_z rotation_x rotation_y rotation_z"


def write_cornell_assets(out_dir: str | Path, n_poses: int) -> tuple[Path, Path, dict]:
    """Write the Cornell room as OBJ/MTL plus a pose file.

    Returns the OBJ path, the pose path (format :data:`POSE_FORMAT`) and a
    ``LightLoader`` list item for the ceiling point light.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scene = cornell_scene()
    obj = write_obj(out_dir / "cornell.obj", scene.meshes, scene.materials)
    poses = out_dir / "poses.txt"
    poses.write_text(
        "".join(" ".join(f"{v:.17g}" for v in (*loc, *rot)) + "\n" for loc, rot in cornell_poses(n_poses)),
        encoding="utf-8",
    )
    light = scene.lights[0]
    return obj, poses, {"location": list(light.position), "intensity": list(light.intensity)}


def cornell_config(obj: Path, poses: Path, light: dict, *, resolution: int = 64, samples: int = 16,
                   stereo: bool = False, seed: int = 42) -> dict:
    """Full pipeline config for the Cornell assets; ``<args:0>`` is the output directory."""
    return {
        "global": {"all": {"output_dir": "<args:0>", "seed": seed}},
        "modules": [
            {"name": "main.Initializer", "config": {
                "resolution_x": resolution, "resolution_y": resolution, "samples": samples, "stereo": stereo,
            }},
            {"name": "loader.ObjLoader", "config": {"path": str(obj), "category_id": 1}},
            {"name": "loader.CameraLoader", "config": {"path": str(poses), "file_format": POSE_FORMAT}},
            {"name": "loader.LightLoader", "config": {"lights": [light]}},
            {"name": "renderer.RgbRenderer", "config": {"render_depth": True}},
            {"name": "renderer.NormalRenderer"},
            {"name": "renderer.SegMapRenderer", "config": {"map_by": "instance"}},
            {"name": "writer.ContainerWriter"},
        ],
    }
