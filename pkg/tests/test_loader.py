import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synthgen.errors import FaceIndexError, FormatError, LineError, ParseError
from synthgen.loader import load_camera_poses, load_lights, load_obj, parse_mtl
from synthgen.scene import Material, Scene, TriangleMesh
from synthgen.scenes import write_obj

from oracles import polygon_area, triangle_area


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_single_triangle_default_material(scene, tri_obj):
    meshes = load_obj(scene, tri_obj)
    assert len(meshes) == 1
    mesh = meshes[0]
    assert mesh.vertices.shape == (3, 3) and mesh.triangles.shape == (1, 3)
    assert scene.materials[mesh.material_id].diffuse_albedo == (0.8, 0.8, 0.8)


def test_quad_fan_triangulation(scene, tmp_path):
    path = _write(tmp_path, "q.obj", "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    (mesh,) = load_obj(scene, path)
    assert mesh.triangles.tolist() == [[0, 1, 2], [0, 2, 3]]


@pytest.mark.parametrize("n", [3, 4, 5, 8, 17])
def test_fan_preserves_area_of_convex_ngon(scene, tmp_path, n):
    angles = np.sort(np.random.default_rng(n).uniform(0, 2 * np.pi, n))
    pts = np.column_stack([np.cos(angles) * 2, np.sin(angles), np.full(n, 0.3)])
    text = "".join(f"v {x:.17g} {y:.17g} {z:.17g}\n" for x, y, z in pts)
    text += "f " + " ".join(map(str, range(1, n + 1))) + "\n"
    (mesh,) = load_obj(scene, _write(tmp_path, "n.obj", text))
    assert len(mesh.triangles) == n - 2
    area = sum(triangle_area(*mesh.vertices[t]) for t in mesh.triangles)
    assert abs(area - polygon_area(pts)) < 1e-9


def test_category_id_applied_to_every_mesh(scene, tmp_path):
    text = "v 0 0 0\nv 1 0 0\nv 0 1 0\no a\nf 1 2 3\no b\nf 3 2 1\n"
    meshes = load_obj(scene, _write(tmp_path, "two.obj", text), category_id=5)
    assert [m.object_name for m in meshes] == ["a", "b"]
    assert all(m.category_id == 5 for m in meshes)


def test_negative_indices_and_slashes(scene, tmp_path):
    text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvn 0 0 1\nf -3/1/1 -2/1/1 -1/1/1\n"
    (mesh,) = load_obj(scene, _write(tmp_path, "neg.obj", text))
    assert mesh.triangles.tolist() == [[0, 1, 2]]
    assert np.allclose(mesh.normals, [[0, 0, 1]] * 3)


def test_face_index_out_of_range(scene, tmp_path):
    with pytest.raises(FaceIndexError):
        load_obj(scene, _write(tmp_path, "bad.obj", "v 0 0 0\nv 1 0 0\nf 1 2 3\n"))
    with pytest.raises(IndexError):
        load_obj(scene, _write(tmp_path, "bad2.obj", "v 0 0 0\nf 1 1 0\n"))


def test_parse_error_reports_line_and_token(scene, tmp_path):
    with pytest.raises(ParseError) as err:
        load_obj(scene, _write(tmp_path, "p.obj", "v 0 0 0\nv 1 zz 0\n"))
    assert err.value.line == 2 and err.value.token == "zz"


def test_missing_file(scene, tmp_path):
    with pytest.raises(FileNotFoundError):
        load_obj(scene, tmp_path / "nope.obj")


def test_mtl_properties(scene, tmp_path):
    _write(tmp_path, "m.mtl", "newmtl shiny\nKd 0.2 0.3 0.4\nKs 0.5 0.5 0.5\nNs 30\nKe 1 2 3\n")
    path = _write(tmp_path, "m.obj", "mtllib m.mtl\nusemtl shiny\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
    (mesh,) = load_obj(scene, path)
    mat = scene.materials[mesh.material_id]
    assert mat.diffuse_albedo == (0.2, 0.3, 0.4)
    assert mat.specular_albedo == (0.5, 0.5, 0.5)
    assert mat.shininess == 30
    assert mat.emission == (1, 2, 3)


def test_mtl_energy_clamp(tmp_path):
    mats = parse_mtl(_write(tmp_path, "c.mtl", "newmtl x\nKd 0.7 0.7 0.7\nKs 0.5 0.5 0.5\n"))
    assert np.allclose(mats["x"].specular_albedo, 0.3)


def test_missing_mtl_falls_back(scene, tmp_path):
    path = _write(tmp_path, "m.obj", "mtllib gone.mtl\nusemtl x\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
    (mesh,) = load_obj(scene, path)
    assert scene.materials[mesh.material_id] == Material()


def test_first_usemtl_wins_per_object(scene, tmp_path):
    _write(tmp_path, "m.mtl", "newmtl a\nKd 0.1 0.1 0.1\nnewmtl b\nKd 0.9 0.9 0.9\n")
    text = "mtllib m.mtl\nv 0 0 0\nv 1 0 0\nv 0 1 0\no obj\nusemtl a\nf 1 2 3\nusemtl b\nf 3 2 1\n"
    (mesh,) = load_obj(scene, _write(tmp_path, "u.obj", text))
    assert scene.materials[mesh.material_id].name == "a"


def test_loader_writes_no_files(scene, tmp_path):
    _write(tmp_path, "m.mtl", "newmtl a\nKd 0.1 0.1 0.1\n")
    obj = _write(tmp_path, "u.obj", "mtllib m.mtl\nusemtl a\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
    poses = _write(tmp_path, "p.txt", "1 2 3\n")
    before = sorted((p.name, p.stat().st_mtime_ns) for p in tmp_path.iterdir())
    load_obj(scene, obj)
    load_camera_poses(scene, poses, "location_x location_y location_z")
    load_lights(scene, poses, "location_x location_y location_z")
    assert sorted((p.name, p.stat().st_mtime_ns) for p in tmp_path.iterdir()) == before


finite = st.floats(-1e3, 1e3, allow_nan=False)


@st.composite
def meshes(draw):
    n_vert = draw(st.integers(3, 12))
    verts = draw(st.lists(st.tuples(finite, finite, finite), min_size=n_vert, max_size=n_vert))
    perm = draw(st.permutations(range(n_vert)))
    # every vertex is used, in first-use order, so compaction keeps them all in place
    tris = [tuple(range(i, i + 3)) for i in range(0, n_vert - 2, 3)]
    used = {i for t in tris for i in t}
    tris += [(0, 1, v) for v in range(n_vert) if v not in used and v > 1]
    extra = draw(st.lists(st.tuples(*[st.sampled_from(perm)] * 3), max_size=5))
    return TriangleMesh(np.array(verts), np.array(tris + extra), object_name="m")


@given(st.lists(meshes(), min_size=1, max_size=3))
@settings(max_examples=40, deadline=None)
def test_obj_round_trip_lossless(tmp_path_factory, mesh_list):
    tmp = tmp_path_factory.mktemp("rt")
    for i, m in enumerate(mesh_list):
        m.object_name = f"m{i}"
    first = Scene()
    loaded = load_obj(first, write_obj(tmp / "a.obj", mesh_list))
    again = load_obj(Scene(), write_obj(tmp / "b.obj", loaded))
    assert len(loaded) == len(again) == len(mesh_list)
    for src, a, b in zip(mesh_list, loaded, again):
        assert np.array_equal(a.vertices, src.vertices)
        assert np.array_equal(a.triangles, src.triangles)
        assert np.array_equal(b.vertices, a.vertices)
        assert np.array_equal(b.triangles, a.triangles)


# -- pose and light files -----------------------------------------------------


def test_pose_defaults_rotation(scene, tmp_path):
    load_camera_poses(scene, _write(tmp_path, "p.txt", "1 2 3\n"), "location_x location_y location_z")
    kf = scene.keyframes[0]
    assert kf.location == (1, 2, 3) and kf.rotation == (0, 0, 0)


def test_pose_full_format(scene, tmp_path):
    fmt = "location_x location_y location_z rotation_x rotation_y rotation_z"
    assert load_camera_poses(scene, _write(tmp_path, "p.txt", "0 0 0 0 0 0\n"), fmt) == [0]
    assert scene.keyframes[0].rotation == (0, 0, 0)


def test_pose_comments_and_blank_lines(scene, tmp_path):
    text = "# header\n1 0 0\n\n2 0 0\n   \n# c\n3 0 0\n4 0 0\n5 0 0\n"
    idx = load_camera_poses(scene, _write(tmp_path, "p.txt", text), "location_x _ _")
    assert idx == [0, 1, 2, 3, 4]


def test_unknown_token(scene, tmp_path):
    with pytest.raises(FormatError):
        load_camera_poses(scene, _write(tmp_path, "p.txt", "1\n"), "location_w")


def test_wrong_field_count_reports_line(scene, tmp_path):
    with pytest.raises(LineError) as err:
        load_camera_poses(scene, _write(tmp_path, "p.txt", "1 2 3\n1 2\n"), "location_x location_y location_z")
    assert err.value.line == 2


@given(st.lists(st.tuples(finite, finite, finite), max_size=20), st.lists(st.booleans(), max_size=20))
@settings(max_examples=30, deadline=None)
def test_keyframe_count_equals_line_count(tmp_path_factory, poses, noise):
    lines = []
    for i, p in enumerate(poses):
        if i < len(noise) and noise[i]:
            lines += ["", "# comment"]
        lines.append(" ".join(repr(v) for v in p))
    path = tmp_path_factory.mktemp("poses") / "p.txt"
    path.write_text("\n".join(lines) + "\n")
    s = Scene()
    load_camera_poses(s, path, "location_x location_y location_z")
    assert len(s.keyframes) == len(poses)
    assert [k.location for k in s.keyframes] == [tuple(p) for p in poses]


def test_light_full_format(scene, tmp_path):
    fmt = "location_x location_y location_z intensity_r intensity_g intensity_b"
    load_lights(scene, _write(tmp_path, "l.txt", "0 0 2 10 10 10\n"), fmt)
    assert scene.lights[0].position == (0, 0, 2)
    assert scene.lights[0].intensity == (10, 10, 10)


def test_light_empty_file(scene, tmp_path):
    assert load_lights(scene, _write(tmp_path, "l.txt", ""), "location_x") == []
    assert scene.lights == []


def test_light_skip_token(scene, tmp_path):
    load_lights(scene, _write(tmp_path, "l.txt", "1 9 3\n"), "location_x _ location_z")
    assert scene.lights[0].position == (1, 0, 3)
    assert scene.lights[0].intensity == (1, 1, 1)
