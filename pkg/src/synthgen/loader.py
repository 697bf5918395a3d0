"""File loaders: Wavefront OBJ/MTL meshes, camera pose files and light files.

Pose and light files are plain text, one record per line, described by a
space-separated format string such as ``"location_x location_y location_z"``.
A ``_`` token consumes a column without using it. Lines starting with ``#``
and blank lines are ignored.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from synthgen.errors import FaceIndexError, FormatError, LineError, ParseError
from synthgen.scene import Light, Material, Scene, TriangleMesh

log = logging.getLogger(__name__)

POSE_TOKENS = ("location_x", "location_y", "location_z", "rotation_x", "rotation_y", "rotation_z")
LIGHT_TOKENS = (
    "location_x", "location_y", "location_z", "intensity_r", "intensity_g", "intensity_b",
)


# -- OBJ / MTL --------------------------------------------------------------


def _floats(path: str, lineno: int, tokens: list[str], count: int) -> tuple[float, ...]:
    if len(tokens) < count:
        raise ParseError(path, lineno, " ".join(tokens), f"expected {count} numbers")
    try:
        return tuple(float(t) for t in tokens[:count])
    except ValueError:
        bad = next(t for t in tokens[:count] if not _is_float(t))
        raise ParseError(path, lineno, bad) from None


def _is_float(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def parse_mtl(path: str | Path) -> dict[str, Material]:
    """Parse an MTL file into materials keyed by name (Kd, Ks, Ns, Ke only)."""
    path = str(path)
    materials: dict[str, dict] = {}
    current: dict | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            tokens = line.split()
            if not tokens or tokens[0].startswith("#"):
                continue
            key, rest = tokens[0], tokens[1:]
            if key == "newmtl":
                if not rest:
                    raise ParseError(path, lineno, line.strip(), "newmtl without a name")
                current = materials.setdefault(" ".join(rest), {})
            elif key in ("Kd", "Ks", "Ke"):
                if current is None:
                    raise ParseError(path, lineno, key, "property before newmtl")
                current[key] = _floats(path, lineno, rest, 3)
            elif key == "Ns":
                if current is None:
                    raise ParseError(path, lineno, key, "property before newmtl")
                current[key] = _floats(path, lineno, rest, 1)[0]
    return {name: _material_from_mtl(name, props) for name, props in materials.items()}


def _material_from_mtl(name: str, props: dict) -> Material:
    kd = np.clip(np.array(props.get("Kd", (0.8, 0.8, 0.8)), float), 0, 1)
    ks = np.clip(np.array(props.get("Ks", (0.0, 0.0, 0.0)), float), 0, 1)
    if (kd + ks > 1).any():
        log.warning("material '%s': Kd + Ks > 1, clamping Ks to conserve energy", name)
        ks = np.minimum(ks, 1 - kd)
    ke = np.maximum(np.array(props.get("Ke", (0.0, 0.0, 0.0)), float), 0)
    return Material(
        diffuse_albedo=tuple(kd),
        specular_albedo=tuple(ks),
        shininess=max(float(props.get("Ns", 0.0)), 0.0),
        emission=tuple(ke),
        name=name,
    )


@dataclass
class _ObjGroup:
    name: str
    material: str | None = None
    faces: list[list[tuple[int, int | None]]] = field(default_factory=list)


def _resolve_index(raw: str, count: int, path: str, lineno: int) -> int:
    try:
        index = int(raw)
    except ValueError:
        raise ParseError(path, lineno, raw) from None
    if index > 0:
        resolved = index - 1
    elif index < 0:
        resolved = count + index
    else:
        raise FaceIndexError(path, lineno, index, count)
    if not 0 <= resolved < count:
        raise FaceIndexError(path, lineno, index, count)
    return resolved


def load_obj(scene: Scene, path: str | Path, *, category_id: int | None = None) -> list[TriangleMesh]:
    """Load one OBJ file, adding one mesh per ``o``/``g`` record to ``scene``.

    Polygons are fan-triangulated from their first vertex. Each mesh keeps
    only the vertices its faces use, in order of first use, so exporting and
    reloading a triangle mesh is lossless.
    """
    path = Path(path)
    spath = str(path)
    if not path.is_file():
        raise FileNotFoundError(f"OBJ file not found: {path}")

    positions: list[tuple[float, float, float]] = []
    normals: list[tuple[float, float, float]] = []
    n_texcoords = 0
    groups = [_ObjGroup(path.stem)]
    current_material: str | None = None
    libraries: list[Path] = []

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            tokens = line.split()
            if not tokens or tokens[0].startswith("#"):
                continue
            key, rest = tokens[0], tokens[1:]
            if key == "v":
                positions.append(_floats(spath, lineno, rest, 3))
            elif key == "vn":
                normals.append(_floats(spath, lineno, rest, 3))
            elif key == "vt":
                _floats(spath, lineno, rest, 1)
                n_texcoords += 1
            elif key in ("o", "g"):
                groups.append(_ObjGroup(" ".join(rest) or path.stem, current_material))
            elif key == "usemtl":
                current_material = " ".join(rest) or None
                # first usemtl wins per object, unless no face has used the inherited one
                if not groups[-1].faces or groups[-1].material is None:
                    groups[-1].material = current_material
            elif key == "mtllib":
                libraries.extend(path.parent / name for name in rest)
            elif key == "f":
                if len(rest) < 3:
                    raise ParseError(spath, lineno, line.strip(), "face needs 3+ vertices")
                face = []
                for corner in rest:
                    parts = corner.split("/")
                    v = _resolve_index(parts[0], len(positions), spath, lineno)
                    n = None
                    if len(parts) >= 3 and parts[2]:
                        n = _resolve_index(parts[2], len(normals), spath, lineno)
                    if len(parts) >= 2 and parts[1]:
                        _resolve_index(parts[1], n_texcoords, spath, lineno)
                    face.append((v, n))
                groups[-1].faces.append(face)
            else:
                log.debug("%s:%d: skipping '%s' record", spath, lineno, key)

    materials: dict[str, Material] = {}
    for lib in libraries:
        if lib.is_file():
            materials.update(parse_mtl(lib))
        else:
            log.warning("material library %s not found, using default material", lib)

    material_ids: dict[str | None, int] = {}
    loaded = []
    for group in groups:
        if not group.faces:
            continue
        key = group.material if group.material in materials else None
        if group.material is not None and key is None:
            log.warning("unknown material '%s' in %s, using default", group.material, path)
        if key not in material_ids:
            material = materials[key] if key is not None else Material()
            material_ids[key] = scene.add_material(material)
        mesh = _build_mesh(group, positions, normals)
        mesh.material_id = material_ids[key]
        if category_id is not None:
            mesh.category_id = int(category_id)
        loaded.append(scene.add_mesh(mesh))
    return loaded


def _build_mesh(group: _ObjGroup, positions, normals) -> TriangleMesh:
    has_normals = all(n is not None for face in group.faces for _, n in face)
    local: dict[tuple[int, int | None], int] = {}
    triangles = []
    for face in group.faces:
        ids = []
        for v, n in face:
            key = (v, n if has_normals else None)
            if key not in local:
                local[key] = len(local)
            ids.append(local[key])
        for i in range(1, len(ids) - 1):
            triangles.append((ids[0], ids[i], ids[i + 1]))

    keys = list(local)
    vertices = np.array([positions[v] for v, _ in keys], dtype=np.float64)
    vertex_normals = None
    if has_normals:
        vertex_normals = np.array([normals[n] for _, n in keys], dtype=np.float64)
        lengths = np.linalg.norm(vertex_normals, axis=1, keepdims=True)
        if (lengths == 0).any():
            log.warning("object '%s' has zero-length normals; using face normals", group.name)
            vertex_normals = None
        else:
            vertex_normals = vertex_normals / lengths
    return TriangleMesh(
        vertices=vertices,
        triangles=np.array(triangles, dtype=np.int64),
        normals=vertex_normals,
        object_name=group.name,
    )


# -- pose / light files -----------------------------------------------------


def parse_format(format_string: str, allowed: tuple[str, ...]) -> list[str]:
    tokens = format_string.split()
    if not tokens:
        raise FormatError("format string is empty")
    seen = set()
    for token in tokens:
        if token == "_":
            continue
        if token not in allowed:
            raise FormatError(f"unknown format token '{token}'; allowed: {', '.join(allowed)} or _")
        if token in seen:
            raise FormatError(f"format token '{token}' appears twice")
        seen.add(token)
    return tokens


def read_records(path: str | Path, format_string: str, allowed: tuple[str, ...]) -> list[dict[str, float]]:
    """Parse a whitespace-separated text file into one dict per non-comment line."""
    tokens = parse_format(format_string, allowed)
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            fields = stripped.split()
            if len(fields) != len(tokens):
                raise LineError(str(path), lineno, len(tokens), len(fields))
            record = {}
            for token, value in zip(tokens, fields):
                if token == "_":
                    continue
                try:
                    record[token] = float(value)
                except ValueError:
                    raise ParseError(str(path), lineno, value) from None
            records.append(record)
    return records


def load_camera_poses(scene: Scene, path: str | Path, format_string: str) -> list[int]:
    """Append one keyframe per pose line; missing components default to 0."""
    indices = []
    for record in read_records(path, format_string, POSE_TOKENS):
        location = [record.get(f"location_{a}", 0.0) for a in "xyz"]
        rotation = [record.get(f"rotation_{a}", 0.0) for a in "xyz"]
        indices.append(scene.add_camera_keyframe(location, rotation))
    return indices


def load_lights(scene: Scene, path: str | Path, format_string: str) -> list[Light]:
    """Append one point light per line; intensity defaults to (1, 1, 1)."""
    lights = []
    for record in read_records(path, format_string, LIGHT_TOKENS):
        light = Light(
            position=tuple(record.get(f"location_{a}", 0.0) for a in "xyz"),
            intensity=tuple(record.get(f"intensity_{c}", 1.0) for c in "rgb"),
        )
        scene.add_light(light)
        lights.append(light)
    return lights
