"""World state: triangle meshes, materials, point lights and camera keyframes.

Coordinates are right-handed, in meters. A camera looks along -Z of its local
frame with +Y up; its world pose is the Euler XYZ rotation (radians, applied
X then Y then Z) followed by the translation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.transform import Rotation

from synthgen.errors import EmptyMesh

DEFAULT_FOV = math.pi / 4
DEFAULT_INTEROCULAR = 0.065


@dataclass(frozen=True)
class Material:
    diffuse_albedo: tuple[float, float, float] = (0.8, 0.8, 0.8)
    specular_albedo: tuple[float, float, float] = (0.0, 0.0, 0.0)
    shininess: float = 0.0
    emission: tuple[float, float, float] = (0.0, 0.0, 0.0)
    name: str = "default"

    def __post_init__(self):
        kd = np.asarray(self.diffuse_albedo, dtype=float)
        ks = np.asarray(self.specular_albedo, dtype=float)
        ke = np.asarray(self.emission, dtype=float)
        if kd.shape != (3,) or ks.shape != (3,) or ke.shape != (3,):
            raise ValueError("material colors must be RGB triples")
        if (kd < 0).any() or (ks < 0).any() or (kd > 1).any() or (ks > 1).any():
            raise ValueError(f"material '{self.name}': albedo outside [0, 1]")
        if (kd + ks > 1 + 1e-9).any():
            raise ValueError(f"material '{self.name}': diffuse + specular albedo exceeds 1")
        if (ke < 0).any() or not np.isfinite(ke).all():
            raise ValueError(f"material '{self.name}': emission must be finite and >= 0")
        if self.shininess < 0:
            raise ValueError(f"material '{self.name}': shininess must be >= 0")


@dataclass
class TriangleMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    normals: np.ndarray | None = None
    material_id: int = 0
    object_name: str = "object"
    category_id: int = 0
    instance_id: int = 0

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(self.triangles) and (
            self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)
        ):
            raise IndexError(f"mesh '{self.object_name}': triangle index out of range")
        if self.normals is not None:
            self.normals = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)
            if len(self.normals) != len(self.vertices):
                raise ValueError("per-vertex normals must match vertex count")
            if len(self.normals) and np.abs(np.linalg.norm(self.normals, axis=1) - 1).max() > 1e-6:
                raise ValueError("vertex normals must be unit length")
        if self.category_id < 0:
            raise ValueError("category_id must be non-negative")


@dataclass(frozen=True)
class Light:
    position: tuple[float, float, float]
    intensity: tuple[float, float, float] = (1.0, 1.0, 1.0)
    type: str = "point"

    def __post_init__(self):
        if not np.isfinite(self.intensity).all() or min(self.intensity) < 0:
            raise ValueError("light intensity must be finite and >= 0")


@dataclass(frozen=True)
class CameraKeyframe:
    location: tuple[float, float, float]
    rotation: tuple[float, float, float] = (0.0, 0.0, 0.0)
    frame_index: int = 0

    def rotation_matrix(self) -> np.ndarray:
        """Camera-to-world rotation."""
        return euler_to_matrix(self.rotation)

    def forward(self) -> np.ndarray:
        return self.rotation_matrix() @ np.array([0.0, 0.0, -1.0])


@dataclass(frozen=True)
class CameraIntrinsics:
    resolution_x: int = 512
    resolution_y: int = 512
    vertical_fov: float = DEFAULT_FOV
    stereo: bool = False
    interocular_distance: float = DEFAULT_INTEROCULAR

    def __post_init__(self):
        if self.resolution_x < 1 or self.resolution_y < 1:
            raise ValueError("resolution must be at least 1x1")
        if not 0 < self.vertical_fov < math.pi:
            raise ValueError("vertical_fov must lie in (0, pi)")
        if self.interocular_distance < 0:
            raise ValueError("interocular_distance must be >= 0")

    def with_(self, **changes) -> CameraIntrinsics:
        return replace(self, **changes)


def euler_to_matrix(rotation) -> np.ndarray:
    return Rotation.from_euler("xyz", np.asarray(rotation, dtype=float)).as_matrix()


def look_at_rotation(location, target, up=(0.0, 0.0, 1.0)) -> tuple[float, float, float]:
    """Euler XYZ angles that point the camera's -Z axis from ``location`` at ``target``."""
    forward = np.asarray(target, float) - np.asarray(location, float)
    norm = np.linalg.norm(forward)
    if norm == 0:
        return (0.0, 0.0, 0.0)
    forward /= norm
    up = np.asarray(up, float)
    right = np.cross(forward, up)
    if np.linalg.norm(right) < 1e-9:
        right = np.cross(forward, np.array([0.0, 1.0, 0.0]))
    right /= np.linalg.norm(right)
    cam_up = np.cross(right, forward)
    matrix = np.column_stack([right, cam_up, -forward])
    return tuple(float(a) for a in Rotation.from_matrix(matrix).as_euler("xyz"))


def compute_aabb(mesh: TriangleMesh) -> tuple[np.ndarray, np.ndarray]:
    if len(mesh.vertices) == 0:
        raise EmptyMesh(f"mesh '{mesh.object_name}' has no vertices")
    return mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)


@dataclass
class Scene:
    meshes: list[TriangleMesh] = field(default_factory=list)
    materials: list[Material] = field(default_factory=list)
    lights: list[Light] = field(default_factory=list)
    keyframes: list[CameraKeyframe] = field(default_factory=list)
    intrinsics: CameraIntrinsics = field(default_factory=CameraIntrinsics)
    # bumped on every geometry change; caches key on it
    version: int = 0

    def add_material(self, material: Material) -> int:
        self.materials.append(material)
        return len(self.materials) - 1

    def add_mesh(self, mesh: TriangleMesh) -> TriangleMesh:
        if not 0 <= mesh.material_id < len(self.materials):
            raise IndexError(f"mesh '{mesh.object_name}': unknown material {mesh.material_id}")
        mesh.instance_id = max((m.instance_id for m in self.meshes), default=0) + 1
        self.meshes.append(mesh)
        self.touch()
        return mesh

    def translate_mesh(self, mesh: TriangleMesh, offset) -> None:
        mesh.vertices = mesh.vertices + np.asarray(offset, dtype=float)
        self.touch()

    def add_light(self, light: Light) -> None:
        self.lights.append(light)

    def add_camera_keyframe(self, location, rotation=(0.0, 0.0, 0.0)) -> int:
        index = len(self.keyframes)
        self.keyframes.append(
            CameraKeyframe(
                tuple(float(v) for v in location),
                tuple(float(v) for v in rotation),
                index,
            )
        )
        return index

    def touch(self) -> None:
        self.version += 1

    def clear(self) -> None:
        self.meshes.clear()
        self.materials.clear()
        self.lights.clear()
        self.keyframes.clear()
        self.intrinsics = CameraIntrinsics()
        self.touch()

    @property
    def triangle_count(self) -> int:
        return sum(len(m.triangles) for m in self.meshes)

    def object_aabbs(self, exclude: TriangleMesh | None = None) -> list[tuple[np.ndarray, np.ndarray]]:
        return [compute_aabb(m) for m in self.meshes if m is not exclude and len(m.vertices)]


def add_camera_keyframe(scene: Scene, location, rotation=(0.0, 0.0, 0.0)) -> int:
    return scene.add_camera_keyframe(location, rotation)
