"""Position samplers, collision-free placement and camera proximity checks.

Sampler trees look like::

    {"name": "Uniform3dSampler", "parameters": {"min": [0, 0, 0], "max": [1, 1, 1]}}
    {"name": "SphereSampler", "parameters": {"center": [0, 0, 1], "radius": 4, "mode": "SURFACE"}}

A plain 3-vector in place of a tree is a constant sampler.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from synthgen.errors import Exhausted, InvalidSpec, UnknownSampler
from synthgen.render.bvh import Bvh
from synthgen.render.camera import camera_rays
from synthgen.scene import CameraIntrinsics, CameraKeyframe

SAMPLERS = ("Uniform3dSampler", "SphereSampler")
SPHERE_MODES = ("SURFACE", "INTERIOR")
DEFAULT_GRID = 10
DEFAULT_MAX_ATTEMPTS = 1000


@dataclass(frozen=True)
class SamplerSpec:
    name: str
    parameters: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class ProximitySpec:
    min: float | None = None
    avg_min: float | None = None
    avg_max: float | None = None

    @property
    def has_avg(self) -> bool:
        return self.avg_min is not None

    @classmethod
    def from_mapping(cls, tree: Mapping | None) -> ProximitySpec:
        """Parse ``{"min": d, "avg": {"min": a, "max": b}}``; either key may be absent."""
        if not tree:
            return cls()
        unknown = set(tree) - {"min", "avg"}
        if unknown:
            raise InvalidSpec(f"unknown proximity check(s): {sorted(unknown)}")
        minimum = tree.get("min")
        if minimum is not None and float(minimum) <= 0:
            raise InvalidSpec("proximity min must be > 0")
        avg = tree.get("avg")
        avg_min = avg_max = None
        if avg is not None:
            if isinstance(avg, Mapping):
                avg_min, avg_max = avg.get("min", 0.0), avg.get("max", np.inf)
            elif isinstance(avg, Sequence) and len(avg) == 2:
                avg_min, avg_max = avg
            else:
                raise InvalidSpec("proximity avg must be {min, max} or [min, max]")
            avg_min, avg_max = float(avg_min), float(avg_max)
            if avg_min > avg_max:
                raise InvalidSpec("proximity avg.min must be <= avg.max")
        return cls(None if minimum is None else float(minimum), avg_min, avg_max)


def _vec3(value: Any, what: str) -> np.ndarray:
    try:
        vec = np.asarray(value, dtype=np.float64)
    except (TypeError, ValueError):
        raise InvalidSpec(f"{what} must be a 3-vector") from None
    if vec.shape != (3,) or not np.isfinite(vec).all():
        raise InvalidSpec(f"{what} must be a finite 3-vector")
    return vec


def resolve_sampler(value: Any) -> SamplerSpec:
    """Validate a sampler tree, or wrap a literal 3-vector as a constant sampler."""
    if not isinstance(value, Mapping):
        return SamplerSpec("Constant", {"value": _vec3(value, "location").tolist()})
    name = value.get("name")
    if name not in SAMPLERS:
        raise UnknownSampler(f"unknown sampler '{name}'; known: {', '.join(SAMPLERS)}")
    params = dict(value.get("parameters") or {})
    if name == "Uniform3dSampler":
        lo = _vec3(params.get("min"), "Uniform3dSampler.min")
        hi = _vec3(params.get("max"), "Uniform3dSampler.max")
        if (lo > hi).any():
            raise InvalidSpec(f"Uniform3dSampler min {lo.tolist()} exceeds max {hi.tolist()}")
        return SamplerSpec(name, {"min": lo.tolist(), "max": hi.tolist()})
    center = _vec3(params.get("center"), "SphereSampler.center")
    try:
        radius = float(params.get("radius"))
    except (TypeError, ValueError):
        raise InvalidSpec("SphereSampler.radius must be a number") from None
    if radius < 0:
        raise InvalidSpec("SphereSampler.radius must be >= 0")
    mode = params.get("mode", "SURFACE")
    if mode not in SPHERE_MODES:
        raise InvalidSpec(f"unknown SphereSampler mode '{mode}'")
    return SamplerSpec(name, {"center": center.tolist(), "radius": radius, "mode": mode})


def sample_uniform_box(spec: SamplerSpec, rng: np.random.Generator) -> np.ndarray:
    lo = np.asarray(spec.parameters["min"], dtype=np.float64)
    hi = np.asarray(spec.parameters["max"], dtype=np.float64)
    if (lo > hi).any():
        raise InvalidSpec("Uniform3dSampler min exceeds max")
    return lo + (hi - lo) * rng.random(3)


def sample_sphere(spec: SamplerSpec, rng: np.random.Generator) -> np.ndarray:
    center = np.asarray(spec.parameters["center"], dtype=np.float64)
    radius = float(spec.parameters["radius"])
    mode = spec.parameters.get("mode", "SURFACE")
    if mode not in SPHERE_MODES:
        raise InvalidSpec(f"unknown SphereSampler mode '{mode}'")
    direction = rng.standard_normal(3)
    norm = np.linalg.norm(direction)
    while norm < 1e-12:
        direction = rng.standard_normal(3)
        norm = np.linalg.norm(direction)
    direction /= norm
    if mode == "INTERIOR":
        radius *= rng.random() ** (1.0 / 3.0)
    return center + radius * direction


def sample(spec: SamplerSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.name == "Constant":
        return np.asarray(spec.parameters["value"], dtype=np.float64)
    if spec.name == "Uniform3dSampler":
        return sample_uniform_box(spec, rng)
    if spec.name == "SphereSampler":
        return sample_sphere(spec, rng)
    raise UnknownSampler(f"unknown sampler '{spec.name}'")


def boxes_overlap(a_min, a_max, b_min, b_max) -> bool:
    """Strict overlap: boxes that only touch do not collide."""
    return bool(np.all(a_min < b_max) and np.all(b_min < a_max))


def sample_collision_free(
    spec: SamplerSpec,
    target_aabb: tuple[np.ndarray, np.ndarray],
    obstacles: list[tuple[np.ndarray, np.ndarray]],
    rng: np.random.Generator,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
) -> tuple[np.ndarray, int]:
    """Rejection-sample a center for ``target_aabb`` clear of every obstacle box.

    Returns the new center and the number of attempts used.
    """
    if spec.name != "Uniform3dSampler":
        raise InvalidSpec("collision-free placement needs a Uniform3dSampler")
    if max_attempts < 1:
        raise InvalidSpec("max_attempts must be >= 1")
    lo, hi = (np.asarray(v, dtype=np.float64) for v in target_aabb)
    half = (hi - lo) / 2
    if obstacles:
        obs_min = np.array([b[0] for b in obstacles])
        obs_max = np.array([b[1] for b in obstacles])
    for attempt in range(1, max_attempts + 1):
        center = sample_uniform_box(spec, rng)
        if not obstacles:
            return center, attempt
        c_min, c_max = center - half, center + half
        hit = np.all(c_min < obs_max, axis=1) & np.all(obs_min < c_max, axis=1)
        if not hit.any():
            return center, attempt
    raise Exhausted(max_attempts, "collision-free placement")


def proximity_distances(
    pose: CameraKeyframe,
    intrinsics: CameraIntrinsics,
    bvh: Bvh | None,
    grid: int = DEFAULT_GRID,
) -> np.ndarray:
    """Z-depths seen through the centers of a ``grid`` x ``grid`` image grid; ``inf`` = miss."""
    cells = (np.arange(grid) + 0.5) / grid
    gy, gx = np.meshgrid(cells, cells, indexing="ij")
    px = gx.ravel() * intrinsics.resolution_x
    py = gy.ravel() * intrinsics.resolution_y
    origins, directions = camera_rays(intrinsics, pose, px, py)
    if bvh is None:
        return np.full(len(px), np.inf)
    hits = bvh.intersect(origins, directions)
    depth = np.full(len(px), np.inf)
    hit = hits.hit
    depth[hit] = hits.t[hit] * (directions[hit] @ pose.forward())
    return depth


def check_proximity(
    pose: CameraKeyframe,
    intrinsics: CameraIntrinsics,
    spec: ProximitySpec,
    bvh: Bvh | None,
    grid: int = DEFAULT_GRID,
) -> bool:
    if spec.min is None and not spec.has_avg:
        return True
    depth = proximity_distances(pose, intrinsics, bvh, grid)
    seen = depth[np.isfinite(depth)]
    if spec.min is not None and (seen < spec.min).any():
        return False
    if spec.has_avg:
        if seen.size == 0:
            return False
        mean = seen.mean()
        if not spec.avg_min <= mean <= spec.avg_max:
            return False
    return True
