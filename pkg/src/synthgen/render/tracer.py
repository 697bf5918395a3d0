"""Wavefront Monte Carlo path tracer.

Surfaces are two-sided and shade with a Lambertian lobe plus a normalized
Phong lobe::

    f(wo, wi) = kd / pi + ks * (n + 2) / (2 pi) * max(0, r . wi)^n

where ``r`` mirrors ``wo`` about the shading normal. Point lights are
sampled explicitly at every path vertex; emissive surfaces are picked up
when a path hits them. A scatter event picks one lobe with probability
proportional to its mean albedo and importance-samples it.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass, fields

import numpy as np

from synthgen.render.bvh import Bvh, Ray, _dot

log = logging.getLogger(__name__)

# relative offset applied to spawned rays to step off the surface
RAY_EPSILON = 1e-7


@dataclass(frozen=True)
class RenderSettings:
    resolution_x: int = 512
    resolution_y: int = 512
    samples: int = 32
    min_bounces: int = 3
    max_bounces: int = 8
    glossy_bounces: int = 4
    render_depth: bool = False
    stereo: bool = False
    depth_output_key: str = "depth"
    map_by: str = "class"
    seed: int = 42

    def __post_init__(self):
        if self.resolution_x < 1 or self.resolution_y < 1:
            raise ValueError("resolution must be at least 1x1")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.min_bounces < 0 or self.glossy_bounces < 0:
            raise ValueError("bounce counts must be >= 0")
        if self.max_bounces < self.min_bounces:
            raise ValueError("max_bounces must be >= min_bounces")
        if self.map_by not in ("class", "instance"):
            raise ValueError(f"map_by must be 'class' or 'instance', got '{self.map_by}'")
        if not self.depth_output_key:
            raise ValueError("depth_output_key must be non-empty")

    @classmethod
    def from_mapping(cls, values: Mapping, base: RenderSettings | None = None) -> RenderSettings:
        """Override ``base`` with the recognized keys of ``values``."""
        base = base or cls()
        changes = {}
        for f in fields(cls):
            if f.name in values:
                raw = values[f.name]
                kind = type(getattr(base, f.name))
                if kind is bool and not isinstance(raw, bool):
                    raise ValueError(f"render setting '{f.name}' must be a boolean")
                if kind is int and (isinstance(raw, bool) or int(raw) != raw):
                    raise ValueError(f"render setting '{f.name}' must be an integer")
                changes[f.name] = kind(raw)
        return cls(**{**{f.name: getattr(base, f.name) for f in fields(cls)}, **changes})


@dataclass(frozen=True)
class MaterialArrays:
    kd: np.ndarray
    ks: np.ndarray
    shininess: np.ndarray
    emission: np.ndarray
    tri_material: np.ndarray

    @classmethod
    def from_scene(cls, scene, bvh: Bvh) -> MaterialArrays:
        mats = scene.materials
        mesh_material = np.array([m.material_id for m in scene.meshes], dtype=np.int64)
        return cls(
            kd=np.array([m.diffuse_albedo for m in mats], dtype=np.float64).reshape(-1, 3),
            ks=np.array([m.specular_albedo for m in mats], dtype=np.float64).reshape(-1, 3),
            shininess=np.array([m.shininess for m in mats], dtype=np.float64),
            emission=np.array([m.emission for m in mats], dtype=np.float64).reshape(-1, 3),
            tri_material=mesh_material[bvh.mesh_index],
        )


def orthonormal_basis(n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Tangent frame around unit vectors (Duff et al. 2017, branchless)."""
    sign = np.where(n[:, 2] >= 0, 1.0, -1.0)
    a = -1.0 / (sign + n[:, 2])
    b = n[:, 0] * n[:, 1] * a
    t = np.stack([1 + sign * n[:, 0] ** 2 * a, sign * b, -sign * n[:, 0]], axis=1)
    s = np.stack([b, sign + n[:, 1] ** 2 * a, -n[:, 1]], axis=1)
    return t, s


def sample_cosine_hemisphere(n: np.ndarray, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    r = np.sqrt(u1)
    phi = 2 * math.pi * u2
    z = np.sqrt(np.maximum(0.0, 1 - u1))
    t, s = orthonormal_basis(n)
    return (r * np.cos(phi))[:, None] * t + (r * np.sin(phi))[:, None] * s + z[:, None] * n


def sample_phong_lobe(axis: np.ndarray, exponent: np.ndarray, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """Directions with density ``(n + 1) / (2 pi) * cos^n`` around ``axis``."""
    cos_a = u1 ** (1.0 / (exponent + 1.0))
    sin_a = np.sqrt(np.maximum(0.0, 1 - cos_a**2))
    phi = 2 * math.pi * u2
    t, s = orthonormal_basis(axis)
    return (sin_a * np.cos(phi))[:, None] * t + (sin_a * np.sin(phi))[:, None] * s + cos_a[:, None] * axis


def reflect(wo: np.ndarray, n: np.ndarray) -> np.ndarray:
    return 2 * _dot(n, wo)[:, None] * n - wo


def eval_brdf(kd, ks, shininess, n, wo, wi) -> np.ndarray:
    r = reflect(wo, n)
    lobe = np.maximum(0.0, _dot(r, wi)) ** shininess
    return kd / math.pi + ks * ((shininess + 2) / (2 * math.pi) * lobe)[:, None]


def _offset(points: np.ndarray, normals: np.ndarray) -> np.ndarray:
    scale = RAY_EPSILON * (1.0 + np.abs(points).max(axis=1, keepdims=True))
    return points + normals * scale


def trace_paths(
    bvh: Bvh | None,
    scene,
    origins: np.ndarray,
    directions: np.ndarray,
    settings: RenderSettings,
    rng: np.random.Generator,
    materials: MaterialArrays | None = None,
) -> np.ndarray:
    """Radiance estimates (n, 3) for a batch of camera rays, one path each."""
    n = len(origins)
    radiance = np.zeros((n, 3))
    if bvh is None or n == 0:
        return radiance
    mats = materials or MaterialArrays.from_scene(scene, bvh)
    light_pos = np.array([light.position for light in scene.lights], dtype=np.float64).reshape(-1, 3)
    light_int = np.array([light.intensity for light in scene.lights], dtype=np.float64).reshape(-1, 3)

    path = np.arange(n)
    o = np.asarray(origins, dtype=np.float64)
    d = np.asarray(directions, dtype=np.float64)
    beta = np.ones((n, 3))
    glossy_count = np.zeros(n, dtype=np.int64)

    for bounce in range(settings.max_bounces + 1):
        hits = bvh.intersect(o, d)
        alive = hits.hit
        path, o, d, beta, glossy_count = path[alive], o[alive], d[alive], beta[alive], glossy_count[alive]
        if path.size == 0:
            break
        hits = type(hits)(hits.t[alive], hits.tri[alive], hits.bary[alive])
        point, ng, ns = bvh.surface(hits, o, d)
        mat = mats.tri_material[hits.tri]
        kd, ks, shin = mats.kd[mat], mats.ks[mat], mats.shininess[mat]
        wo = -d

        radiance[path] += beta * mats.emission[mat]

        if len(light_pos):
            origin = _offset(point, ng)
            for pos, intensity in zip(light_pos, light_int):
                to_light = pos - origin
                dist2 = _dot(to_light, to_light)
                dist = np.sqrt(dist2)
                with np.errstate(invalid="ignore", divide="ignore"):
                    wl = to_light / dist[:, None]
                cos_l = _dot(ns, wl)
                lit = (cos_l > 0) & (_dot(ng, wl) > 0) & (dist > 0)
                if not lit.any():
                    continue
                idx = np.flatnonzero(lit)
                blocked = bvh.occluded(origin[idx], wl[idx], dist[idx] * (1 - 1e-7))
                idx = idx[~blocked]
                f = eval_brdf(kd[idx], ks[idx], shin[idx], ns[idx], wo[idx], wl[idx])
                radiance[path[idx]] += beta[idx] * f * intensity * (cos_l[idx] / dist2[idx])[:, None]

        if bounce == settings.max_bounces:
            break

        u = rng.random((len(path), 4))

        keep = np.ones(len(path), dtype=bool)
        if bounce >= settings.min_bounces:
            survival = np.clip((kd + ks).max(axis=1), 0.0, 1.0)
            keep = u[:, 0] < survival
            with np.errstate(invalid="ignore", divide="ignore"):
                beta = beta / np.where(survival > 0, survival, 1.0)[:, None]

        w_diffuse = kd.mean(axis=1)
        w_glossy = ks.mean(axis=1)
        total = w_diffuse + w_glossy
        keep &= total > 0
        with np.errstate(invalid="ignore", divide="ignore"):
            p_diffuse = np.where(total > 0, w_diffuse / total, 0.0)
        diffuse = u[:, 1] < p_diffuse
        glossy = ~diffuse

        wi = np.empty_like(d)
        weight = np.zeros_like(beta)
        if diffuse.any():
            wi[diffuse] = sample_cosine_hemisphere(ns[diffuse], u[diffuse, 2], u[diffuse, 3])
            weight[diffuse] = kd[diffuse] / p_diffuse[diffuse, None]
        if glossy.any():
            g = np.flatnonzero(glossy)
            wi[g] = sample_phong_lobe(reflect(wo[g], ns[g]), shin[g], u[g, 2], u[g, 3])
            cos_i = np.maximum(0.0, _dot(ns[g], wi[g]))
            p_glossy = 1.0 - p_diffuse[g]
            with np.errstate(invalid="ignore", divide="ignore"):
                weight[g] = ks[g] * ((shin[g] + 2) / (shin[g] + 1) * cos_i / p_glossy)[:, None]
            glossy_count[g] += 1
            keep[g] &= (cos_i > 0) & (glossy_count[g] <= settings.glossy_bounces)
        keep &= _dot(ng, wi) > 0

        beta = beta * weight
        path, beta, glossy_count = path[keep], beta[keep], glossy_count[keep]
        o = _offset(point[keep], ng[keep])
        d = wi[keep]
        if path.size == 0:
            break

    bad = ~np.isfinite(radiance).all(axis=1)
    if bad.any():
        log.warning("discarding %d non-finite path samples", int(bad.sum()))
        radiance[bad] = 0.0
    return radiance


def trace_path(bvh: Bvh | None, scene, ray: Ray, settings: RenderSettings, rng: np.random.Generator) -> np.ndarray:
    return trace_paths(bvh, scene, ray.origin[None], ray.direction[None], settings, rng)[0]
