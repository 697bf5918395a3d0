"""Triangle BVH and batched ray queries.

Rays are processed as numpy batches. Traversal is breadth-first over
(ray, node) pairs so that a whole batch advances one tree level per step;
the nearest hit per ray is kept with ties broken by the lower triangle id,
which makes results independent of traversal order.

Ray/triangle tests use the watertight shear-and-scale formulation of Woop,
Benthin and Wald (2013): a ray through a shared edge or vertex can never slip
between adjacent triangles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from synthgen.errors import EmptyScene

LEAF_SIZE = 4
_EPS = np.finfo(np.float64).eps
_GAMMA3 = 3 * _EPS / (1 - 3 * _EPS)


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    t_min: float = 0.0
    t_max: float = np.inf

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=np.float64))
        object.__setattr__(self, "direction", np.asarray(self.direction, dtype=np.float64))
        if abs(np.linalg.norm(self.direction) - 1) > 1e-9:
            raise ValueError("ray direction must be unit length")


@dataclass(frozen=True)
class Hit:
    t: float
    point: np.ndarray
    geometric_normal: np.ndarray
    shading_normal: np.ndarray
    mesh_id: int
    triangle_id: int
    global_triangle_id: int


@dataclass(frozen=True)
class HitBatch:
    """Nearest-hit results for a batch of rays; ``tri == -1`` marks a miss."""

    t: np.ndarray
    tri: np.ndarray
    bary: np.ndarray

    @property
    def hit(self) -> np.ndarray:
        return self.tri >= 0


class Bvh:
    """Immutable median-split BVH over a flat triangle list.

    Triangle ids are positions in the flat list (mesh-major order when built
    from a scene). ``order[start:start + count]`` lists a leaf's triangles.
    """

    def __init__(self, v0, v1, v2, mesh_index=None, local_index=None, n0=None, n1=None, n2=None):
        self.v0 = np.ascontiguousarray(v0, dtype=np.float64)
        self.v1 = np.ascontiguousarray(v1, dtype=np.float64)
        self.v2 = np.ascontiguousarray(v2, dtype=np.float64)
        n = len(self.v0)
        if n == 0:
            raise EmptyScene("cannot build a BVH without triangles")
        self.mesh_index = np.zeros(n, np.int64) if mesh_index is None else np.asarray(mesh_index, np.int64)
        self.local_index = np.arange(n) if local_index is None else np.asarray(local_index, np.int64)

        cross = np.cross(self.v1 - self.v0, self.v2 - self.v0)
        length = np.linalg.norm(cross, axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            self.face_normal = np.where(length > 0, cross / length, 0.0)
        if n0 is None:
            self.vertex_normals = None
        else:
            self.vertex_normals = np.stack([n0, n1, n2], axis=1).astype(np.float64)
            self.has_vertex_normals = np.isfinite(self.vertex_normals).all(axis=(1, 2))

        self._build()

    @classmethod
    def from_triangles(cls, triangles) -> Bvh:
        tris = np.asarray(triangles, dtype=np.float64).reshape(-1, 3, 3)
        return cls(tris[:, 0], tris[:, 1], tris[:, 2])

    @property
    def triangle_count(self) -> int:
        return len(self.v0)

    @property
    def node_count(self) -> int:
        return len(self.node_min)

    def _build(self) -> None:
        tri_min = np.minimum(np.minimum(self.v0, self.v1), self.v2)
        tri_max = np.maximum(np.maximum(self.v0, self.v1), self.v2)
        centroid = (self.v0 + self.v1 + self.v2) / 3.0
        order = np.arange(len(self.v0))

        node_min, node_max, left, right, start, count, depth = [], [], [], [], [], [], []

        def new_node(lo, hi, d):
            node_min.append(None)
            node_max.append(None)
            left.append(-1)
            right.append(-1)
            start.append(lo)
            count.append(0)
            depth.append(d)
            return len(node_min) - 1

        stack = [new_node(0, len(order), 0)]
        ends = {0: len(order)}
        while stack:
            node = stack.pop()
            lo, hi = start[node], ends.pop(node)
            idx = order[lo:hi]
            node_min[node] = tri_min[idx].min(axis=0)
            node_max[node] = tri_max[idx].max(axis=0)
            if hi - lo <= LEAF_SIZE:
                count[node] = hi - lo
                continue
            c = centroid[idx]
            axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
            # stable and tie-broken by triangle id: build is deterministic
            order[lo:hi] = idx[np.lexsort((idx, c[:, axis]))]
            mid = (lo + hi) // 2
            l_node = new_node(lo, mid, depth[node] + 1)
            r_node = new_node(mid, hi, depth[node] + 1)
            left[node], right[node] = l_node, r_node
            ends[l_node], ends[r_node] = mid, hi
            stack.extend((r_node, l_node))

        self.order = order
        self.node_min = np.array(node_min)
        self.node_max = np.array(node_max)
        self.node_left = np.array(left, dtype=np.int64)
        self.node_right = np.array(right, dtype=np.int64)
        self.node_start = np.array(start, dtype=np.int64)
        self.node_count_ = np.array(count, dtype=np.int64)
        self.node_depth = np.array(depth, dtype=np.int64)

    def depth(self) -> int:
        """Number of edges on the longest root-to-leaf path."""
        return int(self.node_depth.max())

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.node_count_ > 0)

    # -- queries ----------------------------------------------------------

    def intersect(self, origins, directions, t_min=0.0, t_max=np.inf) -> HitBatch:
        origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
        directions = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
        n = len(origins)
        t_min = np.broadcast_to(np.asarray(t_min, dtype=np.float64), (n,))
        best_t = np.array(np.broadcast_to(np.asarray(t_max, dtype=np.float64), (n,)))
        best_tri = np.full(n, -1, dtype=np.int64)
        best_bary = np.zeros((n, 3))
        if n == 0:
            return HitBatch(best_t, best_tri, best_bary)

        with np.errstate(divide="ignore"):
            inv_dir = 1.0 / directions
        shear = _RayShear(directions)

        rays = np.arange(n)
        nodes = np.zeros(n, dtype=np.int64)
        while rays.size:
            keep = self._slab_test(origins[rays], inv_dir[rays], nodes, t_min[rays], best_t[rays])
            rays, nodes = rays[keep], nodes[keep]
            is_leaf = self.node_count_[nodes] > 0

            if is_leaf.any():
                leaf_rays, leaf_nodes = rays[is_leaf], nodes[is_leaf]
                counts = self.node_count_[leaf_nodes]
                pair = np.repeat(np.arange(len(leaf_nodes)), counts)
                offset = np.arange(len(pair)) - np.repeat(np.cumsum(counts) - counts, counts)
                tri = self.order[self.node_start[leaf_nodes][pair] + offset]
                pr = leaf_rays[pair]
                t, bary = intersect_pairs(origins, shear, pr, self.v0[tri], self.v1[tri], self.v2[tri])
                valid = (t > t_min[pr]) & (t < best_t[pr])
                valid |= (t == best_t[pr]) & (tri < best_tri[pr]) & (best_tri[pr] >= 0)
                if valid.any():
                    pr, tri, t, bary = pr[valid], tri[valid], t[valid], bary[valid]
                    first = np.lexsort((tri, t, pr))
                    pr, tri, t, bary = pr[first], tri[first], t[first], bary[first]
                    _, head = np.unique(pr, return_index=True)
                    pr, tri, t, bary = pr[head], tri[head], t[head], bary[head]
                    better = (t < best_t[pr]) | ((t == best_t[pr]) & ((best_tri[pr] < 0) | (tri < best_tri[pr])))
                    pr = pr[better]
                    best_t[pr], best_tri[pr], best_bary[pr] = t[better], tri[better], bary[better]

            inner_rays, inner_nodes = rays[~is_leaf], nodes[~is_leaf]
            rays = np.concatenate([inner_rays, inner_rays])
            nodes = np.concatenate([self.node_left[inner_nodes], self.node_right[inner_nodes]])

        best_t[best_tri < 0] = np.inf
        return HitBatch(best_t, best_tri, best_bary)

    def _slab_test(self, origins, inv_dir, nodes, t_min, t_best) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            lo = (self.node_min[nodes] - origins) * inv_dir
            hi = (self.node_max[nodes] - origins) * inv_dir
        # 0 * inf: ray parallel to and inside a slab plane; keep it conservatively
        near = np.where(np.isnan(lo) | np.isnan(hi), -np.inf, np.minimum(lo, hi)).max(axis=1)
        far = np.where(np.isnan(lo) | np.isnan(hi), np.inf, np.maximum(lo, hi)).min(axis=1)
        far = far + np.abs(far) * 4 * _GAMMA3
        near = near - np.abs(near) * 4 * _GAMMA3
        return (near <= far) & (far >= t_min) & (near <= t_best)

    def occluded(self, origins, directions, t_max) -> np.ndarray:
        return self.intersect(origins, directions, 0.0, t_max).hit

    def surface(self, hits: HitBatch, origins, directions):
        """Hit points plus geometric and shading normals, both flipped to face the ray origin."""
        tri = hits.tri
        point = origins + hits.t[:, None] * directions
        ng = self.face_normal[tri]
        facing = np.where(_dot(ng, directions) > 0, -1.0, 1.0)[:, None]
        ng = ng * facing
        ns = ng
        if self.vertex_normals is not None:
            interp = np.einsum("ni,nij->nj", hits.bary, self.vertex_normals[tri])
            length = np.linalg.norm(interp, axis=1, keepdims=True)
            usable = self.has_vertex_normals[tri] & (length[:, 0] > 0)
            with np.errstate(invalid="ignore", divide="ignore"):
                interp = interp / length * facing
            usable &= _dot(interp, directions) < 0
            ns = np.where(usable[:, None], interp, ng)
        return point, ng, ns


def _dot(a, b):
    return a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1] + a[:, 2] * b[:, 2]


class _RayShear:
    """Per-ray axis permutation and shear constants for the watertight test."""

    def __init__(self, directions: np.ndarray):
        n = len(directions)
        rows = np.arange(n)
        kz = np.argmax(np.abs(directions), axis=1)
        kx = (kz + 1) % 3
        ky = (kx + 1) % 3
        dz = directions[rows, kz]
        # swap to preserve triangle winding
        flip = dz < 0
        kx, ky = np.where(flip, ky, kx), np.where(flip, kx, ky)
        self.perm = np.stack([kx, ky, kz], axis=1)
        self.sx = directions[rows, kx] / dz
        self.sy = directions[rows, ky] / dz
        self.sz = 1.0 / dz


def intersect_pairs(origins, shear: _RayShear, rays, v0, v1, v2):
    """Intersect ray ``rays[i]`` with triangle ``(v0[i], v1[i], v2[i])``.

    Returns ``(t, bary)``; ``t`` is ``inf`` for a miss and ``bary`` holds the
    weights of v0, v1, v2.
    """
    o = origins[rays]
    perm = shear.perm[rays]
    sx, sy, sz = shear.sx[rays], shear.sy[rays], shear.sz[rays]

    # columns reordered to (kx, ky, kz)
    a = np.take_along_axis(v0 - o, perm, axis=1)
    b = np.take_along_axis(v1 - o, perm, axis=1)
    c = np.take_along_axis(v2 - o, perm, axis=1)
    a_z, b_z, c_z = a[:, 2], b[:, 2], c[:, 2]
    ax = a[:, 0] - sx * a_z
    ay = a[:, 1] - sy * a_z
    bx = b[:, 0] - sx * b_z
    by = b[:, 1] - sy * b_z
    cx = c[:, 0] - sx * c_z
    cy = c[:, 1] - sy * c_z

    u = cx * by - cy * bx
    v = ax * cy - ay * cx
    w = bx * ay - by * ax

    inside = ~(((u < 0) | (v < 0) | (w < 0)) & ((u > 0) | (v > 0) | (w > 0)))
    det = u + v + w
    inside &= det != 0

    big_t = u * (sz * a_z) + v * (sz * b_z) + w * (sz * c_z)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(inside, big_t / det, np.inf)
        bary = np.stack([u / det, v / det, w / det], axis=1)
    t[~np.isfinite(t)] = np.inf
    return t, bary


def intersect_triangles(origins, directions, v0, v1, v2):
    """Elementwise ray/triangle test for paired arrays (used by oracles and tests)."""
    origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    directions = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
    shear = _RayShear(directions)
    v0, v1, v2 = (np.asarray(v, dtype=np.float64) for v in (v0, v1, v2))
    return intersect_pairs(origins, shear, np.arange(len(origins)), v0, v1, v2)


def build_bvh(scene) -> Bvh:
    """Flatten all scene meshes (mesh-major) and build a BVH over them."""
    meshes = [m for m in scene.meshes if len(m.triangles)]
    if not meshes:
        raise EmptyScene("scene has no triangles")
    v0, v1, v2, mesh_index, local_index = [], [], [], [], []
    n0, n1, n2 = [], [], []
    any_normals = any(m.normals is not None for m in meshes)
    for mesh_id, mesh in enumerate(scene.meshes):
        tris = mesh.triangles
        if not len(tris):
            continue
        v0.append(mesh.vertices[tris[:, 0]])
        v1.append(mesh.vertices[tris[:, 1]])
        v2.append(mesh.vertices[tris[:, 2]])
        mesh_index.append(np.full(len(tris), mesh_id))
        local_index.append(np.arange(len(tris)))
        if any_normals:
            if mesh.normals is None:
                nan = np.full((len(tris), 3), np.nan)
                n0.append(nan)
                n1.append(nan)
                n2.append(nan)
            else:
                n0.append(mesh.normals[tris[:, 0]])
                n1.append(mesh.normals[tris[:, 1]])
                n2.append(mesh.normals[tris[:, 2]])
    normals = (np.concatenate(n0), np.concatenate(n1), np.concatenate(n2)) if any_normals else (None, None, None)
    return Bvh(
        np.concatenate(v0), np.concatenate(v1), np.concatenate(v2),
        np.concatenate(mesh_index), np.concatenate(local_index), *normals,
    )


def intersect_nearest(bvh: Bvh, ray: Ray) -> Hit | None:
    hits = bvh.intersect(ray.origin[None], ray.direction[None], ray.t_min, ray.t_max)
    if not hits.hit[0]:
        return None
    point, ng, ns = bvh.surface(hits, ray.origin[None], ray.direction[None])
    tri = int(hits.tri[0])
    return Hit(
        t=float(hits.t[0]),
        point=point[0],
        geometric_normal=ng[0],
        shading_normal=ns[0],
        mesh_id=int(bvh.mesh_index[tri]),
        triangle_id=int(bvh.local_index[tri]),
        global_triangle_id=tri,
    )


class BvhCache:
    """Build-once cache keyed by scene identity and version."""

    def __init__(self):
        self.builds = 0
        self._key = None
        self._bvh: Bvh | None = None

    def get(self, scene) -> Bvh | None:
        """BVH for the current scene version, or ``None`` for a scene without triangles."""
        key = (id(scene), scene.version)
        if key != self._key:
            self._bvh = build_bvh(scene) if scene.triangle_count else None
            if self._bvh is not None:
                self.builds += 1
            self._key = key
        return self._bvh
