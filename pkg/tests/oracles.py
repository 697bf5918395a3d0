"""Independent reference implementations the tests compare against.

Nothing here calls into the code paths under test.
"""

from __future__ import annotations

import numpy as np


def moller_trumbore(origin, direction, v0, v1, v2):
    """Ray/triangle distance for one ray against many triangles; ``inf`` on miss.

    Edges count as inside (u, v >= 0, u + v <= 1).
    """
    e1 = v1 - v0
    e2 = v2 - v0
    p = np.cross(direction, e2)
    det = np.einsum("ij,ij->i", e1, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / det
        s = origin - v0
        u = np.einsum("ij,ij->i", s, p) * inv
        q = np.cross(s, e1)
        v = (q @ direction) * inv
        t = np.einsum("ij,ij->i", e2, q) * inv
    hit = (det != 0) & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > 0)
    return np.where(hit, t, np.inf)


def brute_force_nearest(triangles, origins, directions):
    """Nearest triangle id and distance for each ray by testing every triangle."""
    tris = np.asarray(triangles, dtype=np.float64)
    ids = np.full(len(origins), -1)
    ts = np.full(len(origins), np.inf)
    for i, (o, d) in enumerate(zip(origins, directions)):
        t = moller_trumbore(o, d, tris[:, 0], tris[:, 1], tris[:, 2])
        j = int(np.argmin(t))
        if np.isfinite(t[j]):
            ids[i], ts[i] = j, t[j]
    return ids, ts


def polygon_area(points) -> float:
    """Area of a planar polygon in 3D via Newell's formula."""
    pts = np.asarray(points, dtype=np.float64)
    total = np.zeros(3)
    for a, b in zip(pts, np.roll(pts, -1, axis=0)):
        total += np.cross(a, b)
    return 0.5 * float(np.linalg.norm(total))


def triangle_area(a, b, c) -> float:
    return 0.5 * float(np.linalg.norm(np.cross(np.subtract(b, a), np.subtract(c, a))))


def boxes_disjoint(a_min, a_max, b_min, b_max) -> bool:
    for axis in range(3):
        if a_max[axis] <= b_min[axis] or b_max[axis] <= a_min[axis]:
            return True
    return False


def scan_aabb(points):
    lo = [float("inf")] * 3
    hi = [float("-inf")] * 3
    for p in points:
        for k in range(3):
            lo[k] = min(lo[k], p[k])
            hi[k] = max(hi[k], p[k])
    return lo, hi


def random_triangles(rng, n, spread=1.0, size=0.2):
    centers = rng.uniform(-spread, spread, (n, 1, 3))
    return centers + rng.normal(0.0, size, (n, 3, 3))


def random_rays(rng, n, extent=2.0):
    origins = rng.uniform(-extent, extent, (n, 3))
    directions = rng.normal(size=(n, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return origins, directions


def camera_grid_directions(fov, res_x, res_y, grid):
    """Camera-space unit directions through the centers of a grid x grid image lattice.

    Written from the pinhole definition rather than the renderer's ray generator.
    """
    half_h = np.tan(fov / 2)
    half_w = half_h * res_x / res_y
    cells = (np.arange(grid) + 0.5) / grid
    dirs = []
    for fy in cells:
        for fx in cells:
            d = np.array([(2 * fx - 1) * half_w, (1 - 2 * fy) * half_h, -1.0])
            dirs.append(d / np.linalg.norm(d))
    return np.array(dirs)


def planes_mean_depth(directions, planes):
    """Mean z-depth of the nearest hit among planes ``z = -depth`` limited to an x-interval.

    ``planes`` is a list of (depth, x_lo, x_hi); the camera sits at the origin
    looking down -Z. Misses are excluded.
    """
    depths = []
    for d in directions:
        best = np.inf
        for depth, x_lo, x_hi in planes:
            t = depth / -d[2]
            x = t * d[0]
            if x_lo <= x <= x_hi and t < best:
                best = t
        if np.isfinite(best):
            depths.append(best * -d[2])
    return float(np.mean(depths))
