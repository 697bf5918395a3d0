"""Furnace convergence study: estimate vs. analytic radiance as samples grow.

Renders the closed diffuse box at increasing sample counts and prints the
mean, relative error and the across-pixel standard error of the mean. The
error column should shrink roughly by half for every 4x in samples.

    python scripts/furnace_convergence.py --samples 16 64 256 1024 4096
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from synthgen.render import BvhCache, RenderSettings, render_frame
from synthgen.scenes import furnace_radiance, furnace_scene


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--albedo", type=float, default=0.5)
    parser.add_argument("--emission", type=float, default=0.2)
    parser.add_argument("--max-bounces", type=int, default=8)
    parser.add_argument("--resolution", type=int, default=16)
    parser.add_argument("--samples", type=int, nargs="+", default=[16, 64, 256, 1024])
    parser.add_argument("--threads", type=int, default=0)
    args = parser.parse_args()

    scene = furnace_scene(args.albedo, args.emission)
    bvh = BvhCache().get(scene)
    exact = furnace_radiance(args.albedo, args.emission, args.max_bounces)
    print(f"analytic radiance {exact:.6f}")
    print(f"{'spp':>6} {'mean':>10} {'rel.err':>9} {'std.err':>9} {'seconds':>8}")
    for spp in args.samples:
        settings = RenderSettings(args.resolution, args.resolution, samples=spp, max_bounces=args.max_bounces)
        start = time.perf_counter()
        (frame,) = render_frame(scene, bvh, scene.keyframes[0], settings, "colors", args.threads)
        elapsed = time.perf_counter() - start
        values = frame.data.astype(np.float64).mean(axis=2).ravel()
        mean = values.mean()
        stderr = values.std(ddof=1) / np.sqrt(values.size)
        print(f"{spp:6d} {mean:10.6f} {abs(mean - exact) / exact:9.2%} {stderr:9.6f} {elapsed:8.2f}")


if __name__ == "__main__":
    main()
