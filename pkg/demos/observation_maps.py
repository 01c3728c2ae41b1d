"""Walkthrough: from per-pixel light measurements to observation maps.

A surface point seen under many directional lights yields one irradiance per
light.  Projecting each light orthographically onto the viewing plane and
binning into a 32x32 grid gives the point's observation map: sparse for a
handful of lights, dense for a thousand.  This script builds both for the
same surface normal and writes PGM images you can open in any viewer.
"""

import os

import numpy as np

from sparseps import (
    Lambertian,
    PixelSamples,
    build_observation_map,
    make_dense_gt_map,
    normalize,
    project_light,
    sample_hemisphere_lights,
    shade,
)
from sparseps.obsmap import save_pgm

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

normal = normalize([0.45, 0.2, 0.87])
brdf = Lambertian(albedo=0.9)
rng = np.random.default_rng(0)

print("surface normal:", np.round(normal, 3))
print("the zenith light projects to cell", project_light([0, 0, 1], 32))

# Ten random lights: the sparse regime this toolkit targets.
lights = sample_hemisphere_lights(10, max_zenith_deg=75.0, rng=rng)
irradiance = shade(normal, lights, brdf)
sparse = build_observation_map(PixelSamples(lights, irradiance), w=32)
print(f"sparse map: {sparse.mask.sum()} of 1024 cells occupied, "
      f"peak value {sparse.values.max():.3f}")

# One thousand lights from the fixed dense sequence: the reference target.
dense = make_dense_gt_map(normal, brdf, light_count=1000, w=32)
print(f"dense map:  {dense.mask.sum()} of 1024 cells occupied")

save_pgm(sparse, os.path.join(OUT, "map_sparse.pgm"))
save_pgm(dense, os.path.join(OUT, "map_dense.pgm"))
print(f"wrote {OUT}/map_sparse.pgm and {OUT}/map_dense.pgm")
