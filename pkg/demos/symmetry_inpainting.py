"""Walkthrough: completing a 10-light map with the isotropy mirror.

The deterministic inpainter copies each known cell across the normal's
mirror axis before diffusing, doubling the effective sample count wherever
the reflected cell was unobserved.  Against the dense reference map, the
mirror step beats plain diffusion on the large majority of sphere points.
"""

import numpy as np

from sparseps import (
    Lambertian,
    PixelSamples,
    build_observation_map,
    make_dense_gt_map,
    normalize,
    sample_hemisphere_lights,
    shade,
    symmetry_inpaint,
)

rng = np.random.default_rng(3)
brdf = Lambertian(albedo=0.9)

wins = 0
trials = 100
example_shown = False
for _ in range(trials):
    n = normalize([rng.normal(), rng.normal(), abs(rng.normal()) + 0.3])
    lights = sample_hemisphere_lights(10, 75.0, rng)
    irr = shade(n, lights, brdf)
    if irr.max() <= 0:
        continue
    sparse = build_observation_map(PixelSamples(lights, irr), 32)
    reference = make_dense_gt_map(n, brdf, 1000, 32)
    mirrored = symmetry_inpaint(sparse, n_hint=n)
    diffused = symmetry_inpaint(sparse, n_hint=n, mirror_step=False)
    err_m = np.abs(mirrored.values - reference.values).mean()
    err_d = np.abs(diffused.values - reference.values).mean()
    if not example_shown:
        print(f"example point: mirror fill MAE {err_m:.4f} "
              f"vs diffusion-only {err_d:.4f}")
        example_shown = True
    if err_m < err_d:
        wins += 1

print(f"mirror fill closer to the dense reference on {wins}/{trials} points")
