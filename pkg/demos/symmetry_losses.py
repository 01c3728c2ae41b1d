"""Walkthrough: isotropy makes dense maps mirror symmetric; shadows break it.

An isotropic BRDF shades two lights identically whenever they sit symmetric
about the plane spanned by the viewing direction and the normal.  On an
observation map that plane becomes a line through the center along the
normal's projected direction, so a clean dense map nearly equals its own
mirror and the symmetric loss is small.  A cast shadow zeroes a one-sided
blob of cells and the loss jumps.
"""

import numpy as np

from sparseps import (
    Lambertian,
    ObservationMap,
    OccluderCone,
    PixelSamples,
    asym_loss,
    build_observation_map,
    inject_cast_shadow,
    make_dense_gt_map,
    normalize,
    shade,
    sym_loss,
)
from sparseps.render import dense_map_lights

normal = normalize([0.5, -0.3, 0.81])
brdf = Lambertian(albedo=0.85)

dense = make_dense_gt_map(normal, brdf, 1000, 32)
per_cell = sym_loss(dense, normal) / dense.mask.sum()
print(f"clean dense map:   sym loss per occupied cell = {per_cell:.4f}")

# Knock out a cone of lights on one side of the mirror axis.
lights = dense_map_lights(1000, 32)
samples = PixelSamples(lights, shade(normal, lights, brdf), normal)
cone = OccluderCone(normalize([-0.55, -0.5, 0.67]), half_angle_deg=18.0)
shadowed = build_observation_map(inject_cast_shadow(samples, cone), 32)
per_cell_shadowed = sym_loss(shadowed, normal) / shadowed.mask.sum()
print(f"shadowed map:      sym loss per occupied cell = {per_cell_shadowed:.4f}")

# The asymmetric loss pins the symmetry defect to a nonzero target, so a
# perfectly symmetric map sits at the constant floor |0-1| + 50*|0-1| = 51.
flat = ObservationMap(np.full((32, 32), 0.5), np.ones((32, 32), np.uint8))
print(f"asym loss of an exactly symmetric map = {asym_loss(flat, [0, 1.0, 0])}")
print(f"asym loss of the shadowed map         = "
      f"{asym_loss(shadowed, normal):.2f}")
