"""Shared test utilities: margin-aware sampling for finite-difference oracles.

L1 losses are nonsmooth exactly where a cell equals its mirrored read, and
the subgradient convention there legitimately disagrees with a finite
difference.  Finite-difference comparisons therefore sample instances with a
margin between every relevant residual and zero, rejecting the measure-zero
neighborhoods where the oracle itself is invalid.
"""

import numpy as np

from sparseps.geometry import normalize
from sparseps.obsmap import ObservationMap, ReflectionPlan, axis_from_normal


def random_unit_normal(rng, min_nz=0.15):
    while True:
        v = rng.normal(size=3)
        v[2] = abs(v[2])
        n = normalize(v)
        if n[2] >= min_nz and np.hypot(n[0], n[1]) > 1e-3:
            return n


def _mirror_margins_ok(values, n, margin):
    w = values.shape[0]
    plan = ReflectionPlan(w, axis_from_normal(n))
    diff = values - plan.gather(values)
    if np.abs(diff).min() <= margin:
        return False
    if w % 2 == 0 and w >= 4:
        pooled = values.reshape(w // 2, 2, w // 2, 2).mean(axis=(1, 3))
        half_plan = ReflectionPlan(w // 2, axis_from_normal(n))
        pdiff = pooled - half_plan.gather(pooled)
        if np.abs(pdiff).min() <= margin:
            return False
    return True


def sample_margin_instance(rng, w=32, margin=1e-3, need_reference=False):
    """Random (map, normal[, reference map, mask]) away from all L1 ties."""
    while True:
        n = random_unit_normal(rng)
        values = rng.uniform(0.0, 1.0, size=(w, w))
        if not _mirror_margins_ok(values, n, margin):
            continue
        obs = ObservationMap(values, np.ones((w, w), np.uint8))
        if not need_reference:
            return obs, n
        ref = rng.uniform(0.0, 1.0, size=(w, w))
        if np.abs(values - ref).min() <= margin:
            continue
        mask = (rng.uniform(size=(w, w)) < 0.3).astype(np.uint8)
        return obs, n, ObservationMap(ref, np.ones((w, w), np.uint8)), mask


def sample_angle_margin_instance(rng, w=16, margin=1e-3, frac_margin=1e-4):
    """Instance where the axis-angle gradient is smooth: residual margins hold
    and no reflected position sits on a bilinear cell boundary."""
    while True:
        n = random_unit_normal(rng)
        values = rng.uniform(0.0, 1.0, size=(w, w))
        if not _mirror_margins_ok(values, n, margin):
            continue
        ok = True
        for width in (w, w // 2):
            plan = ReflectionPlan(width, axis_from_normal(n))
            for pos in (plan.pos_x, plan.pos_y):
                frac = np.abs(pos - np.rint(pos))
                if frac.min() <= frac_margin:
                    ok = False
        if ok:
            return ObservationMap(values, np.ones((w, w), np.uint8)), n


def symmetric_map(w, rng=None, axis="vertical"):
    """A map exactly invariant under the axis-aligned mirror."""
    if rng is None:
        base = np.full((w, w), 0.5)
    else:
        base = rng.uniform(0.0, 1.0, size=(w, w))
    if axis == "vertical":        # normal (0, 1, 0): column flip
        values = (base + base[:, ::-1]) / 2.0
    else:                          # normal (1, 0, 0) or (0, 0, 1): row flip
        values = (base + base[::-1, :]) / 2.0
    return ObservationMap(values, np.ones((w, w), np.uint8))
