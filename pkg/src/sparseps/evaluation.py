"""Trial-based evaluation: random sparse-light draws, noise sweeps, reports.

A scene is rendered once under a dense pool of lights; each trial draws a
small subset without replacement, runs a solver on every masked pixel, and
records the mean angular error in degrees.  Lighting-calibration noise is
modeled by handing the solver perturbed directions while the images remain
those captured under the true lights.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from typing import List

import numpy as np

from . import fileio
from .errors import DegenerateSamplesError, SparsePSError
from .geometry import angular_error_deg, perturb_light
from .obsmap import PixelSamples, build_observation_map
from .render import RenderedScene, inject_cast_shadow
from .solvers import (
    dense_map_to_samples,
    ls_normal,
    ls_normal_batch,
    symmetry_inpaint,
)


@dataclass
class TrialConfig:
    n_trials: int = 100
    n_lights: int = 10
    seed: int = 0
    sigma_deg: float = 0.0

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.n_lights < 3:
            raise ValueError("n_lights must be >= 3")


@dataclass
class EvalReport:
    solver: str
    seed: int
    n_trials: int
    n_lights: int
    sigma_deg: float
    per_trial_mean_deg: np.ndarray
    overall_mean_deg: float
    error_map_deg: np.ndarray       # last trial, zero outside the mask
    excluded_pixels: int


class LsSolver:
    """Per-pixel Lambertian least squares."""

    name = "ls"

    def solve_batch(self, lights, irradiance_matrix):
        return ls_normal_batch(lights, irradiance_matrix)


class InpaintLsSolver:
    """Bootstrap LS, symmetry inpainting, then LS on the completed map.

    The bootstrap estimate supplies the mirror axis; the inpainted dense map
    is decoded back to (cell light, value) pairs and refit.  mirror_step=False
    gives the diffusion-only control variant.
    """

    def __init__(self, w=32, mirror_step=True):
        self.w = w
        self.mirror_step = mirror_step
        self.name = "inpaint_ls" if mirror_step else "diffusion_ls"

    def solve_batch(self, lights, irradiance_matrix):
        m = irradiance_matrix.shape[1]
        normals = np.zeros((m, 3))
        valid = np.zeros(m, dtype=bool)
        boot, boot_valid = ls_normal_batch(lights, irradiance_matrix)
        for p in range(m):
            if not boot_valid[p]:
                continue
            try:
                sparse = build_observation_map(
                    PixelSamples(lights, irradiance_matrix[:, p]), self.w)
                dense = symmetry_inpaint(
                    sparse, n_hint=boot[p], mirror_step=self.mirror_step)
                cells = dense_map_to_samples(dense)
                normals[p], _ = ls_normal(cells.lights, cells.irradiance)
                valid[p] = True
            except SparsePSError:
                continue
        return normals, valid


class ModelSolver:
    """Trained interpolation + estimation models applied per pixel.

    Maps for all pixels of a trial are built individually but run through
    the models as one batch.
    """

    name = "trained"

    def __init__(self, li, ne, w=32):
        self.li = li
        self.ne = ne
        self.w = w

    def solve_batch(self, lights, irradiance_matrix):
        m = irradiance_matrix.shape[1]
        normals = np.zeros((m, 3))
        valid = np.zeros(m, dtype=bool)
        w2 = self.w * self.w
        inputs = np.zeros((m, 2 * w2))
        for p in range(m):
            try:
                obs = build_observation_map(
                    PixelSamples(lights, irradiance_matrix[:, p]), self.w)
            except DegenerateSamplesError:
                continue
            inputs[p, :w2] = obs.values.ravel()
            inputs[p, w2:] = obs.mask.ravel()
            valid[p] = True
        if not valid.any():
            return normals, valid
        s_flat = inputs[valid, :w2]
        d_flat = self.li.forward(np.concatenate(
            [s_flat, inputs[valid, w2:]], axis=1))
        u = self.ne.forward(np.concatenate([s_flat, d_flat], axis=1))
        norms = np.linalg.norm(u, axis=1)
        ok = norms > 0
        sub = np.zeros_like(u)
        sub[ok] = u[ok] / norms[ok, None]
        flip = sub[:, 2] < 0
        sub[flip] = -sub[flip]
        normals[valid] = sub
        idx = np.nonzero(valid)[0]
        valid[idx[~ok]] = False
        return normals, valid


def run_trials(scene: RenderedScene, solver, cfg: TrialConfig) -> EvalReport:
    """Evaluate a solver over repeated random sparse-light draws.

    Each trial samples cfg.n_lights pool indices without replacement; with
    cfg.sigma_deg > 0 the solver receives perturbed directions while pixel
    values stay those imaged under the true lights.  Pixels a solver cannot
    handle are excluded from the trial mean and counted.
    """
    rng = np.random.default_rng(cfg.seed)
    pool = scene.lights.shape[0]
    if cfg.n_lights > pool:
        raise ValueError("n_lights exceeds the rendered light pool")
    gt = scene.normals[scene.mask]
    pixel_values = scene.images[:, scene.mask]      # (pool, m)
    per_trial = np.zeros(cfg.n_trials)
    excluded = 0
    last_errors = None
    last_valid = None
    for trial in range(cfg.n_trials):
        idx = rng.choice(pool, size=cfg.n_lights, replace=False)
        true_lights = scene.lights[idx]
        irr = pixel_values[idx]
        if cfg.sigma_deg > 0:
            solver_lights = np.stack([
                perturb_light(l, cfg.sigma_deg, rng) for l in true_lights
            ])
        else:
            solver_lights = true_lights
        normals, valid = solver.solve_batch(solver_lights, irr)
        errors = np.zeros(valid.shape[0])
        errors[valid] = angular_error_deg(normals[valid], gt[valid])
        excluded += int((~valid).sum())
        per_trial[trial] = float(errors[valid].mean()) if valid.any() else float("nan")
        last_errors, last_valid = errors, valid
    error_map = np.zeros_like(scene.mask, dtype=float)
    grid = np.zeros(last_valid.shape[0])
    grid[last_valid] = last_errors[last_valid]
    error_map[scene.mask] = grid
    return EvalReport(
        solver=solver.name,
        seed=cfg.seed,
        n_trials=cfg.n_trials,
        n_lights=cfg.n_lights,
        sigma_deg=cfg.sigma_deg,
        per_trial_mean_deg=per_trial,
        overall_mean_deg=float(per_trial.mean()),
        error_map_deg=error_map,
        excluded_pixels=excluded,
    )


def noise_sweep(scene: RenderedScene, solver, sigmas, cfg: TrialConfig) -> List[EvalReport]:
    """run_trials once per noise level; sigmas must be sorted ascending."""
    sigmas = list(sigmas)
    if sigmas != sorted(sigmas):
        raise ValueError("sigmas must be sorted ascending")
    return [run_trials(scene, solver, replace(cfg, sigma_deg=s)) for s in sigmas]


def outlier_sensitivity(points, solver, half_angles_deg, seed=0):
    """Mean error per outlier severity level over a fixed set of points.

    Each point gets one random occluder direction (shared across levels, so
    larger cones strictly contain smaller ones); level 0 means no occlusion.
    Returns (table, nondecreasing) where table rows are
    (half_angle_deg, mean_error_deg).
    """
    from .geometry import sample_hemisphere_lights
    from .render import OccluderCone

    if len(half_angles_deg) < 2:
        raise ValueError("need at least two severity levels")
    rng = np.random.default_rng(seed)
    centers = sample_hemisphere_lights(len(points), 90.0, rng)
    table = []
    for half in half_angles_deg:
        errors = []
        for point, center in zip(points, centers):
            shadowed = point if half <= 0 else inject_cast_shadow(
                point, OccluderCone(center, half))
            try:
                normals, valid = solver.solve_batch(
                    shadowed.lights, shadowed.irradiance[:, None])
            except SparsePSError:
                continue
            if not valid[0]:
                continue
            errors.append(angular_error_deg(normals[0], point.normal))
        table.append((float(half), float(np.mean(errors))))
    means = [row[1] for row in table]
    nondecreasing = all(b >= a for a, b in zip(means, means[1:]))
    return table, nondecreasing


def write_report(report: EvalReport, path):
    """Write the report plus its error map as PFM and a PGM visualization.

    The text file is a key=value header followed by one per-trial error per
    line, six significant digits.  The PGM scales 45 degrees (and above) to
    255.  Companion files take the report path with _errmap suffixes.
    """
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"solver={report.solver}\n")
            fh.write(f"seed={report.seed}\n")
            fh.write(f"n_trials={report.n_trials}\n")
            fh.write(f"n_lights={report.n_lights}\n")
            fh.write(f"sigma={report.sigma_deg:.6g}\n")
            fh.write(f"mean_error_deg={report.overall_mean_deg:.6g}\n")
            fh.write(f"excluded_pixels={report.excluded_pixels}\n")
            for value in report.per_trial_mean_deg:
                fh.write(f"{value:.6g}\n")
        base, _ = os.path.splitext(str(path))
        fileio.write_pfm(base + "_errmap.pfm", report.error_map_deg)
        scaled = np.clip(report.error_map_deg / 45.0 * 255.0, 0, 255)
        fileio.write_pgm(base + "_errmap.pgm", np.rint(scaled).astype(np.uint8))
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def read_report(path):
    """Parse a report written by write_report; returns (header dict, trials)."""
    header = {}
    trials = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if "=" in line:
                key, value = line.split("=", 1)
                header[key] = value
            else:
                trials.append(float(line))
    return header, np.asarray(trials)
