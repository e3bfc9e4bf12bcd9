"""RANSAC wrapper around the EPnP solver.

Hypotheses are minimal correspondence samples drawn without replacement from
a seeded Philox stream, scored by per-point reprojection error. The standard
adaptive stopping rule shortens the loop once a high-inlier hypothesis is
found, and the winning consensus set is re-solved with EPnP over all of its
inliers. Identical seed and inputs reproduce the identical result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConsensusFailureError, DegenerateGeometryError, NoValidPoseError
from ..geometry import CameraIntrinsics, Pose
from ..rng import stream
from .epnp import epnp, split_correspondences


@dataclass(frozen=True)
class RansacConfig:
    max_iterations: int = 1000
    inlier_threshold: float = 5.0  # pixels, per-point reprojection error
    confidence: float = 0.99
    min_sample: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.min_sample < 4:
            raise ValueError("min_sample must be >= 4 for PnP")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must lie in (0, 1)")
        if self.inlier_threshold <= 0:
            raise ValueError("inlier_threshold must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class PnPResult:
    pose: Pose
    inlier_mask: np.ndarray  # bool, aligned with the input correspondences
    rms_reprojection: float  # pixels, over inliers only
    iterations_used: int


def _point_errors(pose: Pose, world: np.ndarray, image: np.ndarray, cam) -> np.ndarray:
    """Per-point reprojection error norms; inf for points behind the camera."""
    cam_pts = world @ pose.rotation_matrix().T + pose.position
    z = cam_pts[:, 2]
    errors = np.full(world.shape[0], np.inf)
    ok = z > 1e-9
    u = cam.fx * cam_pts[ok, 0] / z[ok] + cam.cx
    v = cam.fy * cam_pts[ok, 1] / z[ok] + cam.cy
    errors[ok] = np.hypot(u - image[ok, 0], v - image[ok, 1])
    return errors


def _required_iterations(inlier_ratio: float, sample_size: int, confidence: float, cap: int) -> int:
    """Iterations for a confidence-level chance of one all-inlier sample."""
    if inlier_ratio <= 0.0:
        return cap
    p_good = inlier_ratio**sample_size
    if p_good >= 1.0:
        return 1
    denom = math.log1p(-p_good)
    if denom == 0.0:
        return cap
    return min(cap, int(math.ceil(math.log(1.0 - confidence) / denom)))


def ransac_pnp(correspondences, cam: CameraIntrinsics, cfg: RansacConfig) -> PnPResult:
    """Robust pose fit; raises :class:`ConsensusFailureError` without support.

    The returned mask is the best hypothesis's consensus set; the pose is
    EPnP re-solved over all of those inliers.
    """
    corrs = list(correspondences)
    n = len(corrs)
    if n < cfg.min_sample:
        raise ValueError(f"need at least min_sample={cfg.min_sample} correspondences, got {n}")
    image, world = split_correspondences(corrs)

    rng = stream(cfg.seed, "ransac")
    best_mask: np.ndarray | None = None
    best_count = 0
    best_rms = np.inf
    required = cfg.max_iterations
    iterations = 0

    while iterations < required:
        iterations += 1
        sample = rng.choice(n, size=cfg.min_sample, replace=False)
        try:
            hypothesis = epnp([corrs[i] for i in sample], cam)
        except (DegenerateGeometryError, NoValidPoseError):
            continue
        errors = _point_errors(hypothesis, world, image, cam)
        mask = errors < cfg.inlier_threshold
        count = int(mask.sum())
        if count < cfg.min_sample:
            continue
        rms = float(np.sqrt(np.mean(errors[mask] ** 2)))
        if count > best_count or (count == best_count and rms < best_rms):
            best_mask, best_count, best_rms = mask, count, rms
            required = _required_iterations(
                count / n, cfg.min_sample, cfg.confidence, cfg.max_iterations
            )

    if best_mask is None:
        raise ConsensusFailureError(
            f"no hypothesis reached {cfg.min_sample} inliers in {iterations} iterations"
        )

    inliers = [c for c, keep in zip(corrs, best_mask) if keep]
    try:
        pose = epnp(inliers, cam)
    except (DegenerateGeometryError, NoValidPoseError) as exc:
        raise ConsensusFailureError(f"re-solve on {best_count} inliers failed: {exc}") from exc
    final_errors = _point_errors(pose, world, image, cam)
    rms = float(np.sqrt(np.mean(final_errors[best_mask] ** 2)))
    return PnPResult(
        pose=pose,
        inlier_mask=best_mask,
        rms_reprojection=rms,
        iterations_used=iterations,
    )
