"""Levenberg-Marquardt pose refinement against reprojection error.

The pose is optimized over 6 degrees of freedom: a translation increment and
a 3-parameter axis-angle attitude increment composed onto the quaternion from
the right (body-frame perturbation). Steps are accepted only when they lower
the cost, so the refined cost never exceeds the initial one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BehindCameraError, NumericalFailureError
from ..geometry import CameraIntrinsics, Pose, project, quat_from_rotvec, quat_multiply
from .epnp import split_correspondences

_DAMPING_UP = 10.0
_DAMPING_DOWN = 0.1
_DAMPING_MAX = 1e15


@dataclass(frozen=True)
class LMConfig:
    max_iterations: int = 100
    gradient_tol: float = 1e-10
    step_tol: float = 1e-12
    cost_tol: float = 1e-14
    initial_damping: float = 1e-3

    def __post_init__(self):
        if min(self.gradient_tol, self.step_tol, self.cost_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if self.initial_damping <= 0:
            raise ValueError("initial_damping must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


def reprojection_residuals(
    pose: Pose, correspondences, cam: CameraIntrinsics
) -> tuple[np.ndarray, float]:
    """Per-point (du, dv) residuals and their RMS norm in pixels."""
    image, world = split_correspondences(correspondences)
    residuals = project(pose, cam, world) - image
    rms = float(np.sqrt(np.mean(np.sum(residuals**2, axis=1))))
    return residuals, rms


def reprojection_jacobian(pose: Pose, world: np.ndarray, cam: CameraIntrinsics) -> np.ndarray:
    """Analytic (2n, 6) Jacobian of stacked pixel residuals.

    Columns are [dt_x, dt_y, dt_z, dtheta_x, dtheta_y, dtheta_z] for the local
    update t + dt, q * exp(dtheta); rows alternate du, dv per point.
    """
    rot = pose.rotation_matrix()
    cam_pts = world @ rot.T + pose.position
    x, y, z = cam_pts[:, 0], cam_pts[:, 1], cam_pts[:, 2]
    n = world.shape[0]

    # d(u,v)/d(camera point)
    duv_dp = np.zeros((n, 2, 3))
    duv_dp[:, 0, 0] = cam.fx / z
    duv_dp[:, 0, 2] = -cam.fx * x / z**2
    duv_dp[:, 1, 1] = cam.fy / z
    duv_dp[:, 1, 2] = -cam.fy * y / z**2

    # d(camera point)/d(dtheta) = -R [world]_x for a right-composed increment
    wx = np.zeros((n, 3, 3))
    wx[:, 0, 1] = -world[:, 2]
    wx[:, 0, 2] = world[:, 1]
    wx[:, 1, 0] = world[:, 2]
    wx[:, 1, 2] = -world[:, 0]
    wx[:, 2, 0] = -world[:, 1]
    wx[:, 2, 1] = world[:, 0]
    dp_dtheta = -np.einsum("ab,nbc->nac", rot, wx)

    jac = np.zeros((2 * n, 6))
    jac[0::2, :3] = duv_dp[:, 0, :]
    jac[1::2, :3] = duv_dp[:, 1, :]
    jac[0::2, 3:] = np.einsum("nb,nbc->nc", duv_dp[:, 0, :], dp_dtheta)
    jac[1::2, 3:] = np.einsum("nb,nbc->nc", duv_dp[:, 1, :], dp_dtheta)
    return jac


def _apply_step(t: np.ndarray, q: np.ndarray, delta: np.ndarray):
    return t + delta[:3], quat_multiply(q, quat_from_rotvec(delta[3:]))


def _stacked_residuals(t, q, world, image, cam) -> np.ndarray | None:
    """Flat residual vector, or None when the step puts points behind the camera."""
    try:
        projected = project(Pose(position=t, attitude=q), cam, world)
    except BehindCameraError:
        return None
    return (projected - image).ravel()


def lm_refine(initial: Pose, correspondences, cam: CameraIntrinsics, cfg: LMConfig) -> Pose:
    """Minimize the summed squared reprojection error from ``initial``.

    Terminates on the gradient, step, or relative-cost tolerance, or after
    ``max_iterations``. Raises :class:`NumericalFailureError` on non-finite
    residuals at the starting point.
    """
    image, world = split_correspondences(correspondences)
    if image.shape[0] == 0:
        raise ValueError("need at least one correspondence")

    t = np.array(initial.position, dtype=float)
    q = np.array(initial.attitude, dtype=float)
    residual = _stacked_residuals(t, q, world, image, cam)
    if residual is None:
        raise BehindCameraError(0, 0.0)
    if not np.all(np.isfinite(residual)):
        raise NumericalFailureError("non-finite reprojection residuals at initial pose")
    cost = float(residual @ residual)

    damping = cfg.initial_damping
    for _ in range(cfg.max_iterations):
        jac = reprojection_jacobian(Pose(position=t, attitude=q), world, cam)
        grad = jac.T @ residual
        if np.max(np.abs(grad)) < cfg.gradient_tol:
            break
        jtj = jac.T @ jac
        diag = np.diag(np.maximum(np.diag(jtj), 1e-12))

        improved = False
        while damping <= _DAMPING_MAX:
            try:
                delta = np.linalg.solve(jtj + damping * diag, -grad)
            except np.linalg.LinAlgError:
                damping *= _DAMPING_UP
                continue
            if np.linalg.norm(delta) < cfg.step_tol:
                break
            t_new, q_new = _apply_step(t, q, delta)
            residual_new = _stacked_residuals(t_new, q_new, world, image, cam)
            cost_new = np.inf
            if residual_new is not None and np.all(np.isfinite(residual_new)):
                cost_new = float(residual_new @ residual_new)
            if cost_new < cost:
                t, q, residual = t_new, q_new, residual_new
                drop = cost - cost_new
                cost = cost_new
                damping = max(damping * _DAMPING_DOWN, 1e-15)
                improved = True
                if drop < cfg.cost_tol * max(cost, 1e-30):
                    improved = False  # converged on relative cost change
                break
            damping *= _DAMPING_UP
        if not improved:
            break
    return Pose(position=t, attitude=q)
