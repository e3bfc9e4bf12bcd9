"""EPnP: non-iterative O(n) Perspective-n-Point solving.

Implements the method of Lepetit, Moreno-Noguer and Fua (IJCV 2009). World
points are expressed as barycentric combinations of four control points
(centroid plus principal directions); the camera-frame control points are a
combination of the four smallest eigenvectors of the projection-constraint
normal matrix; candidate combination weights (betas) are estimated for
assumed null-space dimensions 1..3, each refined by Gauss-Newton on the
inter-control-point distance constraints; the rigid transform then follows
from orthogonal Procrustes alignment with det=+1 enforcement.

Near-planar point sets fall back to three control points, which keeps the
barycentric system well conditioned when a face-on solar panel dominates
the correspondences.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ..errors import DegenerateGeometryError, NoValidPoseError
from ..geometry import CameraIntrinsics, Pose, quat_from_matrix

PLANAR_EIGENVALUE_RATIO = 1e-8
_COLLINEAR_EIGENVALUE_RATIO = 1e-10
_BETA_GN_ITERATIONS = 20


@dataclass(frozen=True)
class Correspondence:
    """One 2D-3D match: pixel observation of a body-frame keypoint."""

    image: np.ndarray  # (2,) pixels
    world: np.ndarray  # (3,) metres, body frame
    id: int = 0  # keypoint index, unique within a correspondence set

    def __post_init__(self):
        img = np.array(self.image, dtype=float).reshape(-1)
        wld = np.array(self.world, dtype=float).reshape(-1)
        if img.shape != (2,) or wld.shape != (3,):
            raise ValueError("Correspondence needs a 2-vector image and 3-vector world point")
        if not (np.all(np.isfinite(img)) and np.all(np.isfinite(wld))):
            raise ValueError("Correspondence coordinates must be finite")
        img.setflags(write=False)
        wld.setflags(write=False)
        object.__setattr__(self, "image", img)
        object.__setattr__(self, "world", wld)
        object.__setattr__(self, "id", int(self.id))


def split_correspondences(correspondences) -> tuple[np.ndarray, np.ndarray]:
    """Stack a correspondence list into (image (n,2), world (n,3)) arrays."""
    corrs = list(correspondences)
    image = np.array([c.image for c in corrs], dtype=float)
    world = np.array([c.world for c in corrs], dtype=float)
    return image, world


def _control_points(world: np.ndarray) -> np.ndarray:
    """Centroid plus principal directions; 3 points for near-planar sets."""
    c0 = world.mean(axis=0)
    centered = world - c0
    cov = centered.T @ centered / world.shape[0]
    lam, vec = np.linalg.eigh(cov)  # ascending eigenvalues
    if lam[2] <= 0 or lam[1] <= _COLLINEAR_EIGENVALUE_RATIO * lam[2]:
        raise DegenerateGeometryError(
            "world points are collinear or coincident; control points undefined"
        )
    if lam[0] < PLANAR_EIGENVALUE_RATIO * lam[2]:
        order = [2, 1]
    else:
        order = [2, 1, 0]
    rows = [c0]
    for idx in order:
        rows.append(c0 + np.sqrt(lam[idx]) * vec[:, idx])
    return np.array(rows)


def _barycentric(world: np.ndarray, ctrl: np.ndarray) -> np.ndarray:
    """Coordinates alpha with world_i = sum_j alpha_ij * ctrl_j, sum_j alpha_ij = 1."""
    m = ctrl.shape[0]
    lhs = np.vstack([ctrl.T, np.ones(m)])  # (4, m)
    rhs = np.vstack([world.T, np.ones(world.shape[0])])  # (4, n)
    if m == 4:
        alphas = np.linalg.solve(lhs, rhs)
    else:
        # planar: 3 unknowns, exact for in-plane points
        alphas, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    return alphas.T  # (n, m)


def _projection_system(
    alphas: np.ndarray, image: np.ndarray, cam: CameraIntrinsics
) -> np.ndarray:
    """2n x 3m matrix whose null space contains the camera-frame control points."""
    n, m = alphas.shape
    M = np.zeros((2 * n, 3 * m))
    u, v = image[:, 0], image[:, 1]
    for j in range(m):
        a = alphas[:, j]
        M[0::2, 3 * j] = a * cam.fx
        M[0::2, 3 * j + 2] = a * (cam.cx - u)
        M[1::2, 3 * j + 1] = a * cam.fy
        M[1::2, 3 * j + 2] = a * (cam.cy - v)
    return M


def _distance_terms(basis: np.ndarray, ctrl: np.ndarray):
    """Pairwise basis differences and squared control-point distances."""
    m = ctrl.shape[0]
    pairs = list(combinations(range(m), 2))
    k = basis.shape[1]
    vectors = basis.T.reshape(k, m, 3)  # basis vector k, control point j
    dv = np.array([[vectors[b, i] - vectors[b, j] for (i, j) in pairs] for b in range(k)])
    rho = np.array([np.sum((ctrl[i] - ctrl[j]) ** 2) for (i, j) in pairs])
    return dv, rho  # dv: (k, n_pairs, 3)


def _monomial_column(dv: np.ndarray, a: int, b: int) -> np.ndarray:
    """Column of the distance system for the beta_a*beta_b monomial."""
    col = np.einsum("pi,pi->p", dv[a], dv[b])
    if a != b:
        col = 2.0 * col
    return col


def _init_assuming_dim1(dv, rho) -> np.ndarray:
    """Betas when the null space is essentially one-dimensional."""
    k = dv.shape[0]
    cols = [_monomial_column(dv, 0, b) for b in range(k)]  # [b11, b12, b13, b14]
    sol, *_ = np.linalg.lstsq(np.column_stack(cols), rho, rcond=None)
    beta = np.zeros(k)
    lead = sol[0]
    if abs(lead) < 1e-15:
        return beta
    sign = -1.0 if lead < 0 else 1.0
    beta[0] = np.sqrt(abs(lead))
    beta[1:] = sign * sol[1:] / beta[0]
    return beta


def _leading_pair(sol) -> tuple[float, float]:
    """Shared sign logic for the (beta_1, beta_2) extraction from [b11 b12 b22]."""
    b11, b12, b22 = sol[0], sol[1], sol[2]
    if b11 < 0:
        beta1 = np.sqrt(-b11)
        beta2 = np.sqrt(-b22) if b22 < 0 else 0.0
    else:
        beta1 = np.sqrt(b11)
        beta2 = np.sqrt(b22) if b22 > 0 else 0.0
    if b12 < 0:
        beta1 = -beta1
    return beta1, beta2


def _init_assuming_dim2(dv, rho) -> np.ndarray:
    k = dv.shape[0]
    cols = [
        _monomial_column(dv, 0, 0),
        _monomial_column(dv, 0, 1),
        _monomial_column(dv, 1, 1),
    ]
    sol, *_ = np.linalg.lstsq(np.column_stack(cols), rho, rcond=None)
    beta = np.zeros(k)
    beta[0], beta[1] = _leading_pair(sol)
    return beta


def _init_assuming_dim3(dv, rho) -> np.ndarray:
    k = dv.shape[0]
    cols = [
        _monomial_column(dv, 0, 0),
        _monomial_column(dv, 0, 1),
        _monomial_column(dv, 1, 1),
        _monomial_column(dv, 0, 2),
        _monomial_column(dv, 1, 2),
    ]
    sol, *_ = np.linalg.lstsq(np.column_stack(cols), rho, rcond=None)
    beta = np.zeros(k)
    beta[0], beta[1] = _leading_pair(sol)
    if abs(beta[0]) > 1e-15:
        beta[2] = sol[3] / beta[0]
    return beta


def _refine_betas(dv, rho, beta: np.ndarray) -> np.ndarray:
    """Gauss-Newton on ||sum_k beta_k dv_k||^2 = rho over the full beta vector."""
    k = beta.shape[0]
    beta = beta.copy()
    for _ in range(_BETA_GN_ITERATIONS):
        x = np.tensordot(beta, dv, axes=1)  # (n_pairs, 3)
        residual = np.einsum("pi,pi->p", x, x) - rho
        jac = 2.0 * np.einsum("pi,kpi->pk", x, dv)
        hess = jac.T @ jac
        grad = jac.T @ residual
        try:
            delta = np.linalg.solve(hess + 1e-12 * np.eye(k), -grad)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(delta)):
            break
        beta += delta
        if np.linalg.norm(delta) < 1e-13 * max(1.0, np.linalg.norm(beta)):
            break
    return beta


def _distance_misfit(dv, rho, beta: np.ndarray) -> float:
    x = np.tensordot(beta, dv, axes=1)
    return float(np.linalg.norm(np.einsum("pi,pi->p", x, x) - rho))


def _stall_restarts(dv, rho, beta: np.ndarray) -> list[np.ndarray]:
    """Deterministic restarts along the flattest curvature direction.

    With exactly four points the projection kernel is four-dimensional and
    the eigen-basis inside it is arbitrary, which gives the distance cost
    shallow spurious minima; stepping the stalled solution along the softest
    eigendirection of the true Hessian reliably crosses the ridge.
    """
    x = np.tensordot(beta, dv, axes=1)
    residual = np.einsum("pi,pi->p", x, x) - rho
    jac = 2.0 * np.einsum("pi,kpi->pk", x, dv)
    second = 2.0 * np.einsum("kpi,lpi->pkl", dv, dv)
    hess = jac.T @ jac + np.einsum("p,pkl->kl", residual, 2.0 * second)
    _, eigvec = np.linalg.eigh(hess)
    soft = eigvec[:, 0]
    scale = max(1.0, np.linalg.norm(beta))
    return [
        beta + sign * step * scale * soft
        for step in (0.05, 0.2, 0.5, 1.0)
        for sign in (1.0, -1.0)
    ]


def _procrustes(world: np.ndarray, camera: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Best-fit rigid map world -> camera with a proper (det=+1) rotation."""
    wc = world.mean(axis=0)
    cc = camera.mean(axis=0)
    h = (world - wc).T @ (camera - cc)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return rot, cc - rot @ wc


def _reprojection_rms(
    rot: np.ndarray, t: np.ndarray, world: np.ndarray, image: np.ndarray, cam: CameraIntrinsics
) -> float:
    cam_pts = world @ rot.T + t
    z = cam_pts[:, 2]
    if np.any(z <= 1e-9):
        return np.inf
    u = cam.fx * cam_pts[:, 0] / z + cam.cx
    v = cam.fy * cam_pts[:, 1] / z + cam.cy
    return float(np.sqrt(np.mean((u - image[:, 0]) ** 2 + (v - image[:, 1]) ** 2)))


def _candidate_pose(beta, basis, alphas, world, image, cam):
    """Reconstruct (rms, R, t) from betas; None if behind the camera."""
    ctrl_cam = (basis @ beta).reshape(-1, 3)
    point_depths = (alphas @ ctrl_cam)[:, 2]
    # beta sign ambiguity: distances are preserved under negation, cheirality is not
    if np.count_nonzero(point_depths < 0) > point_depths.size / 2:
        ctrl_cam = -ctrl_cam
    cam_pts = alphas @ ctrl_cam
    rot, t = _procrustes(world, cam_pts)
    if t[2] <= 0:
        return None
    rms = _reprojection_rms(rot, t, world, image, cam)
    if not np.isfinite(rms):
        return None
    return rms, rot, t


def epnp(correspondences, cam: CameraIntrinsics) -> Pose:
    """Closed-form pose from >= 4 correspondences.

    Raises :class:`DegenerateGeometryError` for collinear world points and
    :class:`NoValidPoseError` when every candidate puts the target behind
    the camera.
    """
    corrs = list(correspondences)
    if len(corrs) < 4:
        raise ValueError(f"EPnP needs at least 4 correspondences, got {len(corrs)}")
    ids = [c.id for c in corrs]
    if len(set(ids)) != len(ids):
        raise ValueError("correspondence ids must be unique")
    image, world = split_correspondences(corrs)

    ctrl = _control_points(world)
    alphas = _barycentric(world, ctrl)
    m_sys = _projection_system(alphas, image, cam)
    _, eigvecs = np.linalg.eigh(m_sys.T @ m_sys)
    basis = eigvecs[:, : (4 if ctrl.shape[0] == 4 else 2)]

    dv, rho = _distance_terms(basis, ctrl)
    inits = [_init_assuming_dim1(dv, rho), _init_assuming_dim2(dv, rho)]
    if ctrl.shape[0] == 4:
        inits.append(_init_assuming_dim3(dv, rho))

    # only n=4 leaves the whole 4-dim basis degenerate; see _stall_restarts
    probe_stalls = world.shape[0] == 4 and ctrl.shape[0] == 4
    misfit_floor = 1e-9 * max(1.0, float(np.linalg.norm(rho)))

    best = None
    for beta0 in inits:
        beta = _refine_betas(dv, rho, beta0)
        betas = [beta]
        if probe_stalls and _distance_misfit(dv, rho, beta) > misfit_floor:
            betas.extend(_refine_betas(dv, rho, b) for b in _stall_restarts(dv, rho, beta))
        for b in betas:
            candidate = _candidate_pose(b, basis, alphas, world, image, cam)
            if candidate is not None and (best is None or candidate[0] < best[0]):
                best = candidate
    if best is None:
        raise NoValidPoseError("all EPnP candidates place the target behind the camera")
    _, rot, t = best
    return Pose(position=t, attitude=quat_from_matrix(rot))
