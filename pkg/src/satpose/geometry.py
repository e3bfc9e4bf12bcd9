"""Pose and quaternion algebra, pinhole projection, and label derivation.

Conventions
-----------
* Quaternions are scalar-first ``(w, x, y, z)`` unit 4-vectors under the
  Hamilton product.
* ``Pose.attitude`` rotates body-frame vectors into the camera frame:
  ``x_cam = R(q) @ x_body + position``.
* Image coordinates are continuous pixels, origin at the top-left corner,
  u rightwards, v downwards. Projection never clips; box clamping is the
  bounding-box layer's job.

All types are immutable values and all functions are pure, so everything here
is safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BehindCameraError, DegenerateGeometryError, OutOfFrameError
from .roi import BBox

MIN_PROJECTION_DEPTH = 1e-6  # metres
_UNIT_TOL = 1e-9


def _vec3(v, name: str = "vector") -> np.ndarray:
    out = np.array(v, dtype=float).reshape(-1)
    if out.shape != (3,):
        raise ValueError(f"{name} must have 3 components, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} must be finite, got {out}")
    return out


def _quat(q, name: str = "quaternion") -> np.ndarray:
    out = np.array(q, dtype=float).reshape(-1)
    if out.shape != (4,):
        raise ValueError(f"{name} must have 4 components (w, x, y, z)")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} must be finite, got {out}")
    return out


def quat_normalize(q) -> np.ndarray:
    """Rescale to unit norm; raises on (near-)zero input.

    Inputs already unit to 1e-12 pass through bit-identically, so values that
    round-trip through files are not perturbed by repeated renormalization.
    """
    out = _quat(q)
    norm = np.linalg.norm(out)
    if norm < 1e-12:
        raise ValueError("cannot normalize a zero quaternion")
    if abs(norm - 1.0) <= 1e-12:
        return out
    return out / norm


def quat_multiply(a, b) -> np.ndarray:
    """Hamilton product a*b (apply b's rotation first, then a's)."""
    aw, ax, ay, az = _quat(a)
    bw, bx, by, bz = _quat(b)
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q) -> np.ndarray:
    w, x, y, z = _quat(q)
    return np.array([w, -x, -y, -z])


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    """Unit quaternion rotating by ``angle`` radians about a unit ``axis``."""
    ax = _vec3(axis, "axis")
    if abs(np.linalg.norm(ax) - 1.0) > _UNIT_TOL:
        raise ValueError(f"axis must be unit length, |axis|={np.linalg.norm(ax):.12g}")
    half = 0.5 * float(angle)
    return np.concatenate([[np.cos(half)], np.sin(half) * ax])


def quat_from_rotvec(rotvec) -> np.ndarray:
    """Unit quaternion from an axis-angle 3-vector (angle = vector norm)."""
    rv = _vec3(rotvec, "rotation vector")
    angle = np.linalg.norm(rv)
    if angle < 1e-12:
        # first-order expansion, exact enough at this magnitude
        return quat_normalize(np.concatenate([[1.0], 0.5 * rv]))
    return np.concatenate([[np.cos(0.5 * angle)], np.sin(0.5 * angle) * rv / angle])


def quat_rotate(q, v) -> np.ndarray:
    """Rotate vector(s) by quaternion q; accepts (3,) or (N, 3)."""
    return np.asarray(v, dtype=float) @ quat_to_matrix(q).T


def quat_to_matrix(q) -> np.ndarray:
    """3x3 rotation matrix of a unit quaternion."""
    w, x, y, z = quat_normalize(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_matrix(rot) -> np.ndarray:
    """Unit quaternion (w >= 0) of a proper rotation matrix.

    Uses Shepperd's branching on the largest diagonal combination, which is
    numerically stable for all rotation angles.
    """
    m = np.asarray(rot, dtype=float)
    if m.shape != (3, 3):
        raise ValueError("rotation matrix must be 3x3")
    t = np.trace(m)
    candidates = [t, m[0, 0], m[1, 1], m[2, 2]]
    case = int(np.argmax(candidates))
    if case == 0:
        r = np.sqrt(1.0 + t)
        s = 0.5 / r
        q = np.array(
            [0.5 * r, (m[2, 1] - m[1, 2]) * s, (m[0, 2] - m[2, 0]) * s, (m[1, 0] - m[0, 1]) * s]
        )
    else:
        i = case - 1
        j, k = (i + 1) % 3, (i + 2) % 3
        r = np.sqrt(1.0 + m[i, i] - m[j, j] - m[k, k])
        s = 0.5 / r
        q = np.empty(4)
        q[0] = (m[k, j] - m[j, k]) * s
        q[1 + i] = 0.5 * r
        q[1 + j] = (m[j, i] + m[i, j]) * s
        q[1 + k] = (m[k, i] + m[i, k]) * s
    if q[0] < 0:
        q = -q
    return quat_normalize(q)


def rotation_angle(q) -> float:
    """Geodesic rotation angle of a unit quaternion, in [0, pi]."""
    w, x, y, z = quat_normalize(q)
    return 2.0 * np.arctan2(np.linalg.norm([x, y, z]), abs(w))


@dataclass(frozen=True)
class Pose:
    """Rigid target pose: body origin position and body-to-camera attitude.

    The attitude quaternion is normalized on construction, so the unit-norm
    invariant holds for every Pose the package ever hands out.
    """

    position: np.ndarray
    attitude: np.ndarray

    def __post_init__(self):
        pos = _vec3(self.position, "position")
        att = quat_normalize(self.attitude)
        pos.setflags(write=False)
        att.setflags(write=False)
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "attitude", att)

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.attitude)

    def transform(self, points) -> np.ndarray:
        """Map body-frame point(s) into the camera frame."""
        return quat_rotate(self.attitude, points) + self.position


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole camera: focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if not (0 < self.cx < self.width) or not (0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    def matrix(self) -> np.ndarray:
        """3x3 intrinsic matrix K."""
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


# Test/example preset at the 1920x1200 sensor scale. Real deployments load
# calibrated intrinsics from config; this one only anchors tests and demos.
DEFAULT_CAMERA = CameraIntrinsics(
    fx=3000.0, fy=3000.0, cx=960.0, cy=600.0, width=1920, height=1200
)


@dataclass(frozen=True)
class WireframeModel:
    """Ordered 3-D keypoints of the target in its body frame.

    The keypoint order is part of the contract: landmark vectors, manifest
    labels, and 2D-3D correspondences all index into it.
    """

    name: str
    keypoints: np.ndarray

    def __post_init__(self):
        pts = np.array(self.keypoints, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError("keypoints must have shape (K, 3)")
        if pts.shape[0] < 4:
            raise ValueError(f"need at least 4 keypoints, got {pts.shape[0]}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("keypoints must be finite")
        centered = pts - pts.mean(axis=0)
        lam = np.linalg.eigvalsh(centered.T @ centered / pts.shape[0])
        if lam[2] <= 0 or lam[1] <= 1e-10 * lam[2]:
            raise DegenerateGeometryError(
                "wireframe keypoints are collinear; pose solving is degenerate"
            )
        pts.setflags(write=False)
        object.__setattr__(self, "keypoints", pts)

    @property
    def count(self) -> int:
        return int(self.keypoints.shape[0])


def example_wireframe() -> WireframeModel:
    """Satellite-like 11-point test model: body box, antenna tip, panel tips."""
    keypoints = [
        [-0.75, -0.55, -0.90],
        [0.75, -0.55, -0.90],
        [0.75, 0.55, -0.90],
        [-0.75, 0.55, -0.90],
        [-0.75, -0.55, 0.90],
        [0.75, -0.55, 0.90],
        [0.75, 0.55, 0.90],
        [-0.75, 0.55, 0.90],
        [0.0, 0.0, 1.80],
        [0.0, -3.20, 0.25],
        [0.0, 3.20, 0.25],
    ]
    return WireframeModel(name="example-satellite", keypoints=keypoints)


def load_wireframe(path) -> WireframeModel:
    """Read a wireframe JSON file: {"name": str, "keypoints": [[x,y,z], ...]}."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or "keypoints" not in data:
        raise ValueError(f"{path}: wireframe file needs a 'keypoints' field")
    return WireframeModel(
        name=str(data.get("name", Path(path).stem)), keypoints=data["keypoints"]
    )


def save_wireframe(model: WireframeModel, path) -> None:
    payload = {"name": model.name, "keypoints": model.keypoints.tolist()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def project(pose: Pose, cam: CameraIntrinsics, points) -> np.ndarray:
    """Pinhole-project body-frame point(s) to pixel coordinates.

    Accepts (3,) or (N, 3); returns (2,) or (N, 2). Points may land outside
    the image bounds. Raises :class:`BehindCameraError` naming the first point
    whose camera-frame depth is not positive.
    """
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    cam_pts = pose.transform(pts)
    z = cam_pts[:, 2]
    bad = np.nonzero(z <= MIN_PROJECTION_DEPTH)[0]
    if bad.size:
        raise BehindCameraError(int(bad[0]), float(z[bad[0]]))
    uv = np.column_stack(
        [
            cam.fx * cam_pts[:, 0] / z + cam.cx,
            cam.fy * cam_pts[:, 1] / z + cam.cy,
        ]
    )
    return uv[0] if single else uv


def bbox_from_points(points, cam: CameraIntrinsics) -> BBox:
    """Tightest box around pixel points, intersected with the image bounds.

    Degenerate (zero-area) boxes are allowed; a box entirely outside the
    image raises :class:`OutOfFrameError`.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise ValueError("need at least one point")
    if pts.shape[1] != 2:
        raise ValueError("points must have shape (N, 2)")
    xmin, ymin = pts.min(axis=0)
    xmax, ymax = pts.max(axis=0)
    if xmax < 0 or ymax < 0 or xmin > cam.width or ymin > cam.height:
        raise OutOfFrameError(
            f"box ({xmin:.1f}, {ymin:.1f})-({xmax:.1f}, {ymax:.1f}) "
            f"lies outside the {cam.width}x{cam.height} image"
        )
    return BBox(
        max(xmin, 0.0),
        max(ymin, 0.0),
        min(xmax, float(cam.width)),
        min(ymax, float(cam.height)),
    )


def normalize_landmarks(points, roi: BBox) -> np.ndarray:
    """Map pixel landmarks into ROI-relative coordinates in [0, 1] per axis.

    This is the output contract of the landmark-regression stage: each point
    becomes ((u - xmin)/width, (v - ymin)/height), order preserved.
    """
    if roi.width <= 0 or roi.height <= 0:
        raise ValueError("ROI must have positive width and height")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    origin = np.array([roi.xmin, roi.ymin])
    scale = np.array([roi.width, roi.height])
    return (pts - origin) / scale


def denormalize_landmarks(normalized, roi: BBox) -> np.ndarray:
    """Exact inverse of :func:`normalize_landmarks`."""
    if roi.width <= 0 or roi.height <= 0:
        raise ValueError("ROI must have positive width and height")
    pts = np.atleast_2d(np.asarray(normalized, dtype=float))
    origin = np.array([roi.xmin, roi.ymin])
    scale = np.array([roi.width, roi.height])
    return pts * scale + origin
