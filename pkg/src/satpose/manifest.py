"""Dataset manifest I/O and train/test splitting.

A manifest is one JSON document holding the camera, an optional wireframe
file reference, and per-image records::

    {
      "camera": {"fx": ..., "fy": ..., "cx": ..., "cy": ..., "width": ..., "height": ...},
      "wireframe": "wireframe.json",
      "attitude_convention": "body_to_camera",
      "records": [
        {"id": "img000001", "q": [w, x, y, z], "t": [x, y, z],
         "bbox": [xmin, ymin, xmax, ymax],
         "landmarks": [[u, v], ...],
         "pred_bbox": [...],                # optional, detector output
         "pred_landmarks": [[nu, nv], ...]} # optional, ROI-normalized, null = dropped
      ]
    }

``q`` is scalar-first. The convention flag says whether stored quaternions
rotate body-frame vectors into the camera frame (``body_to_camera``, the
package-internal convention) or the inverse; ``camera_to_body`` inputs are
conjugated on load, and saving always writes ``body_to_camera``.

Predicted landmarks are exchanged in ROI-normalized coordinates — the output
contract of the landmark-regression stage — so files written by a real
regression network drop straight in.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ManifestError
from .geometry import CameraIntrinsics, Pose
from .rng import stream
from .roi import BBox

_QUAT_NORM_WARN = 1e-6

CONVENTIONS = ("body_to_camera", "camera_to_body")


class ManifestWarning(UserWarning):
    """Recoverable manifest irregularities (e.g. quaternions renormalized)."""


@dataclass
class SampleRecord:
    """One dataset entry: ground-truth pose plus derived and predicted labels.

    ``landmarks_pred`` entries are ROI-normalized (nu, nv) pairs; ``None``
    marks a landmark the provider dropped.
    """

    id: str
    pose_gt: Pose
    bbox_gt: BBox | None = None
    landmarks_gt: np.ndarray | None = None  # (K, 2) pixels
    landmarks_pred: list[np.ndarray | None] | None = None
    bbox_pred: BBox | None = None


@dataclass
class Manifest:
    camera: CameraIntrinsics
    records: list[SampleRecord]
    wireframe: str | None = None

    def __post_init__(self):
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            raise ManifestError("record ids must be unique within a manifest")


def _field(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ManifestError(f"{where}: missing field '{key}'")
    return mapping[key]


def _parse_camera(data: dict) -> CameraIntrinsics:
    try:
        return CameraIntrinsics(
            fx=float(_field(data, "fx", "camera")),
            fy=float(_field(data, "fy", "camera")),
            cx=float(_field(data, "cx", "camera")),
            cy=float(_field(data, "cy", "camera")),
            width=int(_field(data, "width", "camera")),
            height=int(_field(data, "height", "camera")),
        )
    except (TypeError, ValueError) as exc:
        raise ManifestError(f"camera: {exc}") from exc


def _parse_vector(raw, length: int, where: str) -> np.ndarray:
    try:
        vec = np.array(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ManifestError(f"{where}: not numeric") from exc
    if vec.shape != (length,):
        raise ManifestError(f"{where}: expected {length} values, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise ManifestError(f"{where}: values must be finite")
    return vec


def _parse_quaternion(raw, where: str, convention: str) -> np.ndarray:
    q = _parse_vector(raw, 4, where)
    norm = np.linalg.norm(q)
    if norm < 1e-12:
        raise ManifestError(f"{where}: zero-norm quaternion")
    if abs(norm - 1.0) > _QUAT_NORM_WARN:
        warnings.warn(
            f"{where}: quaternion norm deviates by {abs(norm - 1.0):.3g}; renormalizing",
            ManifestWarning,
            stacklevel=3,
        )
    if abs(norm - 1.0) > 1e-12:  # keep stored unit values bit-stable
        q = q / norm
    if convention == "camera_to_body":
        q = np.array([q[0], -q[1], -q[2], -q[3]])
    return q


def _parse_bbox(raw, where: str) -> BBox:
    vec = _parse_vector(raw, 4, where)
    try:
        return BBox.from_list(vec.tolist())
    except ValueError as exc:
        raise ManifestError(f"{where}: {exc}") from exc


def _parse_landmarks(raw, where: str) -> np.ndarray:
    try:
        pts = np.array(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ManifestError(f"{where}: not numeric") from exc
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ManifestError(f"{where}: expected an (K, 2) array")
    if not np.all(np.isfinite(pts)):
        raise ManifestError(f"{where}: values must be finite")
    return pts


def _parse_pred_landmarks(raw, where: str) -> list[np.ndarray | None]:
    if not isinstance(raw, list):
        raise ManifestError(f"{where}: expected a list")
    out: list[np.ndarray | None] = []
    for k, entry in enumerate(raw):
        if entry is None:
            out.append(None)
        else:
            out.append(_parse_vector(entry, 2, f"{where}[{k}]"))
    return out


def _parse_record(data: dict, index: int, convention: str) -> SampleRecord:
    where = f"records[{index}]"
    if not isinstance(data, dict):
        raise ManifestError(f"{where}: expected an object")
    rec_id = _field(data, "id", where)
    q = _parse_quaternion(_field(data, "q", where), f"{where}: field 'q'", convention)
    t = _parse_vector(_field(data, "t", where), 3, f"{where}: field 't'")
    record = SampleRecord(id=str(rec_id), pose_gt=Pose(position=t, attitude=q))
    if data.get("bbox") is not None:
        record.bbox_gt = _parse_bbox(data["bbox"], f"{where}: field 'bbox'")
    if data.get("landmarks") is not None:
        record.landmarks_gt = _parse_landmarks(data["landmarks"], f"{where}: field 'landmarks'")
    if data.get("pred_bbox") is not None:
        record.bbox_pred = _parse_bbox(data["pred_bbox"], f"{where}: field 'pred_bbox'")
    if data.get("pred_landmarks") is not None:
        record.landmarks_pred = _parse_pred_landmarks(
            data["pred_landmarks"], f"{where}: field 'pred_landmarks'"
        )
    return record


def load_manifest(path) -> Manifest:
    """Parse and validate a manifest file; raises :class:`ManifestError`."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ManifestError(f"{path}: top level must be an object")
    convention = data.get("attitude_convention", "body_to_camera")
    if convention not in CONVENTIONS:
        raise ManifestError(
            f"attitude_convention must be one of {CONVENTIONS}, got {convention!r}"
        )
    camera = _parse_camera(_field(data, "camera", "manifest"))
    raw_records = _field(data, "records", "manifest")
    if not isinstance(raw_records, list):
        raise ManifestError("records: expected a list")
    records = [_parse_record(r, i, convention) for i, r in enumerate(raw_records)]
    wireframe = data.get("wireframe")
    return Manifest(camera=camera, records=records, wireframe=wireframe)


def _record_payload(record: SampleRecord) -> dict:
    payload: dict = {
        "id": record.id,
        "q": record.pose_gt.attitude.tolist(),
        "t": record.pose_gt.position.tolist(),
    }
    if record.bbox_gt is not None:
        payload["bbox"] = record.bbox_gt.as_list()
    if record.landmarks_gt is not None:
        payload["landmarks"] = np.asarray(record.landmarks_gt).tolist()
    if record.bbox_pred is not None:
        payload["pred_bbox"] = record.bbox_pred.as_list()
    if record.landmarks_pred is not None:
        payload["pred_landmarks"] = [
            None if p is None else np.asarray(p).tolist() for p in record.landmarks_pred
        ]
    return payload


def save_manifest(manifest: Manifest, path) -> None:
    """Write a manifest; floats keep full round-trip precision."""
    payload = {
        "camera": {
            "fx": manifest.camera.fx,
            "fy": manifest.camera.fy,
            "cx": manifest.camera.cx,
            "cy": manifest.camera.cy,
            "width": manifest.camera.width,
            "height": manifest.camera.height,
        },
        "wireframe": manifest.wireframe,
        "attitude_convention": "body_to_camera",
        "records": [_record_payload(r) for r in manifest.records],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def split_dataset(
    manifest: Manifest, train_fraction: float, seed: int
) -> tuple[Manifest, Manifest]:
    """Seeded uniform partition into floor(N * fraction) train + remainder test.

    Membership is random; record order within each side follows the input.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    n = len(manifest.records)
    n_train = int(np.floor(n * train_fraction))
    rng = stream(seed, "split")
    train_idx = set(rng.choice(n, size=n_train, replace=False).tolist())
    train = [r for i, r in enumerate(manifest.records) if i in train_idx]
    test = [r for i, r in enumerate(manifest.records) if i not in train_idx]
    make = lambda recs: Manifest(  # noqa: E731
        camera=manifest.camera, records=recs, wireframe=manifest.wireframe
    )
    return make(train), make(test)
