"""End-to-end orchestration: labels, landmark providers, pipeline, reports.

The pipeline mirrors the three-stage structure of the estimator it harnesses:
detection geometry (ROI from a bounding box), landmark regression (delegated
to a pluggable provider returning ROI-normalized coordinates), and pose
solving (RANSAC-wrapped EPnP plus LM refinement). A noise-model provider
stands in for the regression network so the geometric stages can be driven
and measured without any learned components.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, replace

import numpy as np

from .errors import ManifestError, SatposeError
from .geometry import (
    CameraIntrinsics,
    WireframeModel,
    bbox_from_points,
    denormalize_landmarks,
    normalize_landmarks,
    project,
)
from .manifest import Manifest, SampleRecord
from .metrics import AggregateReport, ImageScore, aggregate, image_score
from .pnp import Correspondence, LMConfig, RansacConfig, lm_refine, ransac_pnp
from .rng import derive_seed, stream
from .roi import BBox, RoiConfig, make_roi


@dataclass(frozen=True)
class NoiseModel:
    """Synthetic landmark corruption standing in for a regression network.

    Per landmark, independently: with ``dropout_rate`` the point is dropped;
    otherwise with ``outlier_rate`` it is replaced by a uniform draw over the
    ground-truth box; otherwise it gets isotropic Gaussian pixel noise.
    Draws are keyed by (seed, record id), so corruption is reproducible per
    record regardless of processing order, and the outlier/dropout pattern
    does not change when only ``sigma_px`` does.
    """

    sigma_px: float = 0.0
    outlier_rate: float = 0.0
    dropout_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_px < 0:
            raise ValueError("sigma_px must be >= 0")
        for name in ("outlier_rate", "dropout_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


@dataclass(frozen=True)
class TimingReport:
    """Per-stage wall time; fps excludes manifest loading by construction."""

    detection_ms: float
    landmarks_ms: float
    pnp_ms: float
    total_s: float
    n: int

    @property
    def fps(self) -> float:
        return self.n / self.total_s if self.total_s > 0 else float("inf")


@dataclass
class PipelineRun:
    """Everything one pipeline pass produced."""

    scores: list[ImageScore]
    scored_ids: list[str]
    failures: list[tuple[str, str]]  # (record id, reason)
    report: AggregateReport
    timing: TimingReport
    predicted: Manifest | None = None  # provider outputs written back, if requested


@dataclass
class LabelReject:
    record_id: str
    reason: str


def generate_labels(
    manifest: Manifest,
    wireframe: WireframeModel,
    cam: CameraIntrinsics | None = None,
) -> tuple[Manifest, list[LabelReject]]:
    """Derive ground-truth landmark pixels and bounding boxes from poses.

    Records whose pose projects behind the camera or fully out of frame are
    collected as rejects; the run continues with the rest.
    """
    cam = cam or manifest.camera
    labeled: list[SampleRecord] = []
    rejects: list[LabelReject] = []
    for record in manifest.records:
        try:
            landmarks = project(record.pose_gt, cam, wireframe.keypoints)
            bbox = bbox_from_points(landmarks, cam)
        except SatposeError as exc:
            rejects.append(LabelReject(record_id=record.id, reason=str(exc)))
            continue
        labeled.append(replace(record, landmarks_gt=landmarks, bbox_gt=bbox))
    return (
        Manifest(camera=cam, records=labeled, wireframe=manifest.wireframe),
        rejects,
    )


def oracle_landmarks(record: SampleRecord, noise: NoiseModel) -> list[np.ndarray | None]:
    """Corrupted copies of a record's ground-truth landmark pixels.

    Every landmark consumes the same number of draws whatever its fate, so
    changing ``sigma_px`` alone never changes which points are outliers or
    dropped.
    """
    if record.landmarks_gt is None:
        raise ValueError(f"record {record.id!r} has no ground-truth landmarks")
    if record.bbox_gt is None:
        raise ValueError(f"record {record.id!r} has no ground-truth bounding box")
    rng = stream(noise.seed, "oracle", record.id)
    box = record.bbox_gt
    out: list[np.ndarray | None] = []
    for point in np.asarray(record.landmarks_gt):
        u_drop, u_out = rng.random(2)
        gauss = rng.normal(0.0, 1.0, size=2)
        uniform = rng.random(2)
        if u_drop < noise.dropout_rate:
            out.append(None)
        elif u_out < noise.outlier_rate:
            out.append(
                np.array(
                    [
                        box.xmin + uniform[0] * box.width,
                        box.ymin + uniform[1] * box.height,
                    ]
                )
            )
        else:
            out.append(point + noise.sigma_px * gauss)
    return out


class OracleProvider:
    """Landmark provider backed by :func:`oracle_landmarks`."""

    name = "oracle"

    def __init__(self, noise: NoiseModel):
        self.noise = noise

    def landmarks(self, record: SampleRecord, roi: BBox) -> list[np.ndarray | None]:
        pixels = oracle_landmarks(record, self.noise)
        return [
            None if p is None else normalize_landmarks(p, roi)[0] for p in pixels
        ]


class FileProvider:
    """Landmark provider reading ``pred_landmarks`` already in the manifest."""

    name = "file"

    def landmarks(self, record: SampleRecord, roi: BBox) -> list[np.ndarray | None]:
        if record.landmarks_pred is None:
            raise ManifestError(f"record {record.id!r} has no pred_landmarks")
        return record.landmarks_pred


def _solve_record(
    record: SampleRecord,
    provider,
    wireframe: WireframeModel,
    cam: CameraIntrinsics,
    roi_cfg: RoiConfig,
    ransac_cfg: RansacConfig,
    lm_cfg: LMConfig,
    stage_ms: dict,
) -> tuple[ImageScore, list[np.ndarray | None]]:
    t0 = time.perf_counter()
    detected = record.bbox_pred if record.bbox_pred is not None else record.bbox_gt
    if detected is None:
        raise ManifestError(f"record {record.id!r} has no bounding box")
    roi = make_roi(detected, roi_cfg)
    t1 = time.perf_counter()

    normalized = provider.landmarks(record, roi)
    if len(normalized) != wireframe.count:
        raise ManifestError(
            f"record {record.id!r}: provider returned {len(normalized)} landmarks, "
            f"wireframe has {wireframe.count}"
        )
    correspondences = []
    for k, norm_pt in enumerate(normalized):
        if norm_pt is None:
            continue
        pixel = denormalize_landmarks(norm_pt, roi)[0]
        correspondences.append(
            Correspondence(image=pixel, world=wireframe.keypoints[k], id=k)
        )
    t2 = time.perf_counter()

    if len(correspondences) < ransac_cfg.min_sample:
        raise ManifestError(
            f"record {record.id!r}: only {len(correspondences)} usable landmarks, "
            f"RANSAC needs {ransac_cfg.min_sample}"
        )
    record_cfg = replace(ransac_cfg, seed=derive_seed(ransac_cfg.seed, record.id))
    result = ransac_pnp(correspondences, cam, record_cfg)
    inliers = [c for c, keep in zip(correspondences, result.inlier_mask) if keep]
    refined = lm_refine(result.pose, inliers, cam, lm_cfg)
    t3 = time.perf_counter()

    stage_ms["detection"] += 1e3 * (t1 - t0)
    stage_ms["landmarks"] += 1e3 * (t2 - t1)
    stage_ms["pnp"] += 1e3 * (t3 - t2)
    return image_score(record.pose_gt, refined), normalized


def run_pipeline(
    manifest: Manifest,
    provider,
    wireframe: WireframeModel,
    roi_cfg: RoiConfig | None = None,
    ransac_cfg: RansacConfig | None = None,
    lm_cfg: LMConfig | None = None,
    cam: CameraIntrinsics | None = None,
    record_predictions: bool = False,
) -> PipelineRun:
    """Score every record: ROI -> provider landmarks -> RANSAC EPnP -> LM.

    Per-record solver failures become failure entries and are excluded from
    the aggregate; scored + failed always equals the manifest size. With
    ``record_predictions`` the provider outputs are written back into a copy
    of the manifest, which a :class:`FileProvider` rerun reproduces exactly.
    """
    if not manifest.records:
        raise ValueError("manifest has no records")
    cam = cam or manifest.camera
    roi_cfg = roi_cfg or RoiConfig(image_width=cam.width, image_height=cam.height)
    ransac_cfg = ransac_cfg or RansacConfig()
    lm_cfg = lm_cfg or LMConfig()

    scores: list[ImageScore] = []
    scored_ids: list[str] = []
    failures: list[tuple[str, str]] = []
    predicted_records: list[SampleRecord] = []
    stage_ms = {"detection": 0.0, "landmarks": 0.0, "pnp": 0.0}

    start = time.perf_counter()
    for record in manifest.records:
        try:
            score, normalized = _solve_record(
                record, provider, wireframe, cam, roi_cfg, ransac_cfg, lm_cfg, stage_ms
            )
        except (SatposeError, ValueError) as exc:
            failures.append((record.id, str(exc)))
            if record_predictions:
                predicted_records.append(replace(record))
            continue
        scores.append(score)
        scored_ids.append(record.id)
        if record_predictions:
            predicted_records.append(replace(record, landmarks_pred=normalized))
    total_s = time.perf_counter() - start

    if not scores:
        raise ValueError(
            f"no record could be scored ({len(failures)} failures); "
            f"first: {failures[0][1] if failures else 'n/a'}"
        )
    timing = TimingReport(
        detection_ms=stage_ms["detection"],
        landmarks_ms=stage_ms["landmarks"],
        pnp_ms=stage_ms["pnp"],
        total_s=total_s,
        n=len(manifest.records),
    )
    predicted = None
    if record_predictions:
        predicted = Manifest(
            camera=cam, records=predicted_records, wireframe=manifest.wireframe
        )
    return PipelineRun(
        scores=scores,
        scored_ids=scored_ids,
        failures=failures,
        report=aggregate(scores),
        timing=timing,
        predicted=predicted,
    )


def report_payload(
    report: AggregateReport,
    failures: int = 0,
    timing: TimingReport | None = None,
) -> dict:
    """Flat metric dictionary shared by the JSON and CSV emitters.

    Attitude columns are degrees, position columns metres; timing fields are
    only present when a timing report is supplied (wall time is not seeded,
    so deterministic reports must omit it).
    """
    payload = {
        "n": report.n,
        "failures": failures,
        "E": report.e,
        "e_t_m_mean": report.e_t_m.mean,
        "e_t_m_std": report.e_t_m.std,
        "e_t_m_median": report.e_t_m.median,
        "e_t_norm_mean": report.e_t_norm.mean,
        "e_t_norm_std": report.e_t_norm.std,
        "e_t_norm_median": report.e_t_norm.median,
        "e_q_deg_mean": report.e_q_deg.mean,
        "e_q_deg_std": report.e_q_deg.std,
        "e_q_deg_median": report.e_q_deg.median,
    }
    if timing is not None:
        payload.update(
            {
                "fps": timing.fps,
                "detection_ms": timing.detection_ms,
                "landmarks_ms": timing.landmarks_ms,
                "pnp_ms": timing.pnp_ms,
            }
        )
    return payload


def emit_report(
    report: AggregateReport,
    fmt: str,
    path,
    failures: int = 0,
    timing: TimingReport | None = None,
) -> None:
    """Write the aggregate as JSON or a one-row CSV with identical values."""
    if fmt not in ("json", "csv"):
        raise ValueError(f"format must be 'json' or 'csv', got {fmt!r}")
    payload = report_payload(report, failures=failures, timing=timing)
    if fmt == "json":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")
    else:
        write_csv_reports([payload], path)


def write_csv_reports(payloads: list[dict], path) -> None:
    """CSV with one row per run; cells use repr so values match the JSON."""
    if not payloads:
        raise ValueError("no report payloads to write")
    columns: list[str] = []
    for payload in payloads:
        for key in payload:
            if key not in columns:
                columns.append(key)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for payload in payloads:
            writer.writerow([repr(payload[c]) if c in payload else "" for c in columns])
