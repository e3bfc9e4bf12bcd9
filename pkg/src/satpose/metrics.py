"""Pose-error scoring and statistical aggregation.

The per-image score is the sum of the normalized position error and the
quaternion geodesic error in radians; the dataset-level figure ``E`` is the
mean of per-image scores. Attitude errors are kept in radians internally and
converted to degrees only for display fields.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Pose, _quat, _vec3
from .roi import BBox, RoiConfig, contains, iou, make_roi

_UNIT_INPUT_TOL = 1e-6


@dataclass(frozen=True)
class ImageScore:
    """Errors of one estimated pose against ground truth."""

    e_t: float  # metres
    e_t_normalized: float  # e_t / |t_gt|
    e_q: float  # radians, in [0, pi]

    def __post_init__(self):
        if self.e_t < 0 or self.e_t_normalized < 0:
            raise ValueError("position errors must be non-negative")
        if not 0.0 <= self.e_q <= np.pi + 1e-12:
            raise ValueError(f"e_q must lie in [0, pi], got {self.e_q}")

    @property
    def score(self) -> float:
        """Per-image contribution to E: normalized position + attitude error."""
        return self.e_t_normalized + self.e_q


@dataclass(frozen=True)
class MetricStats:
    mean: float
    std: float
    median: float


@dataclass(frozen=True)
class AggregateReport:
    """Dataset-level statistics in the mean +/- std reporting style."""

    n: int
    e_t_m: MetricStats
    e_t_norm: MetricStats
    e_q_rad: MetricStats
    e_q_deg: MetricStats
    score: MetricStats

    @property
    def e(self) -> float:
        """Dataset pose error E = mean per-image score."""
        return self.score.mean


@dataclass(frozen=True)
class DetectionMetrics:
    """Detector quality: raw IoU statistics plus ROI containment accuracy."""

    iou_mean: float
    iou_median: float
    roi_accuracy: float  # percentage in [0, 100]


def position_error(t_gt, t_est) -> tuple[float, float]:
    """Euclidean position error and its value normalized by |t_gt|."""
    gt = _vec3(t_gt, "t_gt")
    est = _vec3(t_est, "t_est")
    gt_norm = np.linalg.norm(gt)
    if gt_norm <= 0:
        raise ValueError("ground-truth position has zero norm")
    e_t = float(np.linalg.norm(gt - est))
    return e_t, e_t / gt_norm


def attitude_error(q_gt, q_est) -> float:
    """Geodesic attitude error 2*arccos(|<q_gt, q_est>|), in [0, pi].

    Invariant under the quaternion double cover (q and -q score alike).
    Inner products within 1e-12 of 1 count as a perfect match: it keeps the
    double-cover identity exactly zero, and below that band the arccos form
    has no resolution left anyway (its slope diverges at 1).
    """
    gt = _quat(q_gt, "q_gt")
    est = _quat(q_est, "q_est")
    for name, q in (("q_gt", gt), ("q_est", est)):
        if abs(np.linalg.norm(q) - 1.0) > _UNIT_INPUT_TOL:
            raise ValueError(f"{name} must be unit norm, |q|={np.linalg.norm(q):.9g}")
    dot = abs(float(np.dot(gt, est)))
    if dot >= 1.0 - 1e-12:
        return 0.0
    return 2.0 * np.arccos(dot)


def image_score(gt: Pose, est: Pose) -> ImageScore:
    """Score one estimate against ground truth."""
    e_t, e_t_norm = position_error(gt.position, est.position)
    e_q = attitude_error(gt.attitude, est.attitude)
    return ImageScore(e_t=e_t, e_t_normalized=e_t_norm, e_q=e_q)


def _stats(values: np.ndarray) -> MetricStats:
    # constant lists get exact (v, 0, v); summation rounding must not leak in
    if values.size == 1 or np.all(values == values[0]):
        v = float(values[0])
        return MetricStats(mean=v, std=0.0, median=v)
    # sample (N-1) standard deviation for the "mean +/- std" columns
    return MetricStats(
        mean=float(values.mean()),
        std=float(values.std(ddof=1)),
        median=float(np.median(values)),
    )


def aggregate(scores) -> AggregateReport:
    """Mean / sample-std / median per metric over per-image scores."""
    scores = list(scores)
    if not scores:
        raise ValueError("cannot aggregate an empty score list")
    e_t = np.array([s.e_t for s in scores])
    e_t_norm = np.array([s.e_t_normalized for s in scores])
    e_q = np.array([s.e_q for s in scores])
    total = np.array([s.score for s in scores])
    return AggregateReport(
        n=len(scores),
        e_t_m=_stats(e_t),
        e_t_norm=_stats(e_t_norm),
        e_q_rad=_stats(e_q),
        e_q_deg=_stats(np.degrees(e_q)),
        score=_stats(total),
    )


def detection_metrics(
    pred: list[BBox], gt: list[BBox], roi_cfg: RoiConfig
) -> DetectionMetrics:
    """IoU statistics of raw predictions plus ROI containment accuracy.

    ROI accuracy is the percentage of pairs where the ground-truth box is
    contained in the squared-and-enlarged crop built from the prediction.
    """
    if len(pred) != len(gt):
        raise ValueError(f"length mismatch: {len(pred)} predictions vs {len(gt)} truths")
    if not pred:
        raise ValueError("need at least one box pair")
    ious = np.array([iou(p, g) for p, g in zip(pred, gt)])
    contained = np.array([contains(make_roi(p, roi_cfg), g) for p, g in zip(pred, gt)])
    return DetectionMetrics(
        iou_mean=float(ious.mean()),
        iou_median=float(np.median(ious)),
        roi_accuracy=100.0 * float(contained.mean()),
    )
