"""Detection-stage bounding-box geometry and overlap metrics.

Boxes live in continuous pixel coordinates (no integer snapping). The ROI
returned by :func:`make_roi` is the square crop handed to the landmark
regression stage: the detected box is squared to avoid distortion, enlarged,
expanded to a minimum side when needed, and shifted (never shrunk) back into
the image when it overhangs a border.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_SQUARE_RTOL = 1e-9


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box; corners in pixels, xmin <= xmax and ymin <= ymax."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        for name in ("xmin", "ymin", "xmax", "ymax"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise ValueError(f"BBox.{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.xmin > self.xmax or self.ymin > self.ymax:
            raise ValueError(
                f"invalid box extents ({self.xmin}, {self.ymin})-"
                f"({self.xmax}, {self.ymax})"
            )

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))

    def as_list(self) -> list[float]:
        """Serialize as [xmin, ymin, xmax, ymax] (the manifest wire order)."""
        return [self.xmin, self.ymin, self.xmax, self.ymax]

    @classmethod
    def from_list(cls, values) -> "BBox":
        if len(values) != 4:
            raise ValueError(f"box needs 4 values, got {len(values)}")
        return cls(*(float(v) for v in values))


@dataclass(frozen=True)
class RoiConfig:
    """Rules for turning a detection into the regression-stage crop.

    ``min_side`` is the input side of the regression stage: a smaller ROI is
    expanded up to it rather than upsampled. ``min_side=0`` disables the
    expansion.
    """

    image_width: float
    image_height: float
    enlargement_factor: float = 1.15
    min_side: float = 0.0

    def __post_init__(self):
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValueError("image dimensions must be positive")
        if self.enlargement_factor < 1.0:
            raise ValueError("enlargement_factor must be >= 1")
        if self.min_side < 0:
            raise ValueError("min_side must be >= 0")


def make_roi(detected: BBox, cfg: RoiConfig) -> BBox:
    """Square, enlarge, and fit the detected box into the image.

    The output square has side ``max(factor * max(w, h), min_side)``, centered
    on the detection, translated to lie inside the image; the side is clamped
    to the smaller image dimension when it cannot fit otherwise.
    """
    if detected.area <= 0:
        raise ValueError("detected box has zero area")
    if (
        detected.xmax < 0
        or detected.ymax < 0
        or detected.xmin > cfg.image_width
        or detected.ymin > cfg.image_height
    ):
        raise ValueError("detected box does not intersect the image")

    side = max(cfg.enlargement_factor * max(detected.width, detected.height), cfg.min_side)
    side = min(side, min(cfg.image_width, cfg.image_height))

    cx, cy = detected.center
    xmin = min(max(cx - side / 2.0, 0.0), cfg.image_width - side)
    ymin = min(max(cy - side / 2.0, 0.0), cfg.image_height - side)
    return BBox(xmin, ymin, xmin + side, ymin + side)


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union; 0 when disjoint or both boxes are degenerate."""
    iw = min(a.xmax, b.xmax) - max(a.xmin, b.xmin)
    ih = min(a.ymax, b.ymax) - max(a.ymin, b.ymin)
    inter = max(iw, 0.0) * max(ih, 0.0)
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def contains(outer: BBox, inner: BBox) -> bool:
    """True iff every corner of ``inner`` lies inside ``outer`` (closed bounds)."""
    return (
        outer.xmin <= inner.xmin
        and outer.ymin <= inner.ymin
        and inner.xmax <= outer.xmax
        and inner.ymax <= outer.ymax
    )


def roi_transform(
    p: np.ndarray, roi: BBox, target_side: float, direction: str
) -> np.ndarray:
    """Map pixel coordinates between the full image and the resized crop.

    ``direction="to_roi"`` sends full-image pixels into the coordinates of the
    square ROI resized to ``target_side``; ``"to_image"`` is the exact inverse.
    Accepts a single point ``(2,)`` or a batch ``(N, 2)``.
    """
    if roi.width <= 0 or roi.height <= 0:
        raise ValueError("ROI has zero area")
    if abs(roi.width - roi.height) > _SQUARE_RTOL * max(roi.width, roi.height):
        raise ValueError("ROI must be square")
    if target_side <= 0:
        raise ValueError("target_side must be positive")
    if direction not in ("to_roi", "to_image"):
        raise ValueError(f"direction must be 'to_roi' or 'to_image', got {direction!r}")

    pts = np.asarray(p, dtype=float)
    origin = np.array([roi.xmin, roi.ymin])
    scale = target_side / roi.width
    if direction == "to_roi":
        return (pts - origin) * scale
    return pts / scale + origin
