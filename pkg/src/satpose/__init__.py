"""satpose: monocular satellite pose estimation, minus the neural networks.

Pinhole geometry and label derivation, ROI box rules, EPnP + RANSAC + LM pose
solving, multiview triangulation, SO(3)-uniform pose sampling, scoring, and a
dataset/pipeline harness with a CLI.
"""

from .errors import (
    BehindCameraError,
    ConsensusFailureError,
    DegenerateBaselineError,
    DegenerateGeometryError,
    ManifestError,
    NoValidPoseError,
    NumericalFailureError,
    OutOfFrameError,
    SamplingFailureError,
    SatposeError,
    UndefinedTrackingError,
)
from .geometry import (
    DEFAULT_CAMERA,
    CameraIntrinsics,
    Pose,
    WireframeModel,
    bbox_from_points,
    denormalize_landmarks,
    example_wireframe,
    load_wireframe,
    normalize_landmarks,
    project,
    quat_from_axis_angle,
    quat_multiply,
    quat_rotate,
    rotation_angle,
    save_wireframe,
)
from .manifest import Manifest, SampleRecord, load_manifest, save_manifest, split_dataset
from .metrics import (
    AggregateReport,
    DetectionMetrics,
    ImageScore,
    aggregate,
    attitude_error,
    detection_metrics,
    image_score,
    position_error,
)
from .pipeline import (
    FileProvider,
    NoiseModel,
    OracleProvider,
    TimingReport,
    emit_report,
    generate_labels,
    oracle_landmarks,
    run_pipeline,
)
from .pnp import (
    Correspondence,
    LMConfig,
    PnPResult,
    RansacConfig,
    epnp,
    lm_refine,
    ransac_pnp,
    reprojection_residuals,
    triangulate,
)
from .roi import BBox, RoiConfig, contains, iou, make_roi, roi_transform
from .sampler import (
    PanelConfig,
    PoseSamplerConfig,
    SampleStreams,
    SceneGeometry,
    lighting_feasible,
    panel_track_angle,
    sample_attitude,
    sample_attitudes,
    sample_distance,
    sample_distances,
    sample_pose,
)

__version__ = "0.1.0"
