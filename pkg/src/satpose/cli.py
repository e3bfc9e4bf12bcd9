"""Command-line interface.

Subcommands::

    sample-poses     draw random target poses into a manifest
    generate-labels  project wireframe keypoints into bbox + landmark labels
    split            seeded train/test partition of a manifest
    run              full pipeline: ROI -> landmarks -> RANSAC EPnP -> LM -> report
    triangulate      rebuild a wireframe from labeled views
    report           merge report JSON files into one table

Common flags (``--seed``, ``--config``, ``--out``, ``--format``,
``--max-failure-rate``) fall back to ``SATPOSE_``-prefixed environment
variables when not given. Exit codes: 0 success, 2 schema error, 3 solver
failure rate above the limit, 4 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from .errors import ManifestError, SatposeError
from .geometry import (
    DEFAULT_CAMERA,
    CameraIntrinsics,
    WireframeModel,
    example_wireframe,
    load_wireframe,
    save_wireframe,
)
from .manifest import Manifest, SampleRecord, load_manifest, save_manifest, split_dataset
from .pipeline import (
    FileProvider,
    NoiseModel,
    OracleProvider,
    emit_report,
    generate_labels,
    run_pipeline,
    write_csv_reports,
)
from .pnp import LMConfig, RansacConfig, triangulate
from .roi import RoiConfig
from .sampler import (
    PanelConfig,
    PoseSamplerConfig,
    SampleStreams,
    SceneGeometry,
    sample_pose,
)

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_SOLVER = 3
EXIT_IO = 4


def _env(name: str, fallback=None):
    return os.environ.get(f"SATPOSE_{name}", fallback)


def _from_dict(cls, data: dict, where: str):
    """Instantiate a config dataclass from a JSON mapping, strictly."""
    if not isinstance(data, dict):
        raise ManifestError(f"{where}: expected an object")
    valid = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - valid)
    if unknown:
        raise ManifestError(f"{where}: unknown keys {unknown}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ManifestError(f"{where}: {exc}") from exc


class Config:
    """Optional JSON config file with one section per component."""

    def __init__(self, data: dict):
        self.data = data

    @classmethod
    def load(cls, path) -> "Config":
        if path is None:
            return cls({})
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ManifestError(f"{path}: top level must be an object")
        return cls(data)

    def camera(self) -> CameraIntrinsics:
        if "camera" not in self.data:
            return DEFAULT_CAMERA
        return _from_dict(CameraIntrinsics, self.data["camera"], "config: camera")

    def sampler(self) -> PoseSamplerConfig:
        return _from_dict(PoseSamplerConfig, self.data.get("sampler", {}), "config: sampler")

    def scene(self) -> SceneGeometry | None:
        if "scene" not in self.data:
            return None
        return _from_dict(SceneGeometry, self.data["scene"], "config: scene")

    def panel(self) -> PanelConfig | None:
        if "panel" not in self.data:
            return None
        return _from_dict(PanelConfig, self.data["panel"], "config: panel")

    def roi(self, cam: CameraIntrinsics) -> RoiConfig:
        section = dict(self.data.get("roi", {}))
        section.setdefault("image_width", cam.width)
        section.setdefault("image_height", cam.height)
        return _from_dict(RoiConfig, section, "config: roi")

    def ransac(self, seed: int | None) -> RansacConfig:
        section = dict(self.data.get("ransac", {}))
        if seed is not None:
            section["seed"] = seed
        return _from_dict(RansacConfig, section, "config: ransac")

    def lm(self) -> LMConfig:
        return _from_dict(LMConfig, self.data.get("lm", {}), "config: lm")

    def noise(self, args) -> NoiseModel:
        section = dict(self.data.get("noise", {}))
        for key, value in (
            ("sigma_px", args.sigma),
            ("outlier_rate", args.outlier_rate),
            ("dropout_rate", args.dropout_rate),
            ("seed", args.noise_seed),
        ):
            if value is not None:
                section[key] = value
        return _from_dict(NoiseModel, section, "config: noise")

    def wireframe_path(self):
        return self.data.get("wireframe")


def _resolve_wireframe(args, manifest: Manifest | None, manifest_path) -> WireframeModel:
    explicit = getattr(args, "wireframe", None)
    if explicit:
        return load_wireframe(explicit)
    if manifest is not None and manifest.wireframe:
        path = Path(manifest.wireframe)
        if not path.is_absolute() and manifest_path is not None:
            path = Path(manifest_path).parent / path
        return load_wireframe(path)
    raise ManifestError("no wireframe model: pass --wireframe or set it in the manifest")


def _cmd_sample_poses(args) -> int:
    cfg = Config.load(args.config)
    cam = cfg.camera()
    sampler_cfg = cfg.sampler()
    cfg.scene()  # validate lighting/articulation sections when present
    cfg.panel()
    out_path = Path(args.out)

    wireframe_ref = args.wireframe or cfg.wireframe_path()
    if wireframe_ref:
        wireframe = load_wireframe(wireframe_ref)
        stored_ref = str(wireframe_ref)
    else:
        wireframe = example_wireframe()
        wf_path = out_path.parent / "wireframe.json"
        save_wireframe(wireframe, wf_path)
        stored_ref = wf_path.name

    streams = SampleStreams(args.seed)
    records = [
        SampleRecord(id=f"img{i:06d}", pose_gt=sample_pose(streams, sampler_cfg, cam, wireframe))
        for i in range(args.n)
    ]
    save_manifest(Manifest(camera=cam, records=records, wireframe=stored_ref), out_path)
    print(f"wrote {args.n} poses to {out_path}")
    return EXIT_OK


def _cmd_generate_labels(args) -> int:
    manifest = load_manifest(args.manifest)
    wireframe = _resolve_wireframe(args, manifest, args.manifest)
    labeled, rejects = generate_labels(manifest, wireframe)
    save_manifest(labeled, args.out)
    print(f"labeled {len(labeled.records)} records, {len(rejects)} rejected")
    for reject in rejects:
        print(f"  reject {reject.record_id}: {reject.reason}", file=sys.stderr)
    return EXIT_OK


def _cmd_split(args) -> int:
    manifest = load_manifest(args.manifest)
    train, test = split_dataset(manifest, args.train_fraction, args.seed)
    save_manifest(train, args.out_train)
    save_manifest(test, args.out_test)
    print(f"split {len(manifest.records)} -> {len(train.records)} train / {len(test.records)} test")
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = Config.load(args.config)
    manifest = load_manifest(args.manifest)
    wireframe = _resolve_wireframe(args, manifest, args.manifest)
    cam = manifest.camera

    if args.provider == "oracle":
        provider = OracleProvider(cfg.noise(args))
    else:
        provider = FileProvider()

    run = run_pipeline(
        manifest,
        provider,
        wireframe,
        roi_cfg=cfg.roi(cam),
        ransac_cfg=cfg.ransac(args.seed),
        lm_cfg=cfg.lm(),
        record_predictions=args.dump_predictions is not None,
    )
    if args.dump_predictions is not None:
        save_manifest(run.predicted, args.dump_predictions)

    timing = None if args.no_timing else run.timing
    emit_report(run.report, args.format, args.out, failures=len(run.failures), timing=timing)

    n = len(manifest.records)
    failure_rate = len(run.failures) / n
    print(
        f"scored {len(run.scores)}/{n} records, E={run.report.e:.6g}, "
        f"failures={len(run.failures)}"
    )
    if failure_rate > args.max_failure_rate:
        print(
            f"failure rate {failure_rate:.3f} exceeds limit {args.max_failure_rate:.3f}",
            file=sys.stderr,
        )
        return EXIT_SOLVER
    return EXIT_OK


def _cmd_triangulate(args) -> int:
    manifest = load_manifest(args.manifest)
    usable = [r for r in manifest.records if r.landmarks_gt is not None]
    if len(usable) < 2:
        raise ManifestError("triangulation needs >= 2 records with landmarks")
    counts = {np.asarray(r.landmarks_gt).shape[0] for r in usable}
    if len(counts) != 1:
        raise ManifestError(f"records disagree on landmark count: {sorted(counts)}")
    k = counts.pop()
    keypoints = [
        triangulate(
            [(r.pose_gt, np.asarray(r.landmarks_gt)[idx]) for r in usable],
            manifest.camera,
        )
        for idx in range(k)
    ]
    model = WireframeModel(name=args.name, keypoints=np.array(keypoints))
    save_wireframe(model, args.out)
    print(f"triangulated {k} keypoints from {len(usable)} views into {args.out}")
    return EXIT_OK


def _cmd_report(args) -> int:
    payloads = []
    for path in args.reports:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ManifestError(f"{path}: expected a report object")
        payloads.append(data)
    if args.format == "csv":
        write_csv_reports(payloads, args.out)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payloads, fh, indent=1, sort_keys=True)
            fh.write("\n")
    print(f"merged {len(payloads)} reports into {args.out}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="satpose",
        description="Monocular satellite pose estimation harness (geometry-only).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", default=_env("CONFIG"), help="JSON config file")
        p.add_argument(
            "--out", default=_env("OUT"), required=out_required and _env("OUT") is None
        )

    p = sub.add_parser("sample-poses", help="draw random poses into a manifest")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=int(_env("SEED", 0)))
    p.add_argument("--wireframe", help="wireframe JSON (default: built-in example)")
    common(p)
    p.set_defaults(func=_cmd_sample_poses)

    p = sub.add_parser("generate-labels", help="derive bbox + landmark labels")
    p.add_argument("--manifest", required=True)
    p.add_argument("--wireframe")
    common(p)
    p.set_defaults(func=_cmd_generate_labels)

    p = sub.add_parser("split", help="seeded train/test partition")
    p.add_argument("--manifest", required=True)
    p.add_argument("--train-fraction", type=float, required=True)
    p.add_argument("--seed", type=int, default=int(_env("SEED", 0)))
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-test", required=True)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("run", help="run the full pipeline and emit a report")
    p.add_argument("--manifest", required=True)
    p.add_argument("--wireframe")
    p.add_argument("--provider", choices=["oracle", "file"], default="oracle")
    p.add_argument("--sigma", type=float, default=None, help="oracle noise sigma [px]")
    p.add_argument("--outlier-rate", type=float, default=None)
    p.add_argument("--dropout-rate", type=float, default=None)
    p.add_argument("--noise-seed", type=int, default=None)
    p.add_argument("--seed", type=int, default=int(_env("SEED", 0)), help="RANSAC seed")
    p.add_argument("--format", choices=["json", "csv"], default=_env("FORMAT", "json"))
    p.add_argument("--dump-predictions", help="write provider outputs to this manifest")
    p.add_argument(
        "--max-failure-rate",
        type=float,
        default=float(_env("MAX_FAILURE_RATE", 1.0)),
        help="exit 3 when the per-record failure rate exceeds this",
    )
    p.add_argument("--no-timing", action="store_true", help="omit fps/timing fields")
    common(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("triangulate", help="rebuild a wireframe from labeled views")
    p.add_argument("--manifest", required=True)
    p.add_argument("--name", default="triangulated")
    common(p)
    p.set_defaults(func=_cmd_triangulate)

    p = sub.add_parser("report", help="merge report JSON files")
    p.add_argument("reports", nargs="+")
    p.add_argument("--format", choices=["json", "csv"], default=_env("FORMAT", "csv"))
    common(p)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except ValueError as exc:  # malformed SATPOSE_* environment values
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    try:
        return args.func(args)
    except (ManifestError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except SatposeError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
