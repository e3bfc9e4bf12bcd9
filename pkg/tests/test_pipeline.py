"""Label generation, noise oracle, and end-to-end pipeline tests."""

import json

import numpy as np
import pytest

from satpose import (
    FileProvider,
    Manifest,
    NoiseModel,
    OracleProvider,
    Pose,
    RansacConfig,
    SampleRecord,
    emit_report,
    epnp,
    generate_labels,
    oracle_landmarks,
    run_pipeline,
)
from satpose.pipeline import report_payload
from satpose.pnp import Correspondence
from satpose.sampler import PoseSamplerConfig, SampleStreams, sample_pose


def sampled_manifest(cam, wireframe, n, seed=0) -> Manifest:
    streams = SampleStreams(seed)
    cfg = PoseSamplerConfig(in_frame_margin=8.0)
    records = [
        SampleRecord(id=f"img{i:06d}", pose_gt=sample_pose(streams, cfg, cam, wireframe))
        for i in range(n)
    ]
    return Manifest(camera=cam, records=records)


@pytest.fixture()
def labeled(cam, wireframe):
    manifest, rejects = generate_labels(sampled_manifest(cam, wireframe, 30, seed=5), wireframe)
    assert not rejects
    return manifest


class TestGenerateLabels:
    def test_centered_pose_bbox_centered_on_principal_point(self, cam, wireframe):
        pose = Pose(position=[0.0, 0.0, 40.0], attitude=[1, 0, 0, 0])
        manifest = Manifest(camera=cam, records=[SampleRecord(id="c", pose_gt=pose)])
        labeled, rejects = generate_labels(manifest, wireframe)
        assert not rejects
        box = labeled.records[0].bbox_gt
        center = box.center
        assert abs(center[0] - cam.cx) < 1.0 and abs(center[1] - cam.cy) < 1.0

    def test_landmark_count_matches_wireframe(self, labeled, wireframe):
        for record in labeled.records:
            assert record.landmarks_gt.shape == (wireframe.count, 2)

    def test_epnp_round_trip_on_labels(self, cam, wireframe, labeled):
        for record in labeled.records[:10]:
            corrs = [
                Correspondence(image=record.landmarks_gt[k], world=wireframe.keypoints[k], id=k)
                for k in range(wireframe.count)
            ]
            est = epnp(corrs, cam)
            assert np.linalg.norm(est.position - record.pose_gt.position) < 1e-5

    def test_behind_camera_pose_collected_as_reject(self, cam, wireframe):
        good = SampleRecord(id="good", pose_gt=Pose([0, 0, 40], [1, 0, 0, 0]))
        bad = SampleRecord(id="bad", pose_gt=Pose([0, 0, -40], [1, 0, 0, 0]))
        manifest = Manifest(camera=cam, records=[good, bad])
        labeled, rejects = generate_labels(manifest, wireframe)
        assert [r.id for r in labeled.records] == ["good"]
        assert len(rejects) == 1 and rejects[0].record_id == "bad"


class TestOracleLandmarks:
    def test_zero_noise_is_identity(self, labeled):
        record = labeled.records[0]
        out = oracle_landmarks(record, NoiseModel())
        np.testing.assert_array_equal(np.array(out), record.landmarks_gt)

    def test_sigma_matches_empirical_std(self, labeled):
        record = labeled.records[0]
        deltas = []
        for seed in range(5000):
            noisy = oracle_landmarks(record, NoiseModel(sigma_px=2.0, seed=seed))
            deltas.append(np.array(noisy) - record.landmarks_gt)
        std = np.concatenate(deltas).ravel().std()  # 110k coordinate samples
        assert 1.98 <= std <= 2.02

    def test_deterministic_per_seed_and_id(self, labeled):
        record = labeled.records[1]
        noise = NoiseModel(sigma_px=3.0, outlier_rate=0.2, dropout_rate=0.1, seed=77)
        a = oracle_landmarks(record, noise)
        b = oracle_landmarks(record, noise)
        for pa, pb in zip(a, b):
            if pa is None:
                assert pb is None
            else:
                np.testing.assert_array_equal(pa, pb)

    def test_sigma_change_keeps_outlier_pattern(self, labeled):
        record = labeled.records[2]
        base = NoiseModel(sigma_px=1.0, outlier_rate=0.3, dropout_rate=0.2, seed=13)
        wide = NoiseModel(sigma_px=8.0, outlier_rate=0.3, dropout_rate=0.2, seed=13)
        pattern_a = [p is None for p in oracle_landmarks(record, base)]
        pattern_b = [p is None for p in oracle_landmarks(record, wide)]
        assert pattern_a == pattern_b

    def test_dropout_marks_missing(self, labeled):
        record = labeled.records[3]
        out = oracle_landmarks(record, NoiseModel(dropout_rate=1.0, seed=3))
        assert all(p is None for p in out)


class TestRunPipeline:
    def test_zero_noise_scores_near_zero(self, labeled, wireframe):
        run = run_pipeline(labeled, OracleProvider(NoiseModel()), wireframe)
        assert not run.failures
        assert run.report.e < 1e-6
        assert len(run.scores) == len(labeled.records)

    def test_failure_accounting(self, labeled, wireframe):
        # full outlier corruption: consensus must fail on every record
        run_ok = False
        try:
            run = run_pipeline(
                labeled,
                OracleProvider(NoiseModel(outlier_rate=1.0, seed=5)),
                wireframe,
                ransac_cfg=RansacConfig(inlier_threshold=2.0, max_iterations=50),
            )
            run_ok = True
        except ValueError:
            pass  # every record failing is reported as an error
        assert not run_ok

    def test_partial_failures_excluded_from_aggregate(self, labeled, wireframe):
        # drop most landmarks on some records by keying dropout off the seed
        noise = NoiseModel(dropout_rate=0.55, seed=11)
        run = run_pipeline(
            labeled,
            OracleProvider(noise),
            wireframe,
            ransac_cfg=RansacConfig(min_sample=5, inlier_threshold=2.0),
        )
        assert run.failures  # at least one record starved of landmarks
        assert len(run.scores) + len(run.failures) == len(labeled.records)
        assert run.report.n == len(run.scores)

    def test_provider_equivalence(self, labeled, wireframe):
        noise = NoiseModel(sigma_px=1.5, outlier_rate=0.1, dropout_rate=0.05, seed=21)
        oracle_run = run_pipeline(
            labeled,
            OracleProvider(noise),
            wireframe,
            ransac_cfg=RansacConfig(inlier_threshold=6.0, seed=2),
            record_predictions=True,
        )
        file_run = run_pipeline(
            oracle_run.predicted,
            FileProvider(),
            wireframe,
            ransac_cfg=RansacConfig(inlier_threshold=6.0, seed=2),
        )
        assert oracle_run.scored_ids == file_run.scored_ids
        for a, b in zip(oracle_run.scores, file_run.scores):
            assert a.e_t == b.e_t and a.e_q == b.e_q

    def test_noise_monotonicity_smoke(self, cam, wireframe):
        manifest, _ = generate_labels(sampled_manifest(cam, wireframe, 40, seed=6), wireframe)
        medians = []
        for sigma in (0.0, 2.0, 8.0):
            run = run_pipeline(
                manifest,
                OracleProvider(NoiseModel(sigma_px=sigma, seed=9)),
                wireframe,
                ransac_cfg=RansacConfig(inlier_threshold=max(5.0, 3.0 * sigma)),
            )
            medians.append(run.report.e_q_rad.median)
        assert medians[0] <= medians[1] <= medians[2]
        assert medians[2] > medians[0]

    def test_timing_fields(self, labeled, wireframe):
        run = run_pipeline(labeled, OracleProvider(NoiseModel()), wireframe)
        t = run.timing
        assert t.fps > 0
        stage_total = (t.detection_ms + t.landmarks_ms + t.pnp_ms) / 1e3
        assert stage_total <= t.total_s

    def test_deterministic_given_seeds(self, labeled, wireframe):
        noise = NoiseModel(sigma_px=2.0, seed=31)
        runs = [
            run_pipeline(
                labeled,
                OracleProvider(noise),
                wireframe,
                ransac_cfg=RansacConfig(inlier_threshold=8.0, seed=4),
            )
            for _ in range(2)
        ]
        for a, b in zip(runs[0].scores, runs[1].scores):
            assert a.e_t == b.e_t and a.e_q == b.e_q and a.score == b.score

    def test_empty_manifest_rejected(self, cam, wireframe):
        with pytest.raises(ValueError):
            run_pipeline(Manifest(camera=cam, records=[]), OracleProvider(NoiseModel()), wireframe)

    def test_provider_k_mismatch_is_schema_failure(self, labeled, wireframe):
        seeded = run_pipeline(
            labeled, OracleProvider(NoiseModel()), wireframe, record_predictions=True
        ).predicted
        short = seeded.records[0]
        short.landmarks_pred = [np.array([0.5, 0.5])] * 7  # wrong K
        run = run_pipeline(seeded, FileProvider(), wireframe)
        assert any(rid == short.id for rid, _ in run.failures)
        assert len(run.scores) == len(seeded.records) - 1


class TestEmitReport:
    def test_json_and_csv_share_values(self, labeled, wireframe, tmp_path):
        run = run_pipeline(labeled, OracleProvider(NoiseModel()), wireframe)
        json_path = tmp_path / "report.json"
        csv_path = tmp_path / "report.csv"
        emit_report(run.report, "json", json_path, failures=0, timing=run.timing)
        emit_report(run.report, "csv", csv_path, failures=0, timing=run.timing)

        payload = json.loads(json_path.read_text())
        header, row = csv_path.read_text().strip().split("\n")
        columns = header.split(",")
        values = row.split(",")
        for col in ("E", "e_q_deg_mean", "e_q_deg_std", "e_t_m_mean", "e_t_m_std", "fps"):
            assert col in columns
            cell = values[columns.index(col)]
            assert float(cell) == payload[col]

    def test_timing_omitted_when_not_supplied(self, labeled, wireframe):
        run = run_pipeline(labeled, OracleProvider(NoiseModel()), wireframe)
        payload = report_payload(run.report, failures=0, timing=None)
        assert "fps" not in payload

    def test_unknown_format_rejected(self, labeled, wireframe, tmp_path):
        run = run_pipeline(labeled, OracleProvider(NoiseModel()), wireframe)
        with pytest.raises(ValueError):
            emit_report(run.report, "xml", tmp_path / "r.xml")
