"""Manifest schema, round-trip, and split tests."""

import json

import numpy as np
import pytest

from satpose import BBox, Manifest, Pose, SampleRecord, load_manifest, save_manifest, split_dataset
from satpose.errors import ManifestError
from satpose.manifest import ManifestWarning
from satpose.rng import stream
from satpose.sampler import sample_attitude


def make_manifest(cam, n=10, seed=0, with_labels=False) -> Manifest:
    rng = stream(seed, "manifest")
    records = []
    for i in range(n):
        pose = Pose(
            position=[rng.normal(0, 2), rng.normal(0, 2), rng.uniform(36, 70)],
            attitude=sample_attitude(rng),
        )
        record = SampleRecord(id=f"img{i:06d}", pose_gt=pose)
        if with_labels:
            record.bbox_gt = BBox(100.0 + i, 90.0, 400.0 + i, 390.0)
            record.landmarks_gt = rng.uniform(100, 400, size=(11, 2))
        records.append(record)
    return Manifest(camera=cam, records=records, wireframe="wireframe.json")


class TestRoundTrip:
    def test_full_precision_round_trip(self, cam, tmp_path):
        manifest = make_manifest(cam, n=100, with_labels=True)
        manifest.records[3].bbox_pred = BBox(101.0, 91.5, 402.25, 391.125)
        manifest.records[5].landmarks_pred = [
            None if k == 2 else np.array([0.1 * k, 0.05 * k]) for k in range(11)
        ]
        path = tmp_path / "m.json"
        save_manifest(manifest, path)
        loaded = load_manifest(path)

        assert len(loaded.records) == 100
        assert loaded.wireframe == "wireframe.json"
        assert loaded.camera == cam
        for orig, back in zip(manifest.records, loaded.records):
            assert orig.id == back.id
            np.testing.assert_array_equal(orig.pose_gt.position, back.pose_gt.position)
            np.testing.assert_array_equal(orig.pose_gt.attitude, back.pose_gt.attitude)
            if orig.landmarks_gt is not None:
                np.testing.assert_array_equal(orig.landmarks_gt, back.landmarks_gt)
            assert orig.bbox_gt == back.bbox_gt
            assert orig.bbox_pred == back.bbox_pred
        pred = loaded.records[5].landmarks_pred
        assert pred[2] is None
        np.testing.assert_array_equal(pred[3], manifest.records[5].landmarks_pred[3])

    def test_save_is_idempotent(self, cam, tmp_path):
        manifest = make_manifest(cam, n=20, with_labels=True)
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_manifest(manifest, p1)
        save_manifest(load_manifest(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestSchemaErrors:
    def base_payload(self, cam):
        return {
            "camera": {
                "fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy,
                "width": cam.width, "height": cam.height,
            },
            "records": [{"id": "a", "q": [1, 0, 0, 0], "t": [0, 0, 40]}],
        }

    def write(self, tmp_path, payload):
        path = tmp_path / "m.json"
        path.write_text(json.dumps(payload))
        return path

    def test_missing_quaternion_names_field_and_record(self, cam, tmp_path):
        payload = self.base_payload(cam)
        del payload["records"][0]["q"]
        with pytest.raises(ManifestError, match=r"records\[0\].*'q'"):
            load_manifest(self.write(tmp_path, payload))

    def test_missing_camera_field(self, cam, tmp_path):
        payload = self.base_payload(cam)
        del payload["camera"]["fx"]
        with pytest.raises(ManifestError, match="fx"):
            load_manifest(self.write(tmp_path, payload))

    def test_wrong_quaternion_length(self, cam, tmp_path):
        payload = self.base_payload(cam)
        payload["records"][0]["q"] = [1, 0, 0]
        with pytest.raises(ManifestError, match=r"records\[0\]"):
            load_manifest(self.write(tmp_path, payload))

    def test_duplicate_ids_rejected(self, cam, tmp_path):
        payload = self.base_payload(cam)
        payload["records"].append(dict(payload["records"][0]))
        with pytest.raises(ManifestError, match="unique"):
            load_manifest(self.write(tmp_path, payload))

    def test_invalid_json_reported(self, cam, tmp_path):
        path = tmp_path / "m.json"
        path.write_text("{not json")
        with pytest.raises(ManifestError, match="invalid JSON"):
            load_manifest(path)

    def test_unknown_convention_rejected(self, cam, tmp_path):
        payload = self.base_payload(cam)
        payload["attitude_convention"] = "sideways"
        with pytest.raises(ManifestError, match="attitude_convention"):
            load_manifest(self.write(tmp_path, payload))


class TestQuaternionPolicy:
    def test_non_unit_quaternion_normalized_with_warning(self, cam, tmp_path):
        payload = TestSchemaErrors().base_payload(cam)
        payload["records"][0]["q"] = [2.0, 0.0, 0.0, 0.0]
        path = tmp_path / "m.json"
        path.write_text(json.dumps(payload))
        with pytest.warns(ManifestWarning):
            manifest = load_manifest(path)
        np.testing.assert_array_equal(manifest.records[0].pose_gt.attitude, [1, 0, 0, 0])

    def test_tiny_deviation_passes_silently(self, cam, tmp_path, recwarn):
        payload = TestSchemaErrors().base_payload(cam)
        payload["records"][0]["q"] = [1.0 + 1e-9, 0.0, 0.0, 0.0]
        path = tmp_path / "m.json"
        path.write_text(json.dumps(payload))
        load_manifest(path)
        assert not [w for w in recwarn.list if issubclass(w.category, ManifestWarning)]

    def test_camera_to_body_convention_conjugates(self, cam, tmp_path):
        payload = TestSchemaErrors().base_payload(cam)
        payload["attitude_convention"] = "camera_to_body"
        payload["records"][0]["q"] = [0.8, 0.6, 0.0, 0.0]
        path = tmp_path / "m.json"
        path.write_text(json.dumps(payload))
        manifest = load_manifest(path)
        np.testing.assert_allclose(
            manifest.records[0].pose_gt.attitude, [0.8, -0.6, 0.0, 0.0], atol=1e-15
        )


class TestSplit:
    def test_benchmark_partition_sizes(self, cam):
        # the published partition sizes both datasets report
        for total, train in ((12_000, 9_728), (15_000, 12_032)):
            manifest = make_manifest(cam, n=0)
            manifest.records = [
                SampleRecord(id=f"r{i}", pose_gt=Pose([0, 0, 40], [1, 0, 0, 0]))
                for i in range(total)
            ]
            tr, te = split_dataset(manifest, train / total, seed=1)
            assert len(tr.records) == train
            assert len(te.records) == total - train

    def test_same_seed_same_partition(self, cam):
        manifest = make_manifest(cam, n=200)
        a_train, a_test = split_dataset(manifest, 0.8, seed=9)
        b_train, b_test = split_dataset(manifest, 0.8, seed=9)
        assert [r.id for r in a_train.records] == [r.id for r in b_train.records]
        assert [r.id for r in a_test.records] == [r.id for r in b_test.records]

    def test_partition_is_disjoint_and_complete(self, cam):
        manifest = make_manifest(cam, n=157)
        train, test = split_dataset(manifest, 0.75, seed=3)
        train_ids = {r.id for r in train.records}
        test_ids = {r.id for r in test.records}
        assert not train_ids & test_ids
        assert train_ids | test_ids == {r.id for r in manifest.records}
        assert len(train.records) == int(np.floor(157 * 0.75))

    def test_fraction_bounds(self, cam):
        manifest = make_manifest(cam, n=10)
        with pytest.raises(ValueError):
            split_dataset(manifest, 1.0, seed=0)
        with pytest.raises(ValueError):
            split_dataset(manifest, 0.0, seed=0)
