import json

import numpy as np
import pytest

from upqeval import (
    ConfidenceRaster,
    FormatError,
    SceneSpec,
    SchemaVersionError,
    UNKNOWN_CLASS,
    UNKNOWN_INSTANCE,
    ValidationError,
    generate_scene,
)
from upqeval.io_formats import (
    DatasetManifest,
    SampleRecord,
    dump_report_json,
    load_confidence,
    load_difficulty,
    load_manifest,
    load_panoptic_canonical,
    load_panoptic_compact,
    load_report,
    save_confidence,
    save_difficulty,
    save_manifest,
    save_panoptic_canonical,
    save_panoptic_compact,
)

from conftest import difficulty, raster


@pytest.fixture
def scene():
    return generate_scene(SceneSpec(
        seed=77, width=40, height=40, jitter_px=1, class_flip_rate=0.3,
        drop_rate=0.1, difficulty_rate=0.4, conf_mode="random"))


class TestPanopticRoundTrip:
    def test_canonical(self, scene, tmp_path):
        img, side = tmp_path / "gt.png", tmp_path / "gt.json"
        save_panoptic_canonical(scene.gt, img, side)
        back = load_panoptic_canonical(img, side)
        np.testing.assert_array_equal(back.class_ids, scene.gt.class_ids)
        np.testing.assert_array_equal(back.segment_ids, scene.gt.segment_ids)

    def test_canonical_preserves_sentinels(self, tmp_path):
        r = raster([[0, 13, UNKNOWN_CLASS, 13]],
                   [[0, 1, UNKNOWN_INSTANCE, UNKNOWN_INSTANCE]])
        img, side = tmp_path / "a.png", tmp_path / "a.json"
        save_panoptic_canonical(r, img, side)
        back = load_panoptic_canonical(img, side)
        np.testing.assert_array_equal(back.class_ids, r.class_ids)
        np.testing.assert_array_equal(back.segment_ids, r.segment_ids)
        kinds = {s["kind"] for s in json.loads(side.read_text())["segments"]}
        assert kinds == {"stuff", "thing", "unknown_instance"}

    def test_canonical_missing_id_in_sidecar(self, tmp_path):
        r = raster([[0, 13]], [[0, 1]])
        img, side = tmp_path / "a.png", tmp_path / "a.json"
        save_panoptic_canonical(r, img, side)
        payload = json.loads(side.read_text())
        payload["segments"].pop()
        side.write_text(json.dumps(payload))
        with pytest.raises(FormatError):
            load_panoptic_canonical(img, side)

    def test_compact(self, scene, tmp_path):
        p = tmp_path / "gt16.png"
        save_panoptic_compact(scene.gt, p)
        back = load_panoptic_compact(p)
        np.testing.assert_array_equal(back.class_ids, scene.gt.class_ids)
        np.testing.assert_array_equal(back.segment_ids, scene.gt.segment_ids)

    def test_compact_rejects_large_instance_ids(self, tmp_path):
        r = raster([[13]], [[999]])
        with pytest.raises(FormatError):
            save_panoptic_compact(r, tmp_path / "x.png")

    def test_compact_rejects_out_of_range_ids(self, tmp_path):
        from PIL import Image
        arr = np.full((2, 2), 25123, dtype=np.uint16)  # class 25 does not exist
        Image.fromarray(arr).save(tmp_path / "bad.png")
        with pytest.raises(FormatError):
            load_panoptic_compact(tmp_path / "bad.png")

    def test_wrong_bit_depth_rejected(self, tmp_path):
        save_difficulty(difficulty([[0, 1]]), tmp_path / "d.png")
        with pytest.raises(FormatError):
            load_panoptic_compact(tmp_path / "d.png")


class TestScalarRasters:
    def test_difficulty_round_trip(self, scene, tmp_path):
        p = tmp_path / "d.png"
        save_difficulty(scene.difficulty, p)
        np.testing.assert_array_equal(load_difficulty(p).values, scene.difficulty.values)

    def test_difficulty_range_checked(self, tmp_path):
        from PIL import Image
        Image.fromarray(np.full((2, 2), 7, np.uint8), mode="L").save(tmp_path / "d.png")
        with pytest.raises(FormatError):
            load_difficulty(tmp_path / "d.png")

    def test_confidence_round_trip_within_quantization(self, scene, tmp_path):
        p = tmp_path / "c.png"
        save_confidence(scene.class_conf, p)
        back = load_confidence(p, "class")
        assert back.kind == "class"
        np.testing.assert_allclose(back.scores, scene.class_conf.scores,
                                   rtol=0, atol=0.5 / 65535)

    def test_confidence_grid_values_are_exact(self, tmp_path):
        # thresholds k/15 quantize exactly through value/65535 (65535 = 15*4369)
        scores = np.arange(16).reshape(4, 4) / 15.0
        p = tmp_path / "c.png"
        save_confidence(ConfidenceRaster.from_array(scores, "class"), p)
        np.testing.assert_array_equal(load_confidence(p, "class").scores, scores)


class TestManifest:
    def _manifest(self, tmp_path, records):
        save_manifest(DatasetManifest(samples=records, root=tmp_path),
                      tmp_path / "manifest.json")
        return tmp_path / "manifest.json"

    def test_round_trip(self, tmp_path):
        recs = [SampleRecord(sample_id="a", prediction="p.png", ground_truth="g.png",
                             difficulty="d.png", conditions=["fog", "night"])]
        m = load_manifest(self._manifest(tmp_path, recs))
        assert m.samples == recs
        assert m.resolve("p.png") == tmp_path / "p.png"

    def test_duplicate_id_rejected(self, tmp_path):
        recs = [SampleRecord("a", "p", "g"), SampleRecord("a", "q", "h")]
        with pytest.raises(ValidationError):
            load_manifest(self._manifest(tmp_path, recs))

    def test_unknown_condition_rejected(self, tmp_path):
        recs = [SampleRecord("a", "p", "g", conditions=["dusk"])]
        with pytest.raises(ValidationError):
            load_manifest(self._manifest(tmp_path, recs))

    def test_wrong_schema_version(self, tmp_path):
        p = tmp_path / "manifest.json"
        p.write_text(json.dumps({"schema_version": 99, "samples": []}))
        with pytest.raises(SchemaVersionError):
            load_manifest(p)

    def test_garbage_json(self, tmp_path):
        p = tmp_path / "manifest.json"
        p.write_text("{not json")
        with pytest.raises(FormatError):
            load_manifest(p)


class TestReportSerialization:
    def test_deterministic_and_sorted(self):
        a = dump_report_json({"b": 1.0, "a": {"y": 0.25, "x": 2}})
        b = dump_report_json({"a": {"x": 2, "y": 0.25}, "b": 1.0})
        assert a == b
        assert a.index('"a"') < a.index('"b"')

    def test_floats_fixed_to_six_decimals(self):
        text = dump_report_json({"v": 1 / 3})
        assert "0.333333" in text
        assert json.loads(text)["v"] == 0.333333

    def test_numpy_scalars_and_arrays_serialize(self):
        text = dump_report_json({"m": np.array([[0.5, 1.0]]), "n": np.int64(3)})
        payload = json.loads(text)
        assert payload["m"] == [[0.5, 1.0]]
        assert payload["n"] == 3

    def test_load_report_checks_schema(self, tmp_path):
        p = tmp_path / "r.json"
        p.write_text(json.dumps({"schema_version": 0}))
        with pytest.raises(SchemaVersionError):
            load_report(p)
