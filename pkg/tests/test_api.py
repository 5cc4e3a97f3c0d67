import numpy as np
import pytest

from upqeval import (
    SceneSpec,
    ValidationError,
    evaluate_aupq,
    evaluate_pq,
    evaluate_upq,
    generate_scene,
)
from upqeval.io_formats import (
    save_confidence,
    save_difficulty,
    save_panoptic_compact,
)


@pytest.fixture(scope="module")
def scenes():
    return [generate_scene(SceneSpec(
        seed=600 + i, width=40, height=40, jitter_px=2, class_flip_rate=0.3,
        drop_rate=0.1, difficulty_rate=0.5, mark_errors_difficult=True,
        conf_mode="random")) for i in range(3)]


class TestEvaluatePq:
    def test_perfect_prediction(self, scenes):
        rep = evaluate_pq(scenes[0].gt, scenes[0].gt)
        assert rep["aggregates"]["all"]["pq"] == 1.0

    def test_accepts_array_pairs(self, scenes):
        gt = scenes[0].gt
        via_raster = evaluate_pq(scenes[0].pred, gt)
        via_tuple = evaluate_pq(
            (scenes[0].pred.class_ids, scenes[0].pred.segment_ids),
            (gt.class_ids, gt.segment_ids))
        assert via_raster == via_tuple

    def test_accepts_paths(self, scenes, tmp_path):
        p, g = tmp_path / "p.png", tmp_path / "g.png"
        save_panoptic_compact(scenes[0].pred, p)
        save_panoptic_compact(scenes[0].gt, g)
        assert evaluate_pq(p, g) == evaluate_pq(scenes[0].pred, scenes[0].gt)

    def test_lists_accumulate_dataset_level(self, scenes):
        joint = evaluate_pq([s.pred for s in scenes], [s.gt for s in scenes])
        singles = [evaluate_pq(s.pred, s.gt) for s in scenes]
        # dataset accumulation is not the mean of per-image values in general,
        # but counts must sum
        def tp_total(rep):
            return sum(v["tp"] for v in rep["per_class"].values())
        assert tp_total(joint) == sum(tp_total(r) for r in singles)

    def test_length_mismatch(self, scenes):
        with pytest.raises(ValidationError):
            evaluate_pq([scenes[0].pred], [])


class TestEvaluateUpq:
    def test_full_confidence_equals_pq(self, scenes):
        s = scenes[0]
        ones = np.ones(s.gt.shape)
        upq = evaluate_upq(s.pred, s.gt, s.difficulty.values, ones, ones,
                           class_threshold=0.0, inst_threshold=0.0)
        pq = evaluate_pq(s.pred, s.gt)
        assert upq["aggregates"]["all"]["upq"] == pq["aggregates"]["all"]["pq"]

    def test_path_and_array_inputs_agree(self, scenes, tmp_path):
        s = scenes[0]
        paths = {}
        for name, saver, obj in (
            ("p", save_panoptic_compact, s.pred),
            ("g", save_panoptic_compact, s.gt),
        ):
            paths[name] = tmp_path / f"{name}.png"
            saver(obj, paths[name])
        save_difficulty(s.difficulty, tmp_path / "d.png")
        save_confidence(s.class_conf, tmp_path / "cc.png")
        save_confidence(s.inst_conf, tmp_path / "ic.png")
        # quantize the in-memory scores the same way the files are stored
        cc = np.round(s.class_conf.scores * 65535) / 65535
        ic = np.round(s.inst_conf.scores * 65535) / 65535
        via_arrays = evaluate_upq(s.pred, s.gt, s.difficulty.values, cc, ic)
        via_paths = evaluate_upq(paths["p"], paths["g"], tmp_path / "d.png",
                                 tmp_path / "cc.png", tmp_path / "ic.png")
        assert via_arrays == via_paths


class TestEvaluateAupq:
    def test_constant_confidence_identity(self, scenes):
        s = scenes[0]
        ones = np.ones(s.gt.shape)
        rep = evaluate_aupq(s.pred, s.gt, s.difficulty.values, ones, ones,
                            grid_size=8)
        pq = evaluate_pq(s.pred, s.gt)["aggregates"]["all"]["pq"]
        assert rep["aupq"]["all"] == pq
        mat = np.asarray(rep["matrices"]["upq_all"])
        assert mat.shape == (8, 8)
        assert (mat == pq).all()

    def test_multi_sample(self, scenes):
        rep = evaluate_aupq(
            [s.pred for s in scenes], [s.gt for s in scenes],
            [s.difficulty.values for s in scenes],
            [s.class_conf for s in scenes], [s.inst_conf for s in scenes],
            grid_size=4)
        assert 0.0 <= rep["aupq"]["all"] <= 1.0
        for key in ("ausq", "aurq"):
            assert set(rep[key]) == {"all", "stuff", "things"}
