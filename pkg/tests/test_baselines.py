import numpy as np
import pytest

from upqeval import (
    MaskClassificationOutput,
    NUM_CLASSES,
    UNKNOWN_CLASS,
    ValidationError,
    constant_confidence,
    marginal_confidences,
    oracle_confidence,
    panoptic_inference,
)
from upqeval.baselines import _pixel_assignment

from conftest import difficulty


def _mc(probs, masks):
    return MaskClassificationOutput(
        probs=np.asarray(probs, dtype=np.float64),
        masks=np.asarray(masks, dtype=np.float64),
    )


def _one_hot(c):
    row = np.zeros(NUM_CLASSES + 1)
    row[c] = 1.0
    return row


class TestConstantAndOracle:
    def test_constant_value_everywhere(self):
        c, i = constant_confidence((2, 3), 0.7)
        assert c.shape == (2, 3) and i.shape == (2, 3)
        assert (c.scores == 0.7).all() and (i.scores == 0.7).all()
        assert (c.kind, i.kind) == ("class", "instance")

    def test_constant_rejects_out_of_range(self):
        with pytest.raises(ValidationError):
            constant_confidence((2, 2), 1.5)

    def test_oracle_reads_off_difficulty(self):
        d = difficulty([[0, 1, 2]])
        c, i = oracle_confidence(d)
        assert c.scores.tolist() == [[1.0, 1.0, 0.0]]
        assert i.scores.tolist() == [[1.0, 0.0, 1.0]]


class TestMaskClassificationValidation:
    def test_probs_must_sum_to_one(self):
        bad = _one_hot(0)
        bad[0] = 0.5
        with pytest.raises(ValidationError):
            _mc([bad], np.ones((1, 2, 2)))

    def test_mask_values_bounded(self):
        with pytest.raises(ValidationError):
            _mc([_one_hot(0)], np.full((1, 2, 2), 1.5))

    def test_shape_consistency(self):
        with pytest.raises(ValidationError):
            _mc([_one_hot(0), _one_hot(1)], np.ones((1, 2, 2)))


class TestPanopticInference:
    def test_stuff_and_thing_assignment(self):
        # pair 0: road over the left half; pair 1: car over the right half
        masks = np.zeros((2, 2, 4))
        masks[0, :, :2] = 1.0
        masks[1, :, 2:] = 1.0
        r = panoptic_inference(_mc([_one_hot(0), _one_hot(13)], masks))
        assert (r.class_ids[:, :2] == 0).all()
        assert (r.segment_ids[:, :2] == 0).all()  # stuff merges to NO_SEGMENT
        assert (r.class_ids[:, 2:] == 13).all()
        assert (r.segment_ids[:, 2:] == 2).all()  # pair index 1 -> segment 2

    def test_no_object_pair_never_wins(self):
        masks = np.ones((2, 1, 3))
        masks[1] = 0.4
        probs = [_one_hot(NUM_CLASSES), _one_hot(5)]  # first pair is no-object
        r = panoptic_inference(_mc(probs, masks))
        assert (r.class_ids == 5).all()

    def test_uncovered_pixels_stay_unlabeled(self):
        masks = np.zeros((1, 1, 3))
        masks[0, 0, 0] = 1.0
        r = panoptic_inference(_mc([_one_hot(13)], masks))
        assert r.class_ids[0, 0] == 13
        assert (r.class_ids[0, 1:] == UNKNOWN_CLASS).all()


class TestMarginalConfidences:
    def _random_mc(self, seed, n=5, h=8, w=8):
        rng = np.random.default_rng(seed)
        logits = rng.normal(size=(n, NUM_CLASSES + 1))
        probs = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
        masks = rng.random((n, h, w))
        masks[:, : h // 4] = 0.0  # leave some pixels fully uncovered
        return _mc(probs, masks)

    @pytest.mark.parametrize("seed", range(10))
    def test_bounds_and_decomposition(self, seed):
        mc = self._random_mc(seed)
        assignment = panoptic_inference(mc)
        s_class, s_inst = marginal_confidences(mc, assignment)
        assert s_class.scores.min() >= 0.0 and s_class.scores.max() <= 1.0
        assert s_inst.scores.min() >= 0.0 and s_inst.scores.max() <= 1.0
        # product identity: s_class * s_inst == p_win(c*) * normalized winning mask
        winner, top_class = _pixel_assignment(mc)
        mask_sum = mc.masks.sum(axis=0)
        ok = (mask_sum > 0) & (winner >= 0)
        idx = np.clip(winner, 0, None)
        m_bar_win = np.take_along_axis(
            mc.masks / np.where(mask_sum > 0, mask_sum, 1.0), idx[None], axis=0)[0]
        c_star = top_class[idx]
        n = mc.masks.shape[0]
        p_win = mc.probs[idx.ravel(), c_star.ravel()].reshape(idx.shape)
        expect = np.where(ok, p_win * m_bar_win, 0.0)
        got = s_class.scores * s_inst.scores
        np.testing.assert_allclose(got, expect, rtol=0, atol=1e-9)

    def test_uncovered_pixels_score_zero(self):
        mc = self._random_mc(3)
        s_class, s_inst = marginal_confidences(mc, panoptic_inference(mc))
        uncovered = mc.masks.sum(axis=0) == 0
        assert (s_class.scores[uncovered] == 0.0).all()
        assert (s_inst.scores[uncovered] == 0.0).all()

    def test_single_certain_pair_scores_one(self):
        masks = np.ones((1, 3, 3))
        mc = _mc([_one_hot(13)], masks)
        s_class, s_inst = marginal_confidences(mc, panoptic_inference(mc))
        assert (s_class.scores == 1.0).all()
        assert (s_inst.scores == 1.0).all()

    def test_competing_pair_halves_instance_score(self):
        # two identical full-coverage car masks with certain class: the class
        # score stays 1 but the winner only owns half the normalized mass
        masks = np.ones((2, 2, 2))
        mc = _mc([_one_hot(13), _one_hot(13)], masks)
        s_class, s_inst = marginal_confidences(mc, panoptic_inference(mc))
        np.testing.assert_allclose(s_class.scores, 1.0)
        np.testing.assert_allclose(s_inst.scores, 0.5)
