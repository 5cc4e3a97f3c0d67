"""Confidence baselines: constant, mask-classification marginalization,
and the ground-truth difficulty oracle, plus panoptic inference from
probability-mask pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .difficulty import DIFFICULT_CLASS, DIFFICULT_INSTANCE, DifficultyRaster
from .errors import DimensionMismatchError, ValidationError
from .rasters import (
    NO_SEGMENT,
    NUM_CLASSES,
    STUFF_CLASSES,
    UNKNOWN_CLASS,
    UNKNOWN_INSTANCE,
    PanopticRaster,
)


@dataclass(frozen=True)
class ConfidenceRaster:
    """Per-pixel confidence score in [0, 1]."""

    scores: np.ndarray  # float64, (H, W)
    kind: str  # "class" or "instance"

    def __post_init__(self):
        if self.kind not in ("class", "instance"):
            raise ValidationError(f"unknown confidence kind {self.kind!r}")
        if self.scores.size and (self.scores.min() < 0.0 or self.scores.max() > 1.0):
            raise ValidationError("confidence scores must lie in [0, 1]")
        self.scores.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.scores.shape

    @classmethod
    def from_array(cls, scores, kind: str) -> "ConfidenceRaster":
        return cls(np.ascontiguousarray(scores, dtype=np.float64), kind)


@dataclass(frozen=True)
class MaskClassificationOutput:
    """N probability-mask pairs from a mask-classification model.

    ``probs`` has shape (N, K+1): a distribution over the K evaluation
    classes plus the trailing no-object class. ``masks`` has shape
    (N, H, W) with soft values in [0, 1].
    """

    probs: np.ndarray
    masks: np.ndarray

    def __post_init__(self):
        if self.probs.ndim != 2 or self.probs.shape[1] != NUM_CLASSES + 1:
            raise ValidationError(f"probs must be (N, {NUM_CLASSES + 1})")
        if self.masks.ndim != 3 or self.masks.shape[0] != self.probs.shape[0]:
            raise ValidationError("masks must be (N, H, W) matching probs")
        if self.probs.shape[0] < 1:
            raise ValidationError("need at least one probability-mask pair")
        if not np.allclose(self.probs.sum(axis=1), 1.0, atol=1e-6):
            raise ValidationError("each class distribution must sum to 1")
        if self.masks.min() < 0.0 or self.masks.max() > 1.0:
            raise ValidationError("mask values must lie in [0, 1]")

    @property
    def n_pairs(self) -> int:
        return self.probs.shape[0]


def _pixel_assignment(mc: MaskClassificationOutput) -> tuple[np.ndarray, np.ndarray]:
    """Winning pair index per pixel (-1 where no pair applies) and top classes."""
    top_class = np.argmax(mc.probs, axis=1)  # (N,)
    valid = top_class < NUM_CLASSES  # no-object pairs never win
    n, h, w = mc.masks.shape
    scores = mc.probs[np.arange(n), top_class][:, None, None] * mc.masks
    scores = np.where(valid[:, None, None], scores, -1.0)
    winner = np.argmax(scores, axis=0)
    best = np.take_along_axis(scores, winner[None], axis=0)[0]
    winner = np.where(best > 0.0, winner, -1)
    return winner, top_class


def panoptic_inference(mc: MaskClassificationOutput) -> PanopticRaster:
    """Assign each pixel to the pair maximizing class score times mask score.

    Pixels where every pair is no-object-dominant or has zero score are
    left unlabeled (ground-truth-void style).
    """
    winner, top_class = _pixel_assignment(mc)
    h, w = winner.shape
    class_ids = np.full((h, w), UNKNOWN_CLASS, dtype=np.uint8)
    segment_ids = np.full((h, w), UNKNOWN_INSTANCE, dtype=np.uint32)
    assigned = winner >= 0
    cls = top_class[np.clip(winner, 0, None)].astype(np.uint8)
    class_ids[assigned] = cls[assigned]
    is_stuff = np.isin(cls, list(STUFF_CLASSES))
    seg = np.where(is_stuff, NO_SEGMENT, winner + 1).astype(np.uint32)
    segment_ids[assigned] = seg[assigned]
    return PanopticRaster.from_arrays(class_ids, segment_ids)


def marginal_confidences(
    mc: MaskClassificationOutput, assignment: PanopticRaster
) -> tuple[ConfidenceRaster, ConfidenceRaster]:
    """Class/instance confidence scores marginalized over all pairs.

    Masks are normalized per pixel to sum to one over the N pairs; the
    class score sums p_i(c*) over all pairs weighted by the normalized
    masks, and the instance score is the winning pair's share of that sum.
    Pixels with no assignment or an all-zero mask column score 0 on both.
    """
    winner, top_class = _pixel_assignment(mc)
    if winner.shape != assignment.shape:
        raise DimensionMismatchError("assignment does not match the mask shape")
    n, h, w = mc.masks.shape
    mask_sum = mc.masks.sum(axis=0)
    ok = (mask_sum > 0.0) & (winner >= 0)
    norm = np.where(mask_sum > 0.0, mask_sum, 1.0)
    m_bar = mc.masks / norm  # (N, H, W)

    c_star = top_class[np.clip(winner, 0, None)]  # (H, W)
    p_at_cstar = mc.probs[:, c_star.ravel()].reshape(n, h, w)  # p_i(c*) per pixel
    s_class = np.where(ok, (p_at_cstar * m_bar).sum(axis=0), 0.0)

    idx = np.clip(winner, 0, None)
    m_bar_win = np.take_along_axis(m_bar, idx[None], axis=0)[0]
    p_win = np.take_along_axis(p_at_cstar, idx[None], axis=0)[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        s_inst = np.where(ok & (s_class > 0.0), p_win * m_bar_win / np.where(s_class > 0, s_class, 1.0), 0.0)
    s_class = np.clip(s_class, 0.0, 1.0)
    s_inst = np.clip(s_inst, 0.0, 1.0)
    return (
        ConfidenceRaster.from_array(s_class, "class"),
        ConfidenceRaster.from_array(s_inst, "instance"),
    )


def constant_confidence(
    dims: tuple[int, int], value: float
) -> tuple[ConfidenceRaster, ConfidenceRaster]:
    """Uniform class and instance confidence (the Constant 100% baseline at 1.0)."""
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"confidence value {value} outside [0, 1]")
    arr = np.full(dims, float(value))
    return (
        ConfidenceRaster.from_array(arr, "class"),
        ConfidenceRaster.from_array(arr.copy(), "instance"),
    )


def oracle_confidence(
    difficulty: DifficultyRaster,
) -> tuple[ConfidenceRaster, ConfidenceRaster]:
    """Ground-truth confidence maps read off the difficulty raster.

    Class confidence is 0 exactly on difficult_class pixels; instance
    confidence is 0 exactly on difficult_instance pixels. difficult_class
    pixels keep instance confidence 1: the class-unconfident branch
    consumes them first, so the value is unobservable downstream but the
    raster stays well defined on its own.
    """
    d = difficulty.values
    s_class = np.where(d == DIFFICULT_CLASS, 0.0, 1.0)
    s_inst = np.where(d == DIFFICULT_INSTANCE, 0.0, 1.0)
    return (
        ConfidenceRaster.from_array(s_class, "class"),
        ConfidenceRaster.from_array(s_inst, "instance"),
    )
