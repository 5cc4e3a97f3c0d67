"""Uncertainty-aware panoptic quality.

Binary class/instance confidence predictions are compared against the
ternary difficulty map: pixels that correctly claim uncertainty become ANY
wildcards, pixels that wrongly claim uncertainty become VOID_U (counted as
absent predictions). Matching then runs in two steps so that segments
surrounded by correct uncertainty claims still match.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .difficulty import DIFFICULT_CLASS, DIFFICULT_INSTANCE, DifficultyRaster
from .errors import DimensionMismatchError, ValidationError
from .matching import MatchLedger, match_entries
from .pq import MetricReport, report_from_stats
from .rasters import (
    ANY_KEY,
    NUM_CLASSES,
    VOID_U_KEY,
    PanopticRaster,
    joint_histogram,
)


@dataclass(frozen=True)
class BinaryConfidenceMask:
    """Per-pixel confident/unconfident flags at one threshold."""

    confident: np.ndarray  # bool, (H, W)
    kind: str  # "class" or "instance"

    def __post_init__(self):
        if self.kind not in ("class", "instance"):
            raise ValidationError(f"unknown confidence kind {self.kind!r}")
        self.confident.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.confident.shape


@dataclass(frozen=True)
class AugmentedPrediction:
    """Prediction after confidence masking.

    ``keys`` holds the original per-pixel segment key, ANY_KEY, or
    VOID_U_KEY; ANY and VOID_U pixels belong to no predicted segment.
    """

    keys: np.ndarray  # int64, (H, W)
    pred: PanopticRaster

    def __post_init__(self):
        self.keys.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.keys.shape

    def any_mask(self) -> np.ndarray:
        return self.keys == ANY_KEY

    def void_u_mask(self) -> np.ndarray:
        return self.keys == VOID_U_KEY


def apply_confidence_masks(
    pred: PanopticRaster,
    gt: PanopticRaster,
    difficulty: DifficultyRaster,
    class_mask: BinaryConfidenceMask,
    inst_mask: BinaryConfidenceMask,
) -> AugmentedPrediction:
    """Route every pixel through the confidence/difficulty comparison.

    Class-unconfident pixels become ANY over difficult_class and VOID_U
    elsewhere. Class-confident, instance-unconfident pixels with the
    correct class become ANY over difficult regions and VOID_U over easy
    ones; with a wrong class they become VOID_U, and over ground-truth
    void they stay unchanged. Fully confident pixels are untouched.
    """
    shapes = {pred.shape, gt.shape, difficulty.shape, class_mask.shape, inst_mask.shape}
    if len(shapes) != 1:
        raise DimensionMismatchError(f"inconsistent shapes: {sorted(shapes)}")
    if class_mask.kind != "class" or inst_mask.kind != "instance":
        raise ValidationError("confidence mask kinds are swapped or wrong")

    diff = difficulty.values
    keys = pred.keys()
    cu = ~class_mask.confident
    iu = class_mask.confident & ~inst_mask.confident

    out = keys.copy()
    out[cu] = np.where(diff[cu] == DIFFICULT_CLASS, ANY_KEY, VOID_U_KEY)

    gt_void = gt.class_ids >= NUM_CLASSES
    correct = pred.class_ids == gt.class_ids
    hard = (diff == DIFFICULT_INSTANCE) | (diff == DIFFICULT_CLASS)
    sel = iu & ~gt_void
    out[sel] = np.where(correct[sel] & hard[sel], ANY_KEY, VOID_U_KEY)
    return AugmentedPrediction(keys=out, pred=pred)


def match_segments_upq(
    aug: AugmentedPrediction, gt: PanopticRaster
) -> tuple[MatchLedger, AugmentedPrediction]:
    """Two-step wildcard matching; returns the ledger and the filled raster.

    The filled raster keeps VOID_U pixels and residual (never-matched) ANY
    pixels as-is; ANY pixels inside matched ground-truth segments receive
    the matched segment's labels, step-2 matches receive the ground-truth
    labels directly.
    """
    if aug.shape != gt.shape:
        raise DimensionMismatchError(f"aug {aug.shape} vs gt {gt.shape}")
    gt_keys = gt.keys()
    hist = joint_histogram(aug.keys, gt_keys)
    result = match_entries(hist.as_dict())

    filled = aug.keys.copy()
    is_any = aug.keys == ANY_KEY
    for g, p in result.step1_fills.items():
        filled[is_any & (gt_keys == g)] = p
    for g in result.step2_gt:
        filled[is_any & (gt_keys == g)] = g
    return result.ledger, AugmentedPrediction(keys=filled, pred=aug.pred)


def compute_upq(ledger: MatchLedger) -> MetricReport:
    """Identical arithmetic to PQ; the outputs are named UPQ/USQ/URQ."""
    return report_from_stats(ledger.class_stats(), kind="upq")
