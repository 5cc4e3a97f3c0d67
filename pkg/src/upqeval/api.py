"""Array-level evaluation entry points for ML pipelines.

Each function accepts either in-memory 2-D arrays (class ids, segment ids,
difficulty values, confidence scores) or file paths in the on-disk
encodings, and returns plain mappings numerically identical to the CLI
report sections.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .baselines import ConfidenceRaster
from .difficulty import DifficultyRaster
from .errors import ValidationError
from .io_formats import load_confidence, load_difficulty, load_panoptic_compact
from .matching import match_entries
from .pq import MetricReport, report_from_stats
from .rasters import CLASS_NAMES, PanopticRaster, build_overlap_histogram
from .sweep import SweepAccumulator, ThresholdGrid, UpqSample, accumulate_sample, binarize, report_from_accumulator
from .upq import apply_confidence_masks, match_segments_upq


def _as_panoptic(value) -> PanopticRaster:
    if isinstance(value, PanopticRaster):
        return value
    if isinstance(value, (str, Path)):
        return load_panoptic_compact(value)
    if isinstance(value, tuple) and len(value) == 2:
        return PanopticRaster.from_arrays(value[0], value[1])
    raise ValidationError(
        "expected a PanopticRaster, a (class_ids, segment_ids) pair, or a path")


def _as_difficulty(value) -> DifficultyRaster:
    if isinstance(value, DifficultyRaster):
        return value
    if isinstance(value, (str, Path)):
        return load_difficulty(value)
    return DifficultyRaster.from_array(np.asarray(value))


def _as_confidence(value, kind: str) -> ConfidenceRaster:
    if isinstance(value, ConfidenceRaster):
        return value
    if isinstance(value, (str, Path)):
        return load_confidence(value, kind)
    return ConfidenceRaster.from_array(np.asarray(value, dtype=np.float64), kind)


def _report_mapping(rep: MetricReport) -> dict:
    kind = rep.kind
    return {
        "per_class": {
            CLASS_NAMES[c]: {kind: m.pq, "sq": m.sq, "rq": m.rq,
                             "iou_sum": m.iou_sum, "tp": m.tp, "fp": m.fp, "fn": m.fn}
            for c, m in rep.per_class.items()
        },
        "aggregates": {
            "all": {kind: rep.pq_all, "sq": rep.sq_all, "rq": rep.rq_all,
                    "n_classes": rep.n_valid_all},
            "stuff": {kind: rep.pq_stuff, "sq": rep.sq_stuff, "rq": rep.rq_stuff,
                      "n_classes": rep.n_valid_stuff},
            "things": {kind: rep.pq_things, "sq": rep.sq_things, "rq": rep.rq_things,
                       "n_classes": rep.n_valid_things},
        },
    }


def evaluate_pq(pred, gt) -> dict:
    """Standard PQ over one sample or parallel lists of samples."""
    preds = pred if isinstance(pred, list) else [pred]
    gts = gt if isinstance(gt, list) else [gt]
    if len(preds) != len(gts):
        raise ValidationError("pred and gt lists must have equal length")
    stats: dict = {}
    for p, g in zip(preds, gts):
        ledger = match_entries(
            build_overlap_histogram(_as_panoptic(p), _as_panoptic(g)).as_dict()).ledger
        for c, st in ledger.class_stats().items():
            if c in stats:
                stats[c].merge(st)
            else:
                stats[c] = st
    return _report_mapping(report_from_stats(stats, kind="pq"))


def evaluate_upq(pred, gt, difficulty, class_conf, inst_conf,
                 class_threshold: float = 0.5, inst_threshold: float = 0.5,
                 rule: str = "ge") -> dict:
    """UPQ at one operating point over one sample or lists of samples."""
    preds = pred if isinstance(pred, list) else [pred]
    gts = gt if isinstance(gt, list) else [gt]
    diffs = difficulty if isinstance(difficulty, list) else [difficulty]
    cconfs = class_conf if isinstance(class_conf, list) else [class_conf]
    iconfs = inst_conf if isinstance(inst_conf, list) else [inst_conf]
    if not len(preds) == len(gts) == len(diffs) == len(cconfs) == len(iconfs):
        raise ValidationError("all input lists must have equal length")
    stats: dict = {}
    for p, g, d, cc, ic in zip(preds, gts, diffs, cconfs, iconfs):
        p, g, d = _as_panoptic(p), _as_panoptic(g), _as_difficulty(d)
        cmask = binarize(_as_confidence(cc, "class"), class_threshold, rule=rule)
        imask = binarize(_as_confidence(ic, "instance"), inst_threshold, rule=rule)
        aug = apply_confidence_masks(p, g, d, cmask, imask)
        ledger, _ = match_segments_upq(aug, g)
        for c, st in ledger.class_stats().items():
            if c in stats:
                stats[c].merge(st)
            else:
                stats[c] = st
    return _report_mapping(report_from_stats(stats, kind="upq"))


def evaluate_aupq(pred, gt, difficulty, class_conf, inst_conf,
                  grid_size: int = 16, rule: str = "ge") -> dict:
    """Threshold-agnostic AUPQ over one sample or lists of samples."""
    preds = pred if isinstance(pred, list) else [pred]
    gts = gt if isinstance(gt, list) else [gt]
    diffs = difficulty if isinstance(difficulty, list) else [difficulty]
    cconfs = class_conf if isinstance(class_conf, list) else [class_conf]
    iconfs = inst_conf if isinstance(inst_conf, list) else [inst_conf]
    if not len(preds) == len(gts) == len(diffs) == len(cconfs) == len(iconfs):
        raise ValidationError("all input lists must have equal length")
    grid = ThresholdGrid.linear(grid_size)
    acc = SweepAccumulator(shape=grid.shape)
    for p, g, d, cc, ic in zip(preds, gts, diffs, cconfs, iconfs):
        sample = UpqSample(
            pred=_as_panoptic(p), gt=_as_panoptic(g), difficulty=_as_difficulty(d),
            class_conf=_as_confidence(cc, "class"),
            inst_conf=_as_confidence(ic, "instance"))
        accumulate_sample(sample, grid, acc, rule=rule)
    rep = report_from_accumulator(acc, grid)
    return {
        "aupq": rep.aupq, "ausq": rep.ausq, "aurq": rep.aurq,
        "matrices": {
            f"{m}_{s}": getattr(rep, m)[s].tolist()
            for m in ("upq", "usq", "urq") for s in ("all", "stuff", "things")
        },
    }
