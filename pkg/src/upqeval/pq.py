"""Standard panoptic quality and mIoU."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, StructuralIntegrityError
from .matching import ClassStats, MatchLedger, match_entries
from .rasters import (
    ANY_CLASS,
    NUM_CLASSES,
    STUFF_CLASSES,
    VOID_U_CLASS,
    OverlapHistogram,
    PanopticRaster,
    SegmentTable,
    key_class,
)


@dataclass
class ClassMetrics:
    pq: float | None
    sq: float | None
    rq: float | None
    iou_sum: float
    tp: int
    fp: int
    fn: int


@dataclass
class MetricReport:
    """Per-class and aggregated PQ/SQ/RQ (or UPQ/USQ/URQ) values."""

    kind: str  # "pq" or "upq"
    per_class: dict[int, ClassMetrics]
    pq_all: float
    sq_all: float
    rq_all: float
    pq_stuff: float
    sq_stuff: float
    rq_stuff: float
    pq_things: float
    sq_things: float
    rq_things: float
    n_valid_all: int
    n_valid_stuff: int
    n_valid_things: int


def _class_metrics(st: ClassStats) -> ClassMetrics | None:
    denom = st.tp + 0.5 * st.fp + 0.5 * st.fn
    if denom == 0:
        return None
    pq = st.iou_sum / denom
    rq = st.tp / denom
    sq = st.iou_sum / st.tp if st.tp > 0 else None
    return ClassMetrics(pq=pq, sq=sq, rq=rq, iou_sum=st.iou_sum, tp=st.tp, fp=st.fp, fn=st.fn)


def report_from_stats(stats: dict[int, ClassStats], kind: str = "pq") -> MetricReport:
    """Apply the PQ formula per class and average over valid classes.

    A class is valid when it has at least one TP, FP, or FN in the
    accumulated ledger; all other classes are excluded from the means.
    """
    per_class = {}
    for c in sorted(stats):
        cm = _class_metrics(stats[c])
        if cm is not None:
            per_class[c] = cm

    def mean(classes) -> tuple[float, float, float, int]:
        sel = [per_class[c] for c in classes if c in per_class]
        if not sel:
            return 0.0, 0.0, 0.0, 0
        n = len(sel)
        pq = sum(m.pq for m in sel) / n
        sq = sum((m.sq or 0.0) for m in sel) / n
        rq = sum(m.rq for m in sel) / n
        return pq, sq, rq, n

    pq_a, sq_a, rq_a, n_a = mean(range(NUM_CLASSES))
    pq_s, sq_s, rq_s, n_s = mean(sorted(STUFF_CLASSES))
    pq_t, sq_t, rq_t, n_t = mean(sorted(set(range(NUM_CLASSES)) - STUFF_CLASSES))
    return MetricReport(
        kind=kind, per_class=per_class,
        pq_all=pq_a, sq_all=sq_a, rq_all=rq_a,
        pq_stuff=pq_s, sq_stuff=sq_s, rq_stuff=rq_s,
        pq_things=pq_t, sq_things=sq_t, rq_things=rq_t,
        n_valid_all=n_a, n_valid_stuff=n_s, n_valid_things=n_t,
    )


def match_segments_pq(
    hist: OverlapHistogram,
    pred_table: SegmentTable | None = None,
    gt_table: SegmentTable | None = None,
) -> MatchLedger:
    """Strict IoU > 0.5 matching with void/crowd ignore rules.

    Segment tables are accepted for cross-checking areas against the
    histogram marginals; the histogram alone determines the result.
    """
    entries = hist.as_dict()
    for (p, _g) in entries:
        if key_class(p) in (ANY_CLASS, VOID_U_CLASS):
            raise StructuralIntegrityError("augmented keys in a standard PQ histogram")
    if pred_table is not None:
        _check_marginals(entries, pred_table, axis=0)
    if gt_table is not None:
        _check_marginals(entries, gt_table, axis=1)
    return match_entries(entries).ledger


def _check_marginals(entries, table: SegmentTable, axis: int) -> None:
    marg: dict[int, int] = {}
    for (p, g), n in entries.items():
        k = p if axis == 0 else g
        marg[k] = marg.get(k, 0) + n
    if marg != table.areas:
        raise StructuralIntegrityError("segment table disagrees with histogram marginals")


def compute_pq(ledger: MatchLedger) -> MetricReport:
    return report_from_stats(ledger.class_stats(), kind="pq")


@dataclass
class MIoUReport:
    per_class: dict[int, float]  # classes with nonzero union
    mean: float
    confusion: np.ndarray  # (NUM_CLASSES, NUM_CLASSES + 1); last col = invalid pred


def compute_miou(pred: PanopticRaster, gt: PanopticRaster) -> MIoUReport:
    """Confusion-matrix IoU per class over non-void ground-truth pixels."""
    if pred.shape != gt.shape:
        raise DimensionMismatchError(f"pred {pred.shape} vs gt {gt.shape}")
    gc = gt.class_ids.ravel()
    pc = pred.class_ids.ravel()
    valid = gc < NUM_CLASSES
    gc = gc[valid].astype(np.int64)
    pc = pc[valid].astype(np.int64)
    pc = np.where(pc < NUM_CLASSES, pc, NUM_CLASSES)  # bucket invalid predictions
    cm = np.bincount(gc * (NUM_CLASSES + 1) + pc, minlength=NUM_CLASSES * (NUM_CLASSES + 1))
    cm = cm.reshape(NUM_CLASSES, NUM_CLASSES + 1)
    per_class = {}
    for c in range(NUM_CLASSES):
        inter = int(cm[c, c])
        union = int(cm[c].sum()) + int(cm[:, c].sum()) - inter
        if union > 0:
            per_class[c] = inter / union
    mean = sum(per_class.values()) / len(per_class) if per_class else 0.0
    return MIoUReport(per_class=per_class, mean=mean, confusion=cm)
