"""Segment matching from overlap histograms.

One generic matcher serves both standard and uncertainty-aware matching:
without ANY/VOID_U keys in the histogram it reduces exactly to the standard
strict IoU > 0.5 matching, so the identity between the two paths is
structural rather than numeric.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import StructuralIntegrityError
from .rasters import (
    ANY_CLASS,
    NUM_CLASSES,
    OTHER_CLASS,
    UNKNOWN_CLASS,
    UNKNOWN_INSTANCE,
    VOID_U_CLASS,
    key_class,
    key_segment,
    make_key,
)

Entries = dict[tuple[int, int], int]


@dataclass
class ClassStats:
    """Accumulated per-class matching statistics (the Eq.-style inputs)."""

    iou_sum: float = 0.0
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def merge(self, other: "ClassStats") -> None:
        self.iou_sum += other.iou_sum
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn


@dataclass
class MatchLedger:
    """Per-class matched pairs with IoU plus FP/FN counts."""

    matches: dict[int, list[tuple[int, int, float]]] = field(default_factory=dict)
    fp: dict[int, int] = field(default_factory=dict)
    fn: dict[int, int] = field(default_factory=dict)

    def add_match(self, class_id: int, pred_key: int, gt_key: int, iou: float) -> None:
        if not 0.0 < iou <= 1.0:
            raise StructuralIntegrityError(f"IoU {iou} outside (0, 1]")
        self.matches.setdefault(class_id, []).append((pred_key, gt_key, iou))

    def add_fp(self, class_id: int, n: int = 1) -> None:
        self.fp[class_id] = self.fp.get(class_id, 0) + n

    def add_fn(self, class_id: int, n: int = 1) -> None:
        self.fn[class_id] = self.fn.get(class_id, 0) + n

    def class_stats(self) -> dict[int, ClassStats]:
        stats: dict[int, ClassStats] = {}
        for c, pairs in self.matches.items():
            st = stats.setdefault(c, ClassStats())
            st.tp += len(pairs)
            st.iou_sum += sum(iou for _, _, iou in pairs)
        for c, n in self.fp.items():
            stats.setdefault(c, ClassStats()).fp += n
        for c, n in self.fn.items():
            stats.setdefault(c, ClassStats()).fn += n
        return stats

    def merge(self, other: "MatchLedger") -> None:
        for c, pairs in other.matches.items():
            self.matches.setdefault(c, []).extend(pairs)
        for c, n in other.fp.items():
            self.add_fp(c, n)
        for c, n in other.fn.items():
            self.add_fn(c, n)


@dataclass
class MatchResult:
    """Matcher output: the ledger plus enough detail to fill ANY pixels."""

    ledger: MatchLedger
    # step-1 matches: gt key -> pred key whose labels fill ANY pixels in gt
    step1_fills: dict[int, int]
    # step-2 matches: gt keys whose ANY overlap became a synthetic TP
    step2_gt: list[int]


def _is_gt_void(key: int) -> bool:
    c = key_class(key)
    return c in (UNKNOWN_CLASS, OTHER_CLASS)


def _is_real_segment(key: int) -> bool:
    return key_class(key) < NUM_CLASSES and key_segment(key) != UNKNOWN_INSTANCE


def _is_crowd(key: int) -> bool:
    return key_class(key) < NUM_CLASSES and key_segment(key) == UNKNOWN_INSTANCE


def match_entries(entries: Entries) -> MatchResult:
    """Match segments from a (pred key, gt key) -> count histogram.

    ANY pixels are wildcards: excluded from step-1 IoUs, filled into matched
    ground-truth segments afterwards, and able to form step-2 matches on
    their own when they cover more than half of an unmatched ground-truth
    segment. VOID_U pixels count as absent predictions. Without such keys
    this is plain strict-IoU matching with the usual void/crowd ignore rules.
    """
    pred_area: dict[int, int] = {}
    gt_full: dict[int, int] = {}
    any_in_gt: dict[int, int] = {}
    pred_void: dict[int, int] = {}
    pairs: list[tuple[int, int, int]] = []  # (pred key, gt key, intersection)

    for (p, g), n in entries.items():
        pc = key_class(p)
        if pc not in (ANY_CLASS, VOID_U_CLASS) and _is_real_segment(p):
            pred_area[p] = pred_area.get(p, 0) + n
            if _is_gt_void(g):
                pred_void[p] = pred_void.get(p, 0) + n
        if _is_real_segment(g) or _is_crowd(g):
            gt_full[g] = gt_full.get(g, 0) + n
            if pc == ANY_CLASS:
                any_in_gt[g] = any_in_gt.get(g, 0) + n
        if (
            _is_real_segment(g)
            and pc == key_class(g)
            and pc not in (ANY_CLASS, VOID_U_CLASS)
            and _is_real_segment(p)
        ):
            pairs.append((p, g, n))

    ledger = MatchLedger()
    matched_pred: set[int] = set()
    matched_gt: set[int] = set()
    step1_fills: dict[int, int] = {}

    # Step 1: strict IoU > 0.5 on the ANY-reduced supports.
    # Deterministic iteration order for reproducible ledgers.
    for p, g, inter in sorted(pairs):
        gt_eff = gt_full[g] - any_in_gt.get(g, 0)
        union = pred_area[p] + gt_eff - inter - pred_void.get(p, 0)
        if union <= 0 or inter / union <= 0.5:
            continue
        if p in matched_pred or g in matched_gt:
            raise StructuralIntegrityError("non-unique strict-IoU match")
        matched_pred.add(p)
        matched_gt.add(g)
        # Fill ANY pixels inside the matched gt segment, then recompute IoU.
        fill = any_in_gt.get(g, 0)
        inter_f = inter + fill
        union_f = (pred_area[p] + fill) + gt_full[g] - inter_f - pred_void.get(p, 0)
        ledger.add_match(key_class(g), p, g, inter_f / union_f)
        if fill:
            step1_fills[g] = p

    # Step 2: unmatched gt segments majority-covered by remaining ANY pixels.
    step2_gt: list[int] = []
    for g in sorted(gt_full):
        if g in matched_gt or not _is_real_segment(g):
            continue
        cover = any_in_gt.get(g, 0)
        if 2 * cover > gt_full[g]:
            matched_gt.add(g)
            step2_gt.append(g)
            # Synthetic prediction = ANY ∩ gt segment, carrying gt labels.
            ledger.add_match(key_class(g), g, g, cover / gt_full[g])

    # FP: unmatched predictions not majority-covered by ignore regions.
    for p in sorted(pred_area):
        if p in matched_pred:
            continue
        crowd_key = make_key(key_class(p), UNKNOWN_INSTANCE)
        ignore = pred_void.get(p, 0) + entries.get((p, crowd_key), 0)
        if 2 * ignore > pred_area[p]:
            continue
        ledger.add_fp(key_class(p))

    # FN: unmatched real gt segments.
    for g in sorted(gt_full):
        if g not in matched_gt and _is_real_segment(g):
            ledger.add_fn(key_class(g))

    return MatchResult(ledger=ledger, step1_fills=step1_fills, step2_gt=step2_gt)
