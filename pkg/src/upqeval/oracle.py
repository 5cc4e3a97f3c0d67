"""Brute-force reference matcher built on explicit pixel sets.

Deliberately shares no code with the histogram-based fast path: segments
are materialized as Python sets of pixel indices and every rule is applied
by direct set algebra. Only suitable for small scenes.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .matching import MatchLedger
from .rasters import (
    ANY_KEY,
    NUM_CLASSES,
    OTHER_CLASS,
    UNKNOWN_CLASS,
    UNKNOWN_INSTANCE,
    VOID_U_KEY,
    PanopticRaster,
)
from .upq import AugmentedPrediction


def _pixel_sets(keys: np.ndarray) -> dict[int, set[int]]:
    flat = keys.ravel()
    out: dict[int, set[int]] = {}
    for k in np.unique(flat):
        out[int(k)] = set(np.flatnonzero(flat == k).tolist())
    return out


def _cls(key: int) -> int:
    return key >> 32


def _seg(key: int) -> int:
    return key & 0xFFFFFFFF


def _is_segment(key: int) -> bool:
    return _cls(key) < NUM_CLASSES and _seg(key) != UNKNOWN_INSTANCE


def _void_pixels(sets: dict[int, set[int]]) -> set[int]:
    void: set[int] = set()
    for k, px in sets.items():
        if _cls(k) in (UNKNOWN_CLASS, OTHER_CLASS):
            void |= px
    return void


def brute_force_match(
    pred: PanopticRaster,
    gt: PanopticRaster,
    mode: str = "pq",
    aug: AugmentedPrediction | None = None,
) -> MatchLedger:
    """Reference matching ledger computed from raw pixel sets."""
    if pred.shape != gt.shape:
        raise ValidationError("shape mismatch")
    if mode not in ("pq", "upq"):
        raise ValidationError(f"unknown mode {mode!r}")
    if mode == "upq":
        if aug is None:
            raise ValidationError("upq mode requires the augmented prediction")
        pred_keys = aug.keys
    else:
        pred_keys = pred.keys()
    if pred.shape[0] * pred.shape[1] > 256 * 256:
        raise ValidationError("brute force is limited to scenes up to 256x256")

    psets = _pixel_sets(pred_keys)
    gsets = _pixel_sets(gt.keys())
    gt_void = _void_pixels(gsets)
    any_px = psets.get(int(ANY_KEY), set())

    pred_segs = {k: px for k, px in psets.items()
                 if k not in (int(ANY_KEY), int(VOID_U_KEY)) and _is_segment(k)}
    gt_segs = {k: px for k, px in gsets.items() if _is_segment(k)}
    gt_crowd = {k: px for k, px in gsets.items()
                if _cls(k) < NUM_CLASSES and _seg(k) == UNKNOWN_INSTANCE}

    ledger = MatchLedger()
    matched_p: set[int] = set()
    matched_g: set[int] = set()

    # Step 1: strict IoU > 0.5 with ANY pixels removed from both sides.
    for p in sorted(pred_segs):
        for g in sorted(gt_segs):
            if _cls(p) != _cls(g) or g in matched_g or p in matched_p:
                continue
            ppx = pred_segs[p]  # contains no ANY pixels by construction
            gpx = gt_segs[g] - any_px
            inter = ppx & gpx
            if not inter:
                continue
            union = (ppx | gpx) - (ppx & gt_void)
            if len(inter) / len(union) > 0.5:
                matched_p.add(p)
                matched_g.add(g)
                # Fill the ANY pixels inside g and recompute the final IoU.
                filled_p = ppx | (gt_segs[g] & any_px)
                inter_f = filled_p & gt_segs[g]
                union_f = (filled_p | gt_segs[g]) - (filled_p & gt_void)
                ledger.add_match(_cls(g), p, g, len(inter_f) / len(union_f))

    consumed = set()
    for g in matched_g:
        consumed |= gt_segs[g] & any_px
    remaining_any = any_px - consumed

    # Step 2: unmatched gt segments majority-covered by remaining ANY pixels.
    for g in sorted(gt_segs):
        if g in matched_g:
            continue
        cover = gt_segs[g] & remaining_any
        if 2 * len(cover) > len(gt_segs[g]):
            matched_g.add(g)
            # Synthetic prediction is exactly the covered region.
            new_p = cover
            inter_f = new_p & gt_segs[g]
            union_f = (new_p | gt_segs[g]) - remaining_any.difference(cover) - (new_p & gt_void)
            ledger.add_match(_cls(g), g, g, len(inter_f) / len(union_f))

    # FP: unmatched predictions not majority-covered by void/crowd pixels.
    for p in sorted(pred_segs):
        if p in matched_p:
            continue
        ignore = pred_segs[p] & gt_void
        for ck, cpx in gt_crowd.items():
            if _cls(ck) == _cls(p):
                ignore |= pred_segs[p] & cpx
        if 2 * len(ignore) > len(pred_segs[p]):
            continue
        ledger.add_fp(_cls(p))

    # FN: whatever gt segments stayed unmatched.
    for g in sorted(gt_segs):
        if g not in matched_g:
            ledger.add_fn(_cls(g))

    return ledger


def ledgers_equal(a: MatchLedger, b: MatchLedger, iou_tol: float = 1e-12) -> bool:
    """Exact count equality plus IoU-sum agreement within tolerance."""
    sa, sb = a.class_stats(), b.class_stats()
    if set(sa) != set(sb):
        return False
    for c in sa:
        x, y = sa[c], sb[c]
        if (x.tp, x.fp, x.fn) != (y.tp, y.fp, y.fn):
            return False
        if abs(x.iou_sum - y.iou_sum) > iou_tol:
            return False
    return True
