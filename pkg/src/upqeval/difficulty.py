"""Ternary difficulty maps and two-stage annotation statistics.

Difficulty is derived by comparing the image-only stage-1 annotation (H1)
with the auxiliary-data-refined final annotation (H2): pixels fully
consistent across stages are not difficult; instance-level disagreement
(or an unknown instance) marks difficult_instance; class-level
disagreement (or an unknown class) marks difficult_class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, StructuralIntegrityError, ValidationError
from .rasters import (
    NUM_CLASSES,
    STUFF_CLASSES,
    UNKNOWN_CLASS,
    UNKNOWN_INSTANCE,
    PanopticRaster,
    encode_keys,
)

NOT_DIFFICULT = 0
DIFFICULT_INSTANCE = 1
DIFFICULT_CLASS = 2


@dataclass(frozen=True)
class DifficultyRaster:
    """Per-pixel ternary difficulty map."""

    values: np.ndarray  # uint8 in {0, 1, 2}

    def __post_init__(self):
        if self.values.ndim != 2:
            raise DimensionMismatchError("difficulty raster must be 2-D")
        if self.values.max(initial=0) > DIFFICULT_CLASS:
            raise StructuralIntegrityError("difficulty values must be in {0, 1, 2}")
        self.values.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @classmethod
    def from_array(cls, values) -> "DifficultyRaster":
        return cls(np.ascontiguousarray(values, dtype=np.uint8))


def _instance_bijection(h1: PanopticRaster, h2: PanopticRaster) -> set[tuple[int, int]]:
    """Greedy maximal-overlap correspondence between things segments.

    Instance ids are annotation-tool artifacts with no meaning across
    stages, so segments are paired per class by descending pixel overlap,
    each segment used at most once. Ties break on key order so the result
    is deterministic.
    """
    thing1 = (h1.class_ids >= len(STUFF_CLASSES)) & (h1.class_ids < NUM_CLASSES) \
        & (h1.segment_ids != UNKNOWN_INSTANCE)
    thing2 = (h2.class_ids >= len(STUFF_CLASSES)) & (h2.class_ids < NUM_CLASSES) \
        & (h2.segment_ids != UNKNOWN_INSTANCE)
    both = thing1 & thing2 & (h1.class_ids == h2.class_ids)
    if not both.any():
        return set()
    k1 = encode_keys(h1.class_ids[both], h1.segment_ids[both])
    k2 = encode_keys(h2.class_ids[both], h2.segment_ids[both])
    pairs, counts = np.unique(np.stack([k1, k2]), axis=1, return_counts=True)
    order = np.lexsort((pairs[1], pairs[0], -counts))
    used1: set[int] = set()
    used2: set[int] = set()
    accepted: set[tuple[int, int]] = set()
    for idx in order:
        a, b = int(pairs[0, idx]), int(pairs[1, idx])
        if a in used1 or b in used2:
            continue
        used1.add(a)
        used2.add(b)
        accepted.add((a, b))
    return accepted


def derive_difficulty(h1: PanopticRaster, h2: PanopticRaster) -> DifficultyRaster:
    """Per-pixel ternary difficulty from the two annotation stages."""
    if h1.shape != h2.shape:
        raise DimensionMismatchError(f"H1 {h1.shape} vs H2 {h2.shape}")
    c1, c2 = h1.class_ids, h2.class_ids
    s1, s2 = h1.segment_ids, h2.segment_ids

    out = np.full(h1.shape, DIFFICULT_CLASS, dtype=np.uint8)
    same_class = (c1 == c2) & (c1 != UNKNOWN_CLASS) & (c2 != UNKNOWN_CLASS)

    # Same valid class, stuff or other: consistent.
    thing = same_class & (c2 >= len(STUFF_CLASSES)) & (c2 < NUM_CLASSES)
    out[same_class & ~thing] = NOT_DIFFICULT

    # Things pixels: unknown instance in either stage is difficult_instance;
    # otherwise consistency means the segment pair is in the overlap bijection.
    unk = thing & ((s1 == UNKNOWN_INSTANCE) | (s2 == UNKNOWN_INSTANCE))
    out[unk] = DIFFICULT_INSTANCE
    resolved = thing & ~unk
    if resolved.any():
        accepted = _instance_bijection(h1, h2)
        k1 = encode_keys(c1[resolved], s1[resolved])
        k2 = encode_keys(c2[resolved], s2[resolved])
        consistent = np.zeros(k1.shape, dtype=bool)
        for a, b in accepted:
            consistent |= (k1 == a) & (k2 == b)
        vals = np.where(consistent, NOT_DIFFICULT, DIFFICULT_INSTANCE).astype(np.uint8)
        out[resolved] = vals
    return DifficultyRaster(out)


@dataclass
class CoverageStats:
    """Per-condition pixel coverage and instance counts for the two stages."""

    per_condition: dict[str, dict[str, float]]
    # each entry: h1_fraction, added_h2_fraction, unlabeled_fraction,
    #             h1_instances, h2_instances


def _count_instances(raster: PanopticRaster) -> int:
    thing = (raster.class_ids >= len(STUFF_CLASSES)) & (raster.class_ids < NUM_CLASSES) \
        & (raster.segment_ids != UNKNOWN_INSTANCE)
    if not thing.any():
        return 0
    keys = encode_keys(raster.class_ids[thing], raster.segment_ids[thing])
    return int(np.unique(keys).size)


def coverage_stats(
    samples: list[tuple[PanopticRaster, PanopticRaster, list[str]]],
) -> CoverageStats:
    """Exact pixel fractions and instance counts per condition tag.

    Each sample is (h1, h2, condition tags). Fractions partition every
    pixel into: labeled already in stage 1, newly labeled in stage 2, and
    unlabeled in the final ground truth.
    """
    if not samples:
        raise ValidationError("coverage_stats needs at least one sample")
    acc: dict[str, dict[str, float]] = {}
    for h1, h2, tags in samples:
        if h1.shape != h2.shape:
            raise DimensionMismatchError(f"H1 {h1.shape} vs H2 {h2.shape}")
        lab1 = h1.class_ids != UNKNOWN_CLASS
        lab2 = h2.class_ids != UNKNOWN_CLASS
        n = lab1.size
        counts = {
            "h1_pixels": float(np.count_nonzero(lab1 & lab2)),
            "added_h2_pixels": float(np.count_nonzero(lab2 & ~lab1)),
            "unlabeled_pixels": float(np.count_nonzero(~lab2)),
            "total_pixels": float(n),
            "h1_instances": float(_count_instances(h1)),
            "h2_instances": float(_count_instances(h2)),
        }
        for tag in list(tags) + ["total"]:
            slot = acc.setdefault(tag, {k: 0.0 for k in counts})
            for k, v in counts.items():
                slot[k] += v
    out: dict[str, dict[str, float]] = {}
    for tag, slot in acc.items():
        total = slot["total_pixels"]
        out[tag] = {
            "h1_fraction": slot["h1_pixels"] / total,
            "added_h2_fraction": slot["added_h2_pixels"] / total,
            "unlabeled_fraction": slot["unlabeled_pixels"] / total,
            "h1_instances": int(slot["h1_instances"]),
            "h2_instances": int(slot["h2_instances"]),
        }
    return CoverageStats(per_condition=out)
