"""Core label-raster model: class taxonomy, panoptic rasters, segment tables,
and the joint overlap histogram every metric is computed from.

A panoptic raster stores a per-pixel (class, segment) pair. Things pixels
carry an instance id >= 1 or UNKNOWN_INSTANCE; stuff pixels carry NO_SEGMENT,
so a stuff class forms at most one evaluable segment per raster. Sentinel
classes mark pixels without an evaluation label.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, StructuralIntegrityError

# 19 evaluation classes following the Cityscapes train-id taxonomy.
CLASS_NAMES = (
    "road", "sidewalk", "building", "wall", "fence", "pole",
    "traffic_light", "traffic_sign", "vegetation", "terrain", "sky",
    "person", "rider", "car", "truck", "bus", "train", "motorcycle",
    "bicycle",
)
NUM_CLASSES = 19
THING_CLASSES = frozenset(range(11, 19))  # person .. bicycle
STUFF_CLASSES = frozenset(range(0, 11))

# Sentinel class ids (outside the evaluation range).
OTHER_CLASS = 254    # labeled but outside the 19-class taxonomy; ignored
UNKNOWN_CLASS = 255  # class not discernible; ground-truth void

# Sentinel segment ids.
NO_SEGMENT = 0                   # stuff marker: the class itself is the segment
UNKNOWN_INSTANCE = 0xFFFFFFFF    # things pixel without an instance identity

# Internal segment-key encoding: key = class << 32 | segment (fits int64).
_KEY_SHIFT = 32
# Reserved pseudo-classes used only in augmented predictions (never on disk).
ANY_CLASS = 250
VOID_U_CLASS = 251
ANY_KEY = np.int64(ANY_CLASS) << _KEY_SHIFT
VOID_U_KEY = np.int64(VOID_U_CLASS) << _KEY_SHIFT


def is_thing(class_id: int) -> bool:
    return class_id in THING_CLASSES


def is_eval_class(class_id: int) -> bool:
    return 0 <= class_id < NUM_CLASSES


def make_key(class_id: int, segment_id: int) -> int:
    return (int(class_id) << _KEY_SHIFT) | int(segment_id)


def key_class(key: int) -> int:
    return int(key) >> _KEY_SHIFT


def key_segment(key: int) -> int:
    return int(key) & 0xFFFFFFFF


def encode_keys(class_ids: np.ndarray, segment_ids: np.ndarray) -> np.ndarray:
    return (class_ids.astype(np.int64) << _KEY_SHIFT) | segment_ids.astype(np.int64)


@dataclass(frozen=True)
class PanopticRaster:
    """Immutable per-pixel (class, segment) labeling."""

    class_ids: np.ndarray    # uint8, shape (H, W)
    segment_ids: np.ndarray  # uint32, shape (H, W)

    def __post_init__(self):
        if self.class_ids.shape != self.segment_ids.shape or self.class_ids.ndim != 2:
            raise DimensionMismatchError(
                f"class/segment shapes differ: {self.class_ids.shape} vs {self.segment_ids.shape}"
            )
        self.class_ids.setflags(write=False)
        self.segment_ids.setflags(write=False)

    @property
    def height(self) -> int:
        return self.class_ids.shape[0]

    @property
    def width(self) -> int:
        return self.class_ids.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.class_ids.shape

    def keys(self) -> np.ndarray:
        """Per-pixel int64 segment keys."""
        return encode_keys(self.class_ids, self.segment_ids)

    @classmethod
    def from_arrays(cls, class_ids, segment_ids, validate: bool = True) -> "PanopticRaster":
        class_ids = np.ascontiguousarray(class_ids, dtype=np.uint8)
        segment_ids = np.ascontiguousarray(segment_ids, dtype=np.uint32)
        raster = cls(class_ids, segment_ids)
        if validate:
            raster.validate()
        return raster

    def validate(self) -> None:
        """Check structural invariants; raises StructuralIntegrityError."""
        c = self.class_ids
        s = self.segment_ids
        eval_mask = c < NUM_CLASSES
        if not np.all(eval_mask | (c == OTHER_CLASS) | (c == UNKNOWN_CLASS)):
            bad = int(c[~(eval_mask | (c == OTHER_CLASS) | (c == UNKNOWN_CLASS))][0])
            raise StructuralIntegrityError(f"invalid class id {bad}")
        # unknown_class pixels implicitly carry unknown_instance
        if np.any((c == UNKNOWN_CLASS) & (s != UNKNOWN_INSTANCE)):
            raise StructuralIntegrityError("unknown_class pixel without unknown_instance")
        # stuff / other pixels carry NO_SEGMENT
        stuff_mask = np.isin(c, list(STUFF_CLASSES) + [OTHER_CLASS])
        if np.any(stuff_mask & (s != NO_SEGMENT)):
            raise StructuralIntegrityError("stuff pixel with a segment id")
        # things pixels carry an instance id >= 1 or UNKNOWN_INSTANCE
        thing_mask = eval_mask & ~np.isin(c, list(STUFF_CLASSES))
        if np.any(thing_mask & (s == NO_SEGMENT)):
            raise StructuralIntegrityError("things pixel without an instance id")
        # each things segment id maps to exactly one class
        tm = thing_mask & (s != UNKNOWN_INSTANCE)
        if tm.any():
            seg = s[tm].astype(np.int64)
            cls_ = c[tm].astype(np.int64)
            pair = np.unique(seg * 256 + cls_)
            seg_of_pair = pair // 256
            if np.unique(seg_of_pair).size != seg_of_pair.size:
                dup = int(seg_of_pair[np.flatnonzero(seg_of_pair[1:] == seg_of_pair[:-1])[0]])
                raise StructuralIntegrityError(
                    f"segment id {dup} spans multiple classes"
                )


@dataclass(frozen=True)
class SegmentTable:
    """Areas of every (class, segment) key present in one raster."""

    areas: dict[int, int]  # key -> pixel count

    def area(self, key: int) -> int:
        return self.areas[key]

    def __len__(self) -> int:
        return len(self.areas)

    def total_pixels(self) -> int:
        return sum(self.areas.values())


@dataclass(frozen=True)
class OverlapHistogram:
    """Sparse joint histogram of (pred key, gt key) pixel co-occurrence."""

    pred_keys: np.ndarray  # int64
    gt_keys: np.ndarray    # int64
    counts: np.ndarray     # int64
    shape: tuple[int, int] = field(default=(0, 0))

    def as_dict(self) -> dict[tuple[int, int], int]:
        return {
            (int(p), int(g)): int(n)
            for p, g, n in zip(self.pred_keys, self.gt_keys, self.counts)
        }

    def total(self) -> int:
        return int(self.counts.sum())

    def transpose(self) -> "OverlapHistogram":
        return OverlapHistogram(self.gt_keys, self.pred_keys, self.counts, self.shape)


def build_segment_table(raster: PanopticRaster) -> SegmentTable:
    """Count pixels per distinct (class, segment) key, sentinels included."""
    keys, counts = np.unique(raster.keys(), return_counts=True)
    return SegmentTable({int(k): int(n) for k, n in zip(keys, counts)})


def build_overlap_histogram(pred: PanopticRaster, gt: PanopticRaster) -> OverlapHistogram:
    """Single-pass pixelwise co-occurrence of pred and gt segment keys."""
    if pred.shape != gt.shape:
        raise DimensionMismatchError(f"pred {pred.shape} vs gt {gt.shape}")
    return joint_histogram(pred.keys(), gt.keys())


def joint_histogram(pred_keys: np.ndarray, gt_keys: np.ndarray) -> OverlapHistogram:
    """Joint histogram over two same-shaped int64 key rasters."""
    if pred_keys.shape != gt_keys.shape:
        raise DimensionMismatchError(f"{pred_keys.shape} vs {gt_keys.shape}")
    shape = pred_keys.shape
    pu, pi = np.unique(pred_keys.ravel(), return_inverse=True)
    gu, gi = np.unique(gt_keys.ravel(), return_inverse=True)
    joint = pi.astype(np.int64) * len(gu) + gi
    counts = np.bincount(joint, minlength=len(pu) * len(gu))
    nz = np.flatnonzero(counts)
    return OverlapHistogram(
        pred_keys=pu[nz // len(gu)],
        gt_keys=gu[nz % len(gu)],
        counts=counts[nz].astype(np.int64),
        shape=(shape[0], shape[1]) if len(shape) == 2 else (0, int(np.prod(shape))),
    )
