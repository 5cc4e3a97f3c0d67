"""Deterministic synthetic scene generation for metric verification.

Scenes are a pure function of the seed via a splittable 64-bit mix
generator (splitmix64), so the same spec reproduces bit-identical rasters
anywhere. Ground truth is built from Voronoi cells, the prediction is the
ground truth perturbed by configurable controls, and the difficulty map
marks the perturbed regions.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .baselines import ConfidenceRaster, constant_confidence, oracle_confidence
from .difficulty import (
    DIFFICULT_CLASS,
    DIFFICULT_INSTANCE,
    NOT_DIFFICULT,
    DifficultyRaster,
)
from .errors import ValidationError
from .rasters import (
    NO_SEGMENT,
    NUM_CLASSES,
    STUFF_CLASSES,
    UNKNOWN_CLASS,
    UNKNOWN_INSTANCE,
    PanopticRaster,
)

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """Counter-based splittable generator (splitmix64 finalizer)."""

    GAMMA = 0x9E3779B97F4A7C15

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + self.GAMMA) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return self.next_u64() / float(1 << 64)

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive."""
        if hi < lo:
            raise ValidationError(f"empty range [{lo}, {hi}]")
        return lo + self.next_u64() % (hi - lo + 1)

    def split(self) -> "SplitMix64":
        return SplitMix64(self.next_u64())


def _mix64_uniform(seed: int, counters: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 over counters, mapped to [0, 1)."""
    with np.errstate(over="ignore"):
        z = (np.uint64(seed) + (counters + np.uint64(1)) * np.uint64(SplitMix64.GAMMA))
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return z.astype(np.float64) / float(1 << 64)


@dataclass(frozen=True)
class SceneSpec:
    """Controls for one synthetic scene."""

    seed: int
    width: int = 64
    height: int = 64
    num_classes: int = 8            # classes drawn per scene (from the 19)
    min_instances: int = 1          # Voronoi sites per things class
    max_instances: int = 3
    jitter_px: int = 0              # rigid shift of the prediction
    class_flip_rate: float = 0.0    # per-segment class flip probability
    drop_rate: float = 0.0          # per-segment unlabel probability
    difficulty_rate: float = 0.0    # extra random difficult regions
    mark_errors_difficult: bool = False
    conf_mode: str = "constant"     # constant | oracle | random

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0 or self.width * self.height < 4:
            raise ValidationError("degenerate scene dimensions")
        if self.width > 4096 or self.height > 4096:
            raise ValidationError("scene dimensions too large")
        for rate in (self.class_flip_rate, self.drop_rate, self.difficulty_rate):
            if not 0.0 <= rate <= 1.0:
                raise ValidationError("rates must lie in [0, 1]")
        if self.conf_mode not in ("constant", "oracle", "random"):
            raise ValidationError(f"unknown conf_mode {self.conf_mode!r}")


@dataclass(frozen=True)
class Scene:
    gt: PanopticRaster
    difficulty: DifficultyRaster
    pred: PanopticRaster
    class_conf: ConfidenceRaster
    inst_conf: ConfidenceRaster


def _voronoi_gt(spec: SceneSpec, rng: SplitMix64) -> PanopticRaster:
    h, w = spec.height, spec.width
    classes = []
    pool = list(range(NUM_CLASSES))
    for _ in range(min(spec.num_classes, NUM_CLASSES)):
        classes.append(pool.pop(rng.randint(0, len(pool) - 1)))

    sites = []  # (y, x, class, segment)
    next_seg = 1
    for c in classes:
        n_sites = rng.randint(spec.min_instances, spec.max_instances)
        for _ in range(n_sites):
            y, x = rng.randint(0, h - 1), rng.randint(0, w - 1)
            if c in STUFF_CLASSES:
                sites.append((y, x, c, NO_SEGMENT))
            else:
                sites.append((y, x, c, next_seg))
                next_seg += 1

    ys, xs = np.mgrid[0:h, 0:w]
    dist = np.full((h, w), np.inf)
    class_ids = np.zeros((h, w), dtype=np.uint8)
    segment_ids = np.zeros((h, w), dtype=np.uint32)
    for y, x, c, s in sites:
        d = (ys - y) ** 2 + (xs - x) ** 2
        closer = d < dist
        dist[closer] = d[closer]
        class_ids[closer] = c
        segment_ids[closer] = s
    return PanopticRaster.from_arrays(class_ids, segment_ids)


def _segment_list(raster: PanopticRaster) -> list[tuple[int, int]]:
    keys = np.unique(raster.keys())
    out = []
    for k in keys:
        c = int(k) >> 32
        s = int(k) & 0xFFFFFFFF
        if c < NUM_CLASSES and s != UNKNOWN_INSTANCE:
            out.append((c, s))
    return out


def generate_scene(spec: SceneSpec) -> Scene:
    """Deterministic (gt, difficulty, pred, confidences) tuple for a spec."""
    rng = SplitMix64(spec.seed)
    gt = _voronoi_gt(spec, rng.split())

    h, w = spec.height, spec.width
    pred_c = gt.class_ids.copy()
    pred_s = gt.segment_ids.copy()

    # Per-segment perturbations: drop to unlabeled, or flip the class.
    pert_rng = rng.split()
    for c, s in _segment_list(gt):
        mask = (gt.class_ids == c) & (gt.segment_ids == s)
        if pert_rng.uniform() < spec.drop_rate:
            pred_c[mask] = UNKNOWN_CLASS
            pred_s[mask] = UNKNOWN_INSTANCE
        elif pert_rng.uniform() < spec.class_flip_rate:
            flip = (c + 1 + pert_rng.randint(0, NUM_CLASSES - 2)) % NUM_CLASSES
            pred_c[mask] = flip
            if flip in STUFF_CLASSES:
                pred_s[mask] = NO_SEGMENT
            # flipping stuff -> things keeps the (now unique) segment id
            elif c in STUFF_CLASSES:
                pred_s[mask] = 900 + c  # stays below the compact-encoding limit

    # Rigid shift introduces boundary errors everywhere.
    if spec.jitter_px > 0:
        dy = pert_rng.randint(-spec.jitter_px, spec.jitter_px)
        dx = pert_rng.randint(-spec.jitter_px, spec.jitter_px)
        pred_c = np.roll(pred_c, (dy, dx), axis=(0, 1))
        pred_s = np.roll(pred_s, (dy, dx), axis=(0, 1))

    # Stuff classes may collide after flips; merging is implicit (NO_SEGMENT).
    pred = PanopticRaster.from_arrays(pred_c, pred_s, validate=False)

    diff = np.full((h, w), NOT_DIFFICULT, dtype=np.uint8)
    if spec.mark_errors_difficult:
        class_err = pred.class_ids != gt.class_ids
        inst_err = ~class_err & (pred.segment_ids != gt.segment_ids)
        diff[class_err] = DIFFICULT_CLASS
        diff[inst_err] = DIFFICULT_INSTANCE
    if spec.difficulty_rate > 0.0:
        region_rng = rng.split()
        n_regions = int(round(spec.difficulty_rate * 8))
        for _ in range(n_regions):
            rh = region_rng.randint(1, max(1, h // 4))
            rw = region_rng.randint(1, max(1, w // 4))
            y0 = region_rng.randint(0, h - rh)
            x0 = region_rng.randint(0, w - rw)
            kind = DIFFICULT_CLASS if region_rng.uniform() < 0.5 else DIFFICULT_INSTANCE
            diff[y0 : y0 + rh, x0 : x0 + rw] = kind
    difficulty = DifficultyRaster(diff)

    if spec.conf_mode == "constant":
        class_conf, inst_conf = constant_confidence((h, w), 1.0)
    elif spec.conf_mode == "oracle":
        class_conf, inst_conf = oracle_confidence(difficulty)
    else:
        base = rng.split().state
        n = h * w
        c_arr = _mix64_uniform(base, np.arange(n, dtype=np.uint64)).reshape(h, w)
        i_arr = _mix64_uniform(base, np.arange(n, 2 * n, dtype=np.uint64)).reshape(h, w)
        class_conf = ConfidenceRaster.from_array(c_arr, "class")
        inst_conf = ConfidenceRaster.from_array(i_arr, "instance")

    return Scene(gt=gt, difficulty=difficulty, pred=pred,
                 class_conf=class_conf, inst_conf=inst_conf)


def scene_specs(base: SceneSpec, count: int) -> list[SceneSpec]:
    """Derive `count` specs with distinct seeds from a base spec."""
    return [replace(base, seed=base.seed + i) for i in range(count)]
