"""Threshold-agnostic evaluation over a grid of confidence thresholds.

Each grid cell binarizes the class/instance confidence rasters at one
threshold pair and evaluates UPQ on the whole dataset; the cell values are
averaged into AUPQ/AUSQ/AURQ. The incremental engine never rescans pixels
per cell: every pixel is binned once by the two thresholds it crosses and
per-cell overlap histograms are recovered with 2-D suffix sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .baselines import ConfidenceRaster
from .difficulty import DIFFICULT_CLASS, DIFFICULT_INSTANCE, DifficultyRaster
from .errors import ValidationError
from .matching import ClassStats, match_entries
from .pq import MetricReport, report_from_stats
from .rasters import ANY_KEY, NUM_CLASSES, VOID_U_KEY, PanopticRaster
from .upq import BinaryConfidenceMask, apply_confidence_masks, match_segments_upq

DEFAULT_GRID_SIZE = 16


@dataclass(frozen=True)
class ThresholdGrid:
    """Strictly increasing class/instance thresholds in [0, 1]."""

    class_thresholds: np.ndarray
    inst_thresholds: np.ndarray

    def __post_init__(self):
        for t in (self.class_thresholds, self.inst_thresholds):
            if t.ndim != 1 or t.size < 1:
                raise ValidationError("threshold lists must be non-empty 1-D")
            if t.min() < 0.0 or t.max() > 1.0:
                raise ValidationError("thresholds must lie in [0, 1]")
            if np.any(np.diff(t) <= 0):
                raise ValidationError("thresholds must be strictly increasing")
            t.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.class_thresholds.size, self.inst_thresholds.size)

    @classmethod
    def linear(cls, size: int = DEFAULT_GRID_SIZE) -> "ThresholdGrid":
        """Equispaced thresholds on [0, 1] inclusive (k / (size - 1))."""
        if size < 1:
            raise ValidationError("grid size must be >= 1")
        t = np.linspace(0.0, 1.0, size) if size > 1 else np.array([0.0])
        return cls(t, t.copy())


def binarize(conf: ConfidenceRaster, threshold: float, rule: str = "ge") -> BinaryConfidenceMask:
    """A pixel is confident iff its score is >= the threshold (or > under "gt")."""
    if not 0.0 <= threshold <= 1.0:
        raise ValidationError(f"threshold {threshold} outside [0, 1]")
    if rule == "ge":
        confident = conf.scores >= threshold
    elif rule == "gt":
        confident = conf.scores > threshold
    else:
        raise ValidationError(f"unknown binarization rule {rule!r}")
    return BinaryConfidenceMask(confident=confident, kind=conf.kind)


@dataclass(frozen=True)
class UpqSample:
    """One evaluation sample for the UPQ/AUPQ pipelines."""

    pred: PanopticRaster
    gt: PanopticRaster
    difficulty: DifficultyRaster
    class_conf: ConfidenceRaster | None = None
    inst_conf: ConfidenceRaster | None = None


@dataclass
class SweepAccumulator:
    """Per-cell, per-class accumulated matching statistics."""

    shape: tuple[int, int]
    iou_sum: np.ndarray = field(init=False)
    tp: np.ndarray = field(init=False)
    fp: np.ndarray = field(init=False)
    fn: np.ndarray = field(init=False)

    def __post_init__(self):
        tc, ti = self.shape
        self.iou_sum = np.zeros((tc, ti, NUM_CLASSES))
        self.tp = np.zeros((tc, ti, NUM_CLASSES), dtype=np.int64)
        self.fp = np.zeros((tc, ti, NUM_CLASSES), dtype=np.int64)
        self.fn = np.zeros((tc, ti, NUM_CLASSES), dtype=np.int64)

    def add(self, k: int, l: int, stats: dict[int, ClassStats]) -> None:
        for c, st in stats.items():
            self.iou_sum[k, l, c] += st.iou_sum
            self.tp[k, l, c] += st.tp
            self.fp[k, l, c] += st.fp
            self.fn[k, l, c] += st.fn

    def merge(self, other: "SweepAccumulator") -> None:
        if other.shape != self.shape:
            raise ValidationError("cannot merge accumulators of different grids")
        self.iou_sum += other.iou_sum
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn

    def cell_stats(self, k: int, l: int) -> dict[int, ClassStats]:
        out = {}
        for c in range(NUM_CLASSES):
            st = ClassStats(
                iou_sum=float(self.iou_sum[k, l, c]),
                tp=int(self.tp[k, l, c]),
                fp=int(self.fp[k, l, c]),
                fn=int(self.fn[k, l, c]),
            )
            if st.tp + st.fp + st.fn > 0:
                out[c] = st
        return out

    def cell_report(self, k: int, l: int) -> MetricReport:
        return report_from_stats(self.cell_stats(k, l), kind="upq")


@dataclass
class SweepReport:
    """Cell matrices of dataset-level UPQ/USQ/URQ plus their means."""

    grid: ThresholdGrid
    upq: dict[str, np.ndarray]  # split -> (Tc, Ti) matrix; splits all/stuff/things
    usq: dict[str, np.ndarray]
    urq: dict[str, np.ndarray]
    aupq: dict[str, float]
    ausq: dict[str, float]
    aurq: dict[str, float]


def report_from_accumulator(acc: SweepAccumulator, grid: ThresholdGrid) -> SweepReport:
    tc, ti = acc.shape
    mats = {m: {s: np.zeros((tc, ti)) for s in ("all", "stuff", "things")}
            for m in ("upq", "usq", "urq")}
    for k in range(tc):
        for l in range(ti):
            rep = acc.cell_report(k, l)
            for split, (pq, sq, rq) in {
                "all": (rep.pq_all, rep.sq_all, rep.rq_all),
                "stuff": (rep.pq_stuff, rep.sq_stuff, rep.rq_stuff),
                "things": (rep.pq_things, rep.sq_things, rep.rq_things),
            }.items():
                mats["upq"][split][k, l] = pq
                mats["usq"][split][k, l] = sq
                mats["urq"][split][k, l] = rq
    def exact_mean(m: np.ndarray) -> float:
        # exactly-rounded sum, so uniform grids average to the cell value bitwise
        return math.fsum(m.ravel().tolist()) / m.size

    return SweepReport(
        grid=grid,
        upq=mats["upq"], usq=mats["usq"], urq=mats["urq"],
        aupq={s: exact_mean(m) for s, m in mats["upq"].items()},
        ausq={s: exact_mean(m) for s, m in mats["usq"].items()},
        aurq={s: exact_mean(m) for s, m in mats["urq"].items()},
    )


# Static per-pixel routing outcomes, independent of the thresholds.
_ROUTE_ANY = 0
_ROUTE_VOID = 1
_ROUTE_KEEP = 2


def accumulate_sample(
    sample: UpqSample, grid: ThresholdGrid, acc: SweepAccumulator, rule: str = "ge"
) -> None:
    """Add one sample's per-cell ledgers to the accumulator incrementally.

    Pixels are binned once: bin index = number of thresholds at or below
    the pixel's score, so a pixel is confident at cell k iff k < bin. The
    augmented-prediction overlap histogram of any cell is then a suffix
    sum over (class bin, instance bin) of per-group 2-D histograms, where
    a group is a (pred key, gt key, CU routing, IU routing) combination.
    """
    if sample.class_conf is None or sample.inst_conf is None:
        raise ValidationError("sample is missing a confidence raster")
    if rule not in ("ge", "gt"):
        raise ValidationError(f"unknown binarization rule {rule!r}")
    pred, gt = sample.pred, sample.gt
    tc, ti = grid.shape

    # A pixel is confident at cell k iff k < bin index; "right" realizes the
    # >= rule, "left" the strict > rule.
    side = "right" if rule == "ge" else "left"
    bc = np.searchsorted(grid.class_thresholds, sample.class_conf.scores.ravel(), side=side)
    bi = np.searchsorted(grid.inst_thresholds, sample.inst_conf.scores.ravel(), side=side)

    diff = sample.difficulty.values.ravel()
    route_cu = np.where(diff == DIFFICULT_CLASS, _ROUTE_ANY, _ROUTE_VOID)
    gt_void = gt.class_ids.ravel() >= NUM_CLASSES
    correct = pred.class_ids.ravel() == gt.class_ids.ravel()
    hard = (diff == DIFFICULT_INSTANCE) | (diff == DIFFICULT_CLASS)
    route_iu = np.where(
        gt_void, _ROUTE_KEEP, np.where(correct & hard, _ROUTE_ANY, _ROUTE_VOID)
    )

    pk = pred.keys().ravel()
    gk = gt.keys().ravel()
    pu, pi = np.unique(pk, return_inverse=True)
    gu, gi = np.unique(gk, return_inverse=True)
    pair_code = pi.astype(np.int64) * len(gu) + gi
    group_code = (pair_code * 2 + route_cu) * 3 + route_iu
    groups, ginv = np.unique(group_code, return_inverse=True)
    n_groups = len(groups)

    # 2-D (class bin, instance bin) histogram per group.
    nbins = (tc + 1) * (ti + 1)
    flat = ginv * nbins + bc * (ti + 1) + bi
    hist = np.bincount(flat, minlength=n_groups * nbins).reshape(n_groups, tc + 1, ti + 1)

    # Suffix sums: ss[g, k, l] = sum of hist[g, bc >= k, bi >= l].
    ss = np.zeros((n_groups, tc + 2, ti + 2), dtype=np.int64)
    ss[:, : tc + 1, : ti + 1] = hist[:, ::-1, ::-1].cumsum(axis=1).cumsum(axis=2)[:, ::-1, ::-1]
    total = ss[:, 0, 0]

    # Decode group structure and precompute target histogram slots.
    g_route_iu = (groups % 3).astype(np.int64)
    g_route_cu = ((groups // 3) % 2).astype(np.int64)
    g_pair = groups // 6
    g_pk = pu[g_pair // len(gu)]
    g_gk = gu[g_pair % len(gu)]

    cu_pk = np.where(g_route_cu == _ROUTE_ANY, ANY_KEY, VOID_U_KEY)
    iu_pk = np.where(
        g_route_iu == _ROUTE_KEEP,
        g_pk,
        np.where(g_route_iu == _ROUTE_ANY, ANY_KEY, VOID_U_KEY),
    )
    target_pk = np.concatenate([g_pk, cu_pk, iu_pk])
    target_gk = np.concatenate([g_gk, g_gk, g_gk])
    tgt = np.stack([target_pk, target_gk])
    tgt_pairs, slot = np.unique(tgt, axis=1, return_inverse=True)
    slot_orig, slot_cu, slot_iu = np.split(slot, 3)
    n_targets = tgt_pairs.shape[1]
    tgt_list = [(int(tgt_pairs[0, i]), int(tgt_pairs[1, i])) for i in range(n_targets)]

    for k in range(tc):
        row = ss[:, k + 1, 0]
        n_cu = total - row
        for l in range(ti):
            n_orig = ss[:, k + 1, l + 1]
            n_iu = row - n_orig
            counts = np.zeros(n_targets, dtype=np.int64)
            np.add.at(counts, slot_orig, n_orig)
            np.add.at(counts, slot_cu, n_cu)
            np.add.at(counts, slot_iu, n_iu)
            entries = {tgt_list[i]: int(counts[i]) for i in np.flatnonzero(counts)}
            acc.add(k, l, match_entries(entries).ledger.class_stats())


def sweep(
    samples: Iterable[UpqSample], grid: ThresholdGrid | None = None, rule: str = "ge"
) -> SweepReport:
    """Dataset-level AUPQ: accumulate every cell over all samples, then average."""
    grid = grid or ThresholdGrid.linear()
    acc = SweepAccumulator(shape=grid.shape)
    n = 0
    for sample in samples:
        accumulate_sample(sample, grid, acc, rule=rule)
        n += 1
    if n == 0:
        raise ValidationError("sweep needs at least one sample")
    return report_from_accumulator(acc, grid)


def sweep_naive(
    samples: list[UpqSample], grid: ThresholdGrid | None = None, rule: str = "ge"
) -> SweepReport:
    """Reference sweep: one full evaluation per grid cell (test oracle)."""
    grid = grid or ThresholdGrid.linear()
    acc = SweepAccumulator(shape=grid.shape)
    for sample in samples:
        if sample.class_conf is None or sample.inst_conf is None:
            raise ValidationError("sample is missing a confidence raster")
        for k, t_class in enumerate(grid.class_thresholds):
            cmask = binarize(sample.class_conf, float(t_class), rule=rule)
            for l, t_inst in enumerate(grid.inst_thresholds):
                imask = binarize(sample.inst_conf, float(t_inst), rule=rule)
                aug = apply_confidence_masks(
                    sample.pred, sample.gt, sample.difficulty, cmask, imask
                )
                ledger, _ = match_segments_upq(aug, sample.gt)
                acc.add(k, l, ledger.class_stats())
    return report_from_accumulator(acc, grid)
