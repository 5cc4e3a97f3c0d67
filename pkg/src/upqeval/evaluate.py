"""Dataset-scale evaluation: manifest loading, parallel per-sample work,
condition-stratified aggregation, and report assembly.

Per-sample results are merged by an associative, order-fixed reduction in
manifest order, so the report is byte-identical for any worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .baselines import constant_confidence, marginal_confidences, oracle_confidence
from .baselines import MaskClassificationOutput
from .difficulty import DifficultyRaster
from .errors import EngineError, FormatError, ValidationError
from .io_formats import (
    CONDITION_TAGS,
    SCHEMA_VERSION,
    DatasetManifest,
    SampleRecord,
    load_confidence,
    load_difficulty,
    load_manifest,
    load_panoptic_compact,
)
from .matching import ClassStats
from .pq import MetricReport, compute_miou, report_from_stats
from .rasters import CLASS_NAMES, NUM_CLASSES, build_overlap_histogram
from .matching import match_entries
from .sweep import (
    SweepAccumulator,
    ThresholdGrid,
    UpqSample,
    accumulate_sample,
    binarize,
    report_from_accumulator,
)
from .upq import apply_confidence_masks, match_segments_upq

METRICS = ("pq", "upq", "aupq", "miou")
AGGREGATIONS = ("dataset", "per-image-mean")
WORKERS_ENV = "UPQEVAL_WORKERS"


@dataclass
class EvalConfig:
    metric: str = "pq"
    grid_size: int = 16
    binarization: str = "ge"  # confident iff score >= threshold ("gt": strictly >)
    aggregation: str = "dataset"
    workers: int = 1
    condition: str | None = None
    baseline: str = "none"  # none | constant:<v> | marginal | oracle
    class_threshold: float = 0.5  # operating point for single-cell UPQ
    inst_threshold: float = 0.5

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValidationError(f"unknown metric {self.metric!r}")
        if self.aggregation not in AGGREGATIONS:
            raise ValidationError(f"unknown aggregation {self.aggregation!r}")
        if self.binarization not in ("ge", "gt"):
            raise ValidationError(f"unknown binarization rule {self.binarization!r}")
        if self.grid_size < 1:
            raise ValidationError("grid size must be >= 1")
        if self.workers < 1:
            raise ValidationError("worker count must be >= 1")
        if self.condition is not None and self.condition not in CONDITION_TAGS:
            raise ValidationError(f"unknown condition {self.condition!r}")
        if not (self.baseline in ("none", "marginal", "oracle")
                or self.baseline.startswith("constant:")):
            raise ValidationError(f"unknown baseline {self.baseline!r}")

    def grid(self) -> ThresholdGrid:
        return ThresholdGrid.linear(self.grid_size)


class SampleError(EngineError):
    """An error attributable to one sample; carries the sample id."""

    def __init__(self, sample_id: str, cause: Exception):
        super().__init__(f"sample {sample_id!r}: {cause}")
        self.sample_id = sample_id
        self.cause = cause


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"{WORKERS_ENV} must be an integer, got {env!r}")
    return 1


def _load_confidences(rec: SampleRecord, manifest: DatasetManifest, config: EvalConfig,
                      difficulty: DifficultyRaster | None, shape):
    if config.baseline.startswith("constant:"):
        value = float(config.baseline.split(":", 1)[1])
        return constant_confidence(shape, value)
    if config.baseline == "oracle":
        if difficulty is None:
            raise ValidationError("oracle baseline needs a difficulty raster")
        return oracle_confidence(difficulty)
    if config.baseline == "marginal":
        if rec.mask_outputs is None:
            raise ValidationError("marginal baseline needs per-sample mask_outputs")
        data = np.load(manifest.resolve(rec.mask_outputs))
        mc = MaskClassificationOutput(probs=data["probs"], masks=data["masks"])
        from .baselines import panoptic_inference

        return marginal_confidences(mc, panoptic_inference(mc))
    if rec.class_conf is None or rec.inst_conf is None:
        raise ValidationError("sample lacks confidence rasters and no baseline is set")
    return (
        load_confidence(manifest.resolve(rec.class_conf), "class"),
        load_confidence(manifest.resolve(rec.inst_conf), "instance"),
    )


@dataclass
class SampleResult:
    sample_id: str
    conditions: list[str]
    # metric-dependent payloads
    pq_stats: dict[int, ClassStats] | None = None
    sweep_acc: SweepAccumulator | None = None
    confusion: np.ndarray | None = None
    per_image_report: MetricReport | None = None


def evaluate_sample(rec: SampleRecord, manifest: DatasetManifest, config: EvalConfig) -> SampleResult:
    try:
        return _evaluate_sample(rec, manifest, config)
    except EngineError as exc:
        raise SampleError(rec.sample_id, exc) from exc
    except FileNotFoundError as exc:
        raise SampleError(rec.sample_id, FormatError(str(exc))) from exc


def _evaluate_sample(rec: SampleRecord, manifest: DatasetManifest, config: EvalConfig) -> SampleResult:
    pred = load_panoptic_compact(manifest.resolve(rec.prediction))
    gt = load_panoptic_compact(manifest.resolve(rec.ground_truth))
    result = SampleResult(sample_id=rec.sample_id, conditions=list(rec.conditions))

    if config.metric == "miou":
        result.confusion = compute_miou(pred, gt).confusion
        return result

    if config.metric == "pq":
        ledger = match_entries(build_overlap_histogram(pred, gt).as_dict()).ledger
        result.pq_stats = ledger.class_stats()
        if config.aggregation == "per-image-mean":
            result.per_image_report = report_from_stats(result.pq_stats, kind="pq")
        return result

    difficulty = None
    if rec.difficulty is not None:
        difficulty = load_difficulty(manifest.resolve(rec.difficulty))
    class_conf, inst_conf = _load_confidences(rec, manifest, config, difficulty, gt.shape)
    if difficulty is None:
        raise ValidationError("upq/aupq evaluation needs a difficulty raster")

    if config.metric == "upq":
        cmask = binarize(class_conf, config.class_threshold, rule=config.binarization)
        imask = binarize(inst_conf, config.inst_threshold, rule=config.binarization)
        aug = apply_confidence_masks(pred, gt, difficulty, cmask, imask)
        ledger, _ = match_segments_upq(aug, gt)
        result.pq_stats = ledger.class_stats()
        if config.aggregation == "per-image-mean":
            result.per_image_report = report_from_stats(result.pq_stats, kind="upq")
        return result

    # aupq
    acc = SweepAccumulator(shape=config.grid().shape)
    sample = UpqSample(pred=pred, gt=gt, difficulty=difficulty,
                       class_conf=class_conf, inst_conf=inst_conf)
    accumulate_sample(sample, config.grid(), acc, rule=config.binarization)
    result.sweep_acc = acc
    return result


@dataclass
class _Accumulated:
    pq_stats: dict[int, ClassStats] = field(default_factory=dict)
    sweep_acc: SweepAccumulator | None = None
    confusion: np.ndarray | None = None
    reports: list[MetricReport] = field(default_factory=list)
    n_samples: int = 0

    def add(self, res: SampleResult, config: EvalConfig) -> None:
        self.n_samples += 1
        if res.pq_stats is not None:
            for c, st in res.pq_stats.items():
                self.pq_stats.setdefault(c, ClassStats()).merge(st)
        if res.sweep_acc is not None:
            if self.sweep_acc is None:
                self.sweep_acc = SweepAccumulator(shape=res.sweep_acc.shape)
            self.sweep_acc.merge(res.sweep_acc)
        if res.confusion is not None:
            if self.confusion is None:
                self.confusion = np.zeros_like(res.confusion)
            self.confusion += res.confusion
        if res.per_image_report is not None:
            self.reports.append(res.per_image_report)


def _metric_section(acc: _Accumulated, config: EvalConfig) -> dict:
    kind = "upq" if config.metric in ("upq", "aupq") else "pq"
    if config.metric == "miou":
        cm = acc.confusion if acc.confusion is not None else np.zeros(
            (NUM_CLASSES, NUM_CLASSES + 1), dtype=np.int64)
        per_class = {}
        for c in range(NUM_CLASSES):
            inter = int(cm[c, c])
            union = int(cm[c].sum()) + int(cm[:, c].sum()) - inter
            if union > 0:
                per_class[CLASS_NAMES[c]] = inter / union
        mean = sum(per_class.values()) / len(per_class) if per_class else 0.0
        return {"per_class_iou": per_class, "miou": mean}

    if config.metric == "aupq":
        if acc.sweep_acc is None:
            raise ValidationError("no samples matched the evaluation filter")
        rep = report_from_accumulator(acc.sweep_acc, config.grid())
        return {
            "aupq": rep.aupq, "ausq": rep.ausq, "aurq": rep.aurq,
            "matrices": {
                f"{m}_{s}": getattr(rep, m)[s]
                for m in ("upq", "usq", "urq") for s in ("all", "stuff", "things")
            },
        }

    if config.aggregation == "per-image-mean":
        reps = acc.reports
        if not reps:
            raise ValidationError("no samples matched the evaluation filter")
        return {
            "aggregates": {
                s: {
                    kind: float(np.mean([getattr(r, f"pq_{s}") for r in reps])),
                    "sq": float(np.mean([getattr(r, f"sq_{s}") for r in reps])),
                    "rq": float(np.mean([getattr(r, f"rq_{s}") for r in reps])),
                    "n_images": len(reps),
                }
                for s in ("all", "stuff", "things")
            }
        }

    rep = report_from_stats(acc.pq_stats, kind=kind)
    per_class = {}
    for c, m in rep.per_class.items():
        per_class[CLASS_NAMES[c]] = {
            kind: m.pq, "sq": m.sq, "rq": m.rq,
            "iou_sum": m.iou_sum, "tp": m.tp, "fp": m.fp, "fn": m.fn,
        }
    return {
        "per_class": per_class,
        "aggregates": {
            "all": {kind: rep.pq_all, "sq": rep.sq_all, "rq": rep.rq_all,
                    "n_classes": rep.n_valid_all},
            "stuff": {kind: rep.pq_stuff, "sq": rep.sq_stuff, "rq": rep.rq_stuff,
                      "n_classes": rep.n_valid_stuff},
            "things": {kind: rep.pq_things, "sq": rep.sq_things, "rq": rep.rq_things,
                       "n_classes": rep.n_valid_things},
        },
    }


def _worker(args):
    rec, manifest, config = args
    return evaluate_sample(rec, manifest, config)


def evaluate_manifest(manifest: DatasetManifest, config: EvalConfig) -> dict:
    """Evaluate all manifest samples and build the report payload."""
    records = manifest.samples
    if config.condition is not None:
        records = [r for r in records if config.condition in r.conditions]
    if not records:
        raise ValidationError("no samples to evaluate")

    if config.workers == 1:
        results = [evaluate_sample(r, manifest, config) for r in records]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(
                _worker, [(r, manifest, config) for r in records], chunksize=1))

    overall = _Accumulated()
    per_tag: dict[str, _Accumulated] = {}
    for res in results:  # manifest order: deterministic reduction
        overall.add(res, config)
        for tag in res.conditions:
            per_tag.setdefault(tag, _Accumulated()).add(res, config)

    payload = {
        "schema_version": SCHEMA_VERSION,
        "metric": config.metric,
        "config": {
            "metric": config.metric,
            "grid_size": config.grid_size,
            "binarization": config.binarization,
            "aggregation": config.aggregation,
            "baseline": config.baseline,
            "condition": config.condition,
            "class_threshold": config.class_threshold,
            "inst_threshold": config.inst_threshold,
        },
        "n_samples": overall.n_samples,
        "overall": _metric_section(overall, config),
        "per_condition": {
            tag: _metric_section(acc, config) for tag, acc in sorted(per_tag.items())
        },
    }
    return payload


def evaluate_manifest_path(path, config: EvalConfig) -> dict:
    return evaluate_manifest(load_manifest(path), config)
