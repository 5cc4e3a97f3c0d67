"""Deterministic evaluation engine for panoptic segmentation and its
uncertainty-aware extension: PQ/SQ/RQ, UPQ/USQ/URQ, threshold-agnostic
AUPQ/AUSQ/AURQ, ternary difficulty derivation, confidence baselines, and a
brute-force verification oracle.
"""

from .api import (
    evaluate_aupq,
    evaluate_pq,
    evaluate_upq,
)
from .baselines import (
    ConfidenceRaster,
    MaskClassificationOutput,
    constant_confidence,
    marginal_confidences,
    oracle_confidence,
    panoptic_inference,
)
from .difficulty import (
    DIFFICULT_CLASS,
    DIFFICULT_INSTANCE,
    NOT_DIFFICULT,
    CoverageStats,
    DifficultyRaster,
    coverage_stats,
    derive_difficulty,
)
from .errors import (
    DimensionMismatchError,
    EngineError,
    FormatError,
    SchemaVersionError,
    StructuralIntegrityError,
    ValidationError,
)
from .matching import ClassStats, MatchLedger
from .pq import MetricReport, MIoUReport, compute_miou, compute_pq, match_segments_pq
from .rasters import (
    NO_SEGMENT,
    NUM_CLASSES,
    OTHER_CLASS,
    STUFF_CLASSES,
    THING_CLASSES,
    UNKNOWN_CLASS,
    UNKNOWN_INSTANCE,
    OverlapHistogram,
    PanopticRaster,
    SegmentTable,
    build_overlap_histogram,
    build_segment_table,
)
from .sweep import (
    SweepReport,
    ThresholdGrid,
    UpqSample,
    binarize,
    sweep,
    sweep_naive,
)
from .synth import Scene, SceneSpec, SplitMix64, generate_scene
from .oracle import brute_force_match
from .upq import (
    AugmentedPrediction,
    BinaryConfidenceMask,
    apply_confidence_masks,
    compute_upq,
    match_segments_upq,
)

__version__ = "0.1.0"
