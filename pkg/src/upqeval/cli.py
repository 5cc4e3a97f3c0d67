"""Command line harness.

Subcommands: evaluate, derive-difficulty, synth, selfcheck, report-diff.
Exit codes: 0 success, 2 input/format errors, 3 validation errors,
1 anything unexpected.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .difficulty import derive_difficulty
from .errors import FormatError, ValidationError
from .evaluate import (
    EvalConfig,
    SampleError,
    default_workers,
    evaluate_manifest_path,
)
from .figures import render_report_figures, write_report_csv
from .io_formats import (
    DatasetManifest,
    SampleRecord,
    dump_report_json,
    load_panoptic_compact,
    load_report,
    save_confidence,
    save_difficulty,
    save_manifest,
    save_panoptic_compact,
)
from .matching import match_entries
from .oracle import brute_force_match, ledgers_equal
from .rasters import build_overlap_histogram
from .sweep import binarize
from .synth import SceneSpec, generate_scene
from .upq import apply_confidence_masks, match_segments_upq

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_INPUT = 2
EXIT_VALIDATION = 3


def _add_evaluate(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("evaluate", help="evaluate a dataset manifest")
    p.add_argument("manifest", type=Path)
    p.add_argument("--metric", choices=("pq", "upq", "aupq", "miou"), default="pq")
    p.add_argument("--grid-size", type=int, default=16,
                   help="thresholds per axis for the aupq sweep")
    p.add_argument("--binarization", choices=("ge", "gt"), default="ge")
    p.add_argument("--aggregation", choices=("dataset", "per-image-mean"),
                   default="dataset")
    p.add_argument("--workers", type=int, default=None,
                   help="parallel workers (default: $UPQEVAL_WORKERS or 1)")
    p.add_argument("--condition", default=None,
                   help="restrict evaluation to one condition tag")
    p.add_argument("--baseline", default="none",
                   help="confidence source: none | constant:<v> | marginal | oracle")
    p.add_argument("--class-threshold", type=float, default=0.5)
    p.add_argument("--inst-threshold", type=float, default=0.5)
    p.add_argument("--out", type=Path, default=None, help="report JSON path")
    p.add_argument("--csv", type=Path, default=None, help="delimited summary path")
    p.add_argument("--figures", type=Path, default=None,
                   help="directory for rendered figures")
    p.set_defaults(func=_cmd_evaluate)


def _cmd_evaluate(args) -> int:
    config = EvalConfig(
        metric=args.metric,
        grid_size=args.grid_size,
        binarization=args.binarization,
        aggregation=args.aggregation,
        workers=args.workers if args.workers is not None else default_workers(),
        condition=args.condition,
        baseline=args.baseline,
        class_threshold=args.class_threshold,
        inst_threshold=args.inst_threshold,
    )
    payload = evaluate_manifest_path(args.manifest, config)
    text = dump_report_json(payload)
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    if args.csv is not None:
        write_report_csv(payload, args.csv)
    if args.figures is not None:
        for path in render_report_figures(payload, args.figures):
            print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


def _add_derive(sub) -> None:
    p = sub.add_parser("derive-difficulty",
                       help="derive ternary difficulty maps from H1/H2 label dirs")
    p.add_argument("h1_dir", type=Path)
    p.add_argument("h2_dir", type=Path)
    p.add_argument("out_dir", type=Path)
    p.set_defaults(func=_cmd_derive)


def _cmd_derive(args) -> int:
    h1_files = sorted(args.h1_dir.glob("*.png"))
    if not h1_files:
        raise FormatError(f"no .png rasters in {args.h1_dir}")
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for h1_path in h1_files:
        h2_path = args.h2_dir / h1_path.name
        if not h2_path.exists():
            raise ValidationError(f"missing H2 counterpart for {h1_path.name}")
        diff = derive_difficulty(
            load_panoptic_compact(h1_path), load_panoptic_compact(h2_path))
        save_difficulty(diff, args.out_dir / h1_path.name)
    print(f"derived {len(h1_files)} difficulty maps -> {args.out_dir}")
    return EXIT_OK


def _add_synth(sub) -> None:
    p = sub.add_parser("synth", help="generate synthetic scenes with a manifest")
    p.add_argument("out_dir", type=Path)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--num-classes", type=int, default=8)
    p.add_argument("--jitter-px", type=int, default=2)
    p.add_argument("--class-flip-rate", type=float, default=0.2)
    p.add_argument("--drop-rate", type=float, default=0.1)
    p.add_argument("--difficulty-rate", type=float, default=0.3)
    p.add_argument("--mark-errors-difficult", action="store_true")
    p.add_argument("--conf-mode", choices=("constant", "oracle", "random"),
                   default="oracle")
    p.set_defaults(func=_cmd_synth)


def _cmd_synth(args) -> int:
    out = args.out_dir
    for sub_dir in ("pred", "gt", "difficulty", "class_conf", "inst_conf"):
        (out / sub_dir).mkdir(parents=True, exist_ok=True)
    records = []
    for i in range(args.count):
        spec = SceneSpec(
            seed=args.seed + i,
            width=args.width,
            height=args.height,
            num_classes=args.num_classes,
            jitter_px=args.jitter_px,
            class_flip_rate=args.class_flip_rate,
            drop_rate=args.drop_rate,
            difficulty_rate=args.difficulty_rate,
            mark_errors_difficult=args.mark_errors_difficult,
            conf_mode=args.conf_mode,
        )
        scene = generate_scene(spec)
        name = f"scene_{i:04d}.png"
        save_panoptic_compact(scene.pred, out / "pred" / name)
        save_panoptic_compact(scene.gt, out / "gt" / name)
        save_difficulty(scene.difficulty, out / "difficulty" / name)
        save_confidence(scene.class_conf, out / "class_conf" / name)
        save_confidence(scene.inst_conf, out / "inst_conf" / name)
        records.append(SampleRecord(
            sample_id=f"scene_{i:04d}",
            prediction=f"pred/{name}",
            ground_truth=f"gt/{name}",
            difficulty=f"difficulty/{name}",
            class_conf=f"class_conf/{name}",
            inst_conf=f"inst_conf/{name}",
        ))
    save_manifest(DatasetManifest(samples=records, root=out), out / "manifest.json")
    print(f"wrote {args.count} scenes + manifest.json -> {out}")
    return EXIT_OK


def _add_selfcheck(sub) -> None:
    p = sub.add_parser("selfcheck",
                       help="compare the fast matcher against the brute-force oracle")
    p.add_argument("--scenes", type=int, default=100)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=_cmd_selfcheck)


def _cmd_selfcheck(args) -> int:
    rng = np.random.default_rng(args.seed)
    threshold_pairs = [(0.0, 0.0), (0.0, 0.5), (0.5, 0.0), (0.5, 0.5), (1.0, 1.0),
                       (0.25, 0.75), (0.75, 0.25), (1.0, 0.0), (0.0, 1.0)]
    pq_diffs = 0
    upq_diffs = 0
    for i in range(args.scenes):
        size = int(rng.integers(32, 97))
        spec = SceneSpec(
            seed=args.seed * 100_000 + i, width=size, height=size,
            jitter_px=int(rng.integers(0, 4)),
            class_flip_rate=float(rng.uniform(0, 0.5)),
            drop_rate=float(rng.uniform(0, 0.3)),
            difficulty_rate=float(rng.uniform(0, 1.0)),
            mark_errors_difficult=bool(rng.integers(0, 2)),
            conf_mode="random",
        )
        scene = generate_scene(spec)
        fast = match_entries(
            build_overlap_histogram(scene.pred, scene.gt).as_dict()).ledger
        slow = brute_force_match(scene.pred, scene.gt, mode="pq")
        if not ledgers_equal(fast, slow):
            pq_diffs += 1
        for tc, ti in threshold_pairs[:3]:
            aug = apply_confidence_masks(
                scene.pred, scene.gt, scene.difficulty,
                binarize(scene.class_conf, tc), binarize(scene.inst_conf, ti))
            fast_u, _ = match_segments_upq(aug, scene.gt)
            slow_u = brute_force_match(scene.pred, scene.gt, mode="upq", aug=aug)
            if not ledgers_equal(fast_u, slow_u):
                upq_diffs += 1
    ok = pq_diffs == 0 and upq_diffs == 0
    print(f"pq oracle agreement over {args.scenes} scenes: "
          f"{'PASS' if pq_diffs == 0 else 'FAIL'} ({pq_diffs} diffs)")
    print(f"upq oracle agreement over {args.scenes} scenes: "
          f"{'PASS' if upq_diffs == 0 else 'FAIL'} ({upq_diffs} diffs)")
    return EXIT_OK if ok else EXIT_VALIDATION


def _add_report_diff(sub) -> None:
    p = sub.add_parser("report-diff", help="compare two report files numerically")
    p.add_argument("report_a", type=Path)
    p.add_argument("report_b", type=Path)
    p.add_argument("--tolerance", type=float, default=1e-12)
    p.set_defaults(func=_cmd_report_diff)


def _numeric_leaves(obj, prefix=""):
    if isinstance(obj, dict):
        for k in sorted(obj):
            yield from _numeric_leaves(obj[k], f"{prefix}.{k}")
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _numeric_leaves(v, f"{prefix}[{i}]")
    elif isinstance(obj, (int, float)) and not isinstance(obj, bool):
        yield prefix, float(obj)


def _cmd_report_diff(args) -> int:
    a = dict(_numeric_leaves(load_report(args.report_a)))
    b = dict(_numeric_leaves(load_report(args.report_b)))
    if set(a) != set(b):
        only_a = sorted(set(a) - set(b))[:5]
        only_b = sorted(set(b) - set(a))[:5]
        print(f"structure differs; only in A: {only_a}, only in B: {only_b}")
        return EXIT_VALIDATION
    worst_key, worst = "", 0.0
    for k in a:
        d = abs(a[k] - b[k])
        if d > worst:
            worst_key, worst = k, d
    print(f"max scalar difference: {worst:.3e} at {worst_key or '<none>'}")
    if worst > args.tolerance:
        return EXIT_VALIDATION
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="upqeval",
        description="Panoptic and uncertainty-aware panoptic evaluation engine",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_evaluate(sub)
    _add_derive(sub)
    _add_synth(sub)
    _add_selfcheck(sub)
    _add_report_diff(sub)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SampleError as exc:
        category = EXIT_VALIDATION if isinstance(exc.cause, ValidationError) else EXIT_INPUT
        print(f"error: {exc}", file=sys.stderr)
        return category
    except (FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
