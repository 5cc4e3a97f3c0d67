"""Bit-exact serialization of rasters, manifests, and metric reports.

Panoptic rasters support two encodings:

* canonical (A): 3-channel 8-bit PNG where pixel id = R + 256*G + 65536*B,
  with a JSON sidecar mapping ids back to (class, segment); id 0 is
  reserved for unlabeled (unknown-class) pixels.
* compact (B): 16-bit single-channel PNG with id = class*1000 + instance;
  instance 0 marks stuff, instance 999 marks unknown_instance, 65535 marks
  unknown_class, and class 19 carries the other_class fallback.

Difficulty maps are 8-bit PNGs with values {0, 1, 2}; confidence rasters
are 16-bit PNGs with score = value / 65535.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .baselines import ConfidenceRaster
from .difficulty import DIFFICULT_CLASS, DifficultyRaster
from .errors import FormatError, SchemaVersionError, ValidationError
from .rasters import (
    NO_SEGMENT,
    NUM_CLASSES,
    OTHER_CLASS,
    STUFF_CLASSES,
    UNKNOWN_CLASS,
    UNKNOWN_INSTANCE,
    PanopticRaster,
)

SCHEMA_VERSION = 1
CONDITION_TAGS = ("clear", "fog", "rain", "snow", "day", "night")

_COMPACT_UNKNOWN_CLASS = 65535
_COMPACT_OTHER_CLASS = 19 * 1000
_COMPACT_UNKNOWN_INSTANCE = 999
_MAX_COMPACT_INSTANCE = 998


def _read_png(path: Path, bits: int) -> np.ndarray:
    try:
        img = Image.open(path)
        img.load()
    except Exception as exc:
        raise FormatError(f"{path}: not a readable image ({exc})") from exc
    arr = np.asarray(img)
    if bits == 8 and img.mode == "L":
        return arr.astype(np.uint8)
    if bits == 16 and img.mode in ("I", "I;16"):
        if arr.max(initial=0) > 65535 or arr.min(initial=0) < 0:
            raise FormatError(f"{path}: values exceed 16-bit range")
        return arr.astype(np.uint16)
    if bits == 24 and img.mode == "RGB":
        return arr.astype(np.uint8)
    raise FormatError(f"{path}: expected a {bits}-bit image, got mode {img.mode}")


def save_panoptic_canonical(raster: PanopticRaster, image_path, sidecar_path) -> None:
    """Encoding A: id-RGB image plus JSON segment sidecar."""
    keys, inverse = np.unique(raster.keys(), return_inverse=True)
    segments = []
    ids = np.zeros(len(keys), dtype=np.int64)
    next_id = 1
    for i, k in enumerate(keys):
        c = int(k) >> 32
        s = int(k) & 0xFFFFFFFF
        if c == UNKNOWN_CLASS:
            ids[i] = 0
            continue
        ids[i] = next_id
        if c == OTHER_CLASS:
            kind = "other"
        elif s == UNKNOWN_INSTANCE:
            kind = "unknown_instance"
        elif c in STUFF_CLASSES:
            kind = "stuff"
        else:
            kind = "thing"
        segments.append(
            {"id": next_id, "class_id": c, "segment_id": s, "kind": kind}
        )
        next_id += 1
    id_map = ids[inverse].reshape(raster.shape)
    rgb = np.zeros((*raster.shape, 3), dtype=np.uint8)
    rgb[..., 0] = id_map & 0xFF
    rgb[..., 1] = (id_map >> 8) & 0xFF
    rgb[..., 2] = (id_map >> 16) & 0xFF
    Image.fromarray(rgb, mode="RGB").save(image_path, format="PNG")
    payload = {"schema_version": SCHEMA_VERSION, "segments": segments}
    Path(sidecar_path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_panoptic_canonical(image_path, sidecar_path) -> PanopticRaster:
    rgb = _read_png(Path(image_path), bits=24)
    try:
        payload = json.loads(Path(sidecar_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"{sidecar_path}: unreadable sidecar ({exc})") from exc
    if payload.get("schema_version") != SCHEMA_VERSION:
        raise SchemaVersionError(f"{sidecar_path}: unsupported schema version")
    table: dict[int, tuple[int, int]] = {
        0: (UNKNOWN_CLASS, UNKNOWN_INSTANCE)
    }
    for seg in payload.get("segments", []):
        table[int(seg["id"])] = (int(seg["class_id"]), int(seg["segment_id"]))
    ids = (
        rgb[..., 0].astype(np.int64)
        + 256 * rgb[..., 1].astype(np.int64)
        + 65536 * rgb[..., 2].astype(np.int64)
    )
    present = np.unique(ids)
    missing = [int(i) for i in present if int(i) not in table]
    if missing:
        raise FormatError(f"{image_path}: ids {missing} missing from sidecar")
    lut_c = np.zeros(int(present.max()) + 1, dtype=np.uint8)
    lut_s = np.zeros(int(present.max()) + 1, dtype=np.uint32)
    for i, (c, s) in table.items():
        if i <= present.max():
            lut_c[i] = c
            lut_s[i] = s
    return PanopticRaster.from_arrays(lut_c[ids], lut_s[ids])


def save_panoptic_compact(raster: PanopticRaster, path) -> None:
    """Encoding B: 16-bit class*1000 + instance image."""
    c = raster.class_ids.astype(np.int64)
    s = raster.segment_ids.astype(np.int64)
    if np.any((c < NUM_CLASSES) & (s != UNKNOWN_INSTANCE) & (s > _MAX_COMPACT_INSTANCE)):
        raise FormatError(f"{path}: instance id >= 999 cannot use the compact encoding")
    ids = c * 1000 + np.where(s == UNKNOWN_INSTANCE, _COMPACT_UNKNOWN_INSTANCE, s)
    ids[c == UNKNOWN_CLASS] = _COMPACT_UNKNOWN_CLASS
    ids[c == OTHER_CLASS] = _COMPACT_OTHER_CLASS
    Image.fromarray(ids.astype(np.uint16)).save(path, format="PNG")


def load_panoptic_compact(path) -> PanopticRaster:
    ids = _read_png(Path(path), bits=16).astype(np.int64)
    class_ids = (ids // 1000).astype(np.int64)
    instance = ids % 1000
    out_c = np.where(ids == _COMPACT_UNKNOWN_CLASS, UNKNOWN_CLASS, class_ids)
    out_c = np.where(ids == _COMPACT_OTHER_CLASS, OTHER_CLASS, out_c)
    out_s = np.where(instance == _COMPACT_UNKNOWN_INSTANCE, UNKNOWN_INSTANCE, instance)
    out_s = np.where(ids == _COMPACT_UNKNOWN_CLASS, UNKNOWN_INSTANCE, out_s)
    out_s = np.where(ids == _COMPACT_OTHER_CLASS, NO_SEGMENT, out_s)
    bad = (out_c >= NUM_CLASSES) & (out_c != UNKNOWN_CLASS) & (out_c != OTHER_CLASS)
    if np.any(bad):
        raise FormatError(f"{path}: id {int(ids[bad][0])} has no valid class")
    return PanopticRaster.from_arrays(out_c.astype(np.uint8), out_s.astype(np.uint32))


def save_difficulty(raster: DifficultyRaster, path) -> None:
    Image.fromarray(raster.values, mode="L").save(path, format="PNG")


def load_difficulty(path) -> DifficultyRaster:
    arr = _read_png(Path(path), bits=8)
    if arr.max(initial=0) > DIFFICULT_CLASS:
        raise FormatError(f"{path}: difficulty value {int(arr.max())} out of range")
    return DifficultyRaster.from_array(arr)


def save_confidence(raster: ConfidenceRaster, path) -> None:
    q = np.round(raster.scores * 65535.0).astype(np.uint16)
    Image.fromarray(q).save(path, format="PNG")


def load_confidence(path, kind: str) -> ConfidenceRaster:
    arr = _read_png(Path(path), bits=16)
    return ConfidenceRaster.from_array(arr.astype(np.float64) / 65535.0, kind)


@dataclass
class SampleRecord:
    sample_id: str
    prediction: str
    ground_truth: str
    difficulty: str | None = None
    class_conf: str | None = None
    inst_conf: str | None = None
    h1: str | None = None
    h2: str | None = None
    semantic: str | None = None
    mask_outputs: str | None = None  # npz with probs/masks for the marginal baseline
    conditions: list[str] = field(default_factory=list)


@dataclass
class DatasetManifest:
    samples: list[SampleRecord]
    root: Path

    def resolve(self, rel: str) -> Path:
        return self.root / rel


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: unreadable manifest ({exc})") from exc
    if payload.get("schema_version") != SCHEMA_VERSION:
        raise SchemaVersionError(f"{path}: unsupported schema version")
    samples = []
    seen = set()
    for raw in payload.get("samples", []):
        rec = SampleRecord(
            sample_id=raw["sample_id"],
            prediction=raw["prediction"],
            ground_truth=raw["ground_truth"],
            difficulty=raw.get("difficulty"),
            class_conf=raw.get("class_conf"),
            inst_conf=raw.get("inst_conf"),
            h1=raw.get("h1"),
            h2=raw.get("h2"),
            semantic=raw.get("semantic"),
            mask_outputs=raw.get("mask_outputs"),
            conditions=list(raw.get("conditions", [])),
        )
        if rec.sample_id in seen:
            raise ValidationError(f"{path}: duplicate sample_id {rec.sample_id!r}")
        seen.add(rec.sample_id)
        unknown = set(rec.conditions) - set(CONDITION_TAGS)
        if unknown:
            raise ValidationError(f"{path}: unknown condition tags {sorted(unknown)}")
        samples.append(rec)
    return DatasetManifest(samples=samples, root=path.parent)


def save_manifest(manifest: DatasetManifest, path) -> None:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "samples": [
            {k: v for k, v in vars(rec).items() if v not in (None, [])}
            for rec in manifest.samples
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


_FLOAT_SENTINEL = "@@F:{}@@"
_FLOAT_RE = re.compile(r'"@@F:(-?\d+\.\d{6})@@"')


def _wrap_floats(obj):
    if isinstance(obj, float):
        return _FLOAT_SENTINEL.format(f"{obj:.6f}")
    if isinstance(obj, dict):
        return {k: _wrap_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_wrap_floats(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _wrap_floats(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return _wrap_floats(float(obj))
    return obj


def dump_report_json(payload: dict) -> str:
    """Deterministic report serialization: sorted keys, 6-decimal floats."""
    wrapped = _wrap_floats(payload)
    text = json.dumps(wrapped, indent=2, sort_keys=True)
    return _FLOAT_RE.sub(r"\1", text) + "\n"


def load_report(path) -> dict:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: unreadable report ({exc})") from exc
    if payload.get("schema_version") != SCHEMA_VERSION:
        raise SchemaVersionError(f"{path}: unsupported schema version")
    return payload
