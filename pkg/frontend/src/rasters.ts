/** PNG serialization of panoptic, difficulty, and confidence rasters.
 *
 * Byte-compatible with the engine's on-disk formats: compact panoptic
 * rasters and confidence maps are 16-bit grayscale PNGs, difficulty maps
 * are 8-bit grayscale PNGs.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { decode, encode } from "fast-png";

import {
  COMPACT_OTHER_CLASS,
  COMPACT_UNKNOWN_CLASS,
  COMPACT_UNKNOWN_INSTANCE,
  MAX_COMPACT_INSTANCE,
  NO_SEGMENT,
  NUM_CLASSES,
  OTHER_CLASS,
  UNKNOWN_CLASS,
  UNKNOWN_INSTANCE,
} from "./constants.js";

export interface PanopticData {
  classIds: Uint8Array;
  segmentIds: Uint32Array;
  width: number;
  height: number;
}

export interface DifficultyData {
  values: Uint8Array; // ternary: 0 easy, 1 difficult_instance, 2 difficult_class
  width: number;
  height: number;
}

export interface ConfidenceData {
  scores: Float64Array; // in [0, 1]
  width: number;
  height: number;
}

export class FormatError extends Error {}

function decodeGray(path: string, depth: 8 | 16): Uint8Array | Uint16Array {
  const img = decode(readFileSync(path));
  if (img.channels !== 1 || img.depth !== depth) {
    throw new FormatError(
      `${path}: expected a ${depth}-bit grayscale PNG, got ` +
        `${img.depth}-bit x${img.channels}`,
    );
  }
  return img.data as Uint8Array | Uint16Array;
}

export function encodePanopticCompact(p: PanopticData): Uint8Array {
  const n = p.width * p.height;
  if (p.classIds.length !== n || p.segmentIds.length !== n) {
    throw new FormatError("class/segment array length does not match dimensions");
  }
  const ids = new Uint16Array(n);
  for (let i = 0; i < n; i++) {
    const c = p.classIds[i];
    const s = p.segmentIds[i];
    if (c === UNKNOWN_CLASS) {
      ids[i] = COMPACT_UNKNOWN_CLASS;
    } else if (c === OTHER_CLASS) {
      ids[i] = COMPACT_OTHER_CLASS;
    } else if (c < NUM_CLASSES) {
      if (s === UNKNOWN_INSTANCE) {
        ids[i] = c * 1000 + COMPACT_UNKNOWN_INSTANCE;
      } else if (s > MAX_COMPACT_INSTANCE) {
        throw new FormatError(`instance id ${s} exceeds the compact encoding`);
      } else {
        ids[i] = c * 1000 + s;
      }
    } else {
      throw new FormatError(`invalid class id ${c}`);
    }
  }
  return encode({
    data: ids,
    width: p.width,
    height: p.height,
    channels: 1,
    depth: 16,
  });
}

export function savePanopticCompact(p: PanopticData, path: string): void {
  writeFileSync(path, encodePanopticCompact(p));
}

export function loadPanopticCompact(path: string): PanopticData {
  const img = decode(readFileSync(path));
  if (img.channels !== 1 || img.depth !== 16) {
    throw new FormatError(`${path}: expected a 16-bit grayscale PNG`);
  }
  const ids = img.data as Uint16Array;
  const classIds = new Uint8Array(ids.length);
  const segmentIds = new Uint32Array(ids.length);
  for (let i = 0; i < ids.length; i++) {
    const id = ids[i];
    if (id === COMPACT_UNKNOWN_CLASS) {
      classIds[i] = UNKNOWN_CLASS;
      segmentIds[i] = UNKNOWN_INSTANCE;
    } else if (id === COMPACT_OTHER_CLASS) {
      classIds[i] = OTHER_CLASS;
      segmentIds[i] = NO_SEGMENT;
    } else {
      const c = Math.floor(id / 1000);
      const s = id % 1000;
      if (c >= NUM_CLASSES) {
        throw new FormatError(`${path}: id ${id} has no valid class`);
      }
      classIds[i] = c;
      segmentIds[i] = s === COMPACT_UNKNOWN_INSTANCE ? UNKNOWN_INSTANCE : s;
    }
  }
  return { classIds, segmentIds, width: img.width, height: img.height };
}

export function saveDifficulty(d: DifficultyData, path: string): void {
  for (const v of d.values) {
    if (v > 2) throw new FormatError(`difficulty value ${v} out of range`);
  }
  writeFileSync(
    path,
    encode({ data: d.values, width: d.width, height: d.height, channels: 1, depth: 8 }),
  );
}

export function loadDifficulty(path: string): DifficultyData {
  const data = decodeGray(path, 8) as Uint8Array;
  const img = decode(readFileSync(path));
  for (const v of data) {
    if (v > 2) throw new FormatError(`${path}: difficulty value ${v} out of range`);
  }
  return { values: data, width: img.width, height: img.height };
}

export function saveConfidence(c: ConfidenceData, path: string): void {
  const q = new Uint16Array(c.scores.length);
  for (let i = 0; i < c.scores.length; i++) {
    const s = c.scores[i];
    if (!(s >= 0 && s <= 1)) {
      throw new FormatError(`confidence score ${s} outside [0, 1]`);
    }
    q[i] = Math.round(s * 65535);
  }
  writeFileSync(
    path,
    encode({ data: q, width: c.width, height: c.height, channels: 1, depth: 16 }),
  );
}

export function loadConfidence(path: string): ConfidenceData {
  const img = decode(readFileSync(path));
  if (img.channels !== 1 || img.depth !== 16) {
    throw new FormatError(`${path}: expected a 16-bit grayscale PNG`);
  }
  const raw = img.data as Uint16Array;
  const scores = new Float64Array(raw.length);
  for (let i = 0; i < raw.length; i++) scores[i] = raw[i] / 65535;
  return { scores, width: img.width, height: img.height };
}
