/** Array-level bindings over the evaluation engine's command line interface.
 *
 * Inputs are either file paths in the engine's on-disk encodings or
 * in-memory typed arrays; in-memory inputs are serialized to a temporary
 * manifest and evaluated by the engine subprocess, so results are
 * numerically identical to direct CLI runs.
 */

import {
  copyFileSync,
  mkdirSync,
  mkdtempSync,
  rmSync,
  writeFileSync,
} from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";

import { SCHEMA_VERSION } from "./constants.js";
import {
  ConfidenceData,
  DifficultyData,
  PanopticData,
  loadDifficulty,
  saveConfidence,
  saveDifficulty,
  savePanopticCompact,
} from "./rasters.js";
import { runCli } from "./runner.js";

export * from "./constants.js";
export * from "./rasters.js";
export * from "./runner.js";
export { writeNpz } from "./npz.js";
export {
  MarginalResult,
  MaskClassificationInput,
  marginalConfidences,
} from "./marginal.js";

export type PanopticInput = string | PanopticData;
export type DifficultyInput = string | DifficultyData;
export type ConfidenceInput = string | ConfidenceData;

export interface UpqOptions {
  classThreshold?: number;
  instThreshold?: number;
  rule?: "ge" | "gt";
}

export interface AupqOptions {
  gridSize?: number;
  rule?: "ge" | "gt";
}

/** Parsed engine report; keys mirror the JSON report format. */
export type Report = Record<string, any>;

function asList<T>(value: T | T[]): T[] {
  return Array.isArray(value) ? value : [value];
}

interface Staged {
  dir: string;
  manifestPath: string;
}

function stage(
  preds: PanopticInput[],
  gts: PanopticInput[],
  diffs?: DifficultyInput[],
  classConfs?: ConfidenceInput[],
  instConfs?: ConfidenceInput[],
): Staged {
  const n = preds.length;
  for (const [name, list] of Object.entries({ gts, diffs, classConfs, instConfs })) {
    if (list !== undefined && list.length !== n) {
      throw new Error(`${name} has ${list.length} entries, expected ${n}`);
    }
  }
  const dir = mkdtempSync(join(tmpdir(), "upqeval-"));
  const place = <T>(
    value: string | T,
    save: (v: T, path: string) => void,
    name: string,
  ): string => {
    if (typeof value === "string") return resolve(value);
    const path = join(dir, name);
    save(value as T, path);
    return path;
  };
  const samples = [];
  for (let i = 0; i < n; i++) {
    const sample: Record<string, unknown> = {
      sample_id: `sample_${String(i).padStart(4, "0")}`,
      prediction: place(preds[i], savePanopticCompact, `pred_${i}.png`),
      ground_truth: place(gts[i], savePanopticCompact, `gt_${i}.png`),
    };
    if (diffs) sample.difficulty = place(diffs[i], saveDifficulty, `diff_${i}.png`);
    if (classConfs) {
      sample.class_conf = place(classConfs[i], saveConfidence, `cc_${i}.png`);
    }
    if (instConfs) {
      sample.inst_conf = place(instConfs[i], saveConfidence, `ic_${i}.png`);
    }
    samples.push(sample);
  }
  const manifestPath = join(dir, "manifest.json");
  writeFileSync(
    manifestPath,
    JSON.stringify({ schema_version: SCHEMA_VERSION, samples }, null, 2),
  );
  return { dir, manifestPath };
}

function evaluateStaged(staged: Staged, args: string[]): Report {
  try {
    return JSON.parse(runCli(["evaluate", staged.manifestPath, ...args]));
  } finally {
    rmSync(staged.dir, { recursive: true, force: true });
  }
}

/** Standard panoptic quality over one sample or parallel sample lists. */
export function evaluatePq(
  pred: PanopticInput | PanopticInput[],
  gt: PanopticInput | PanopticInput[],
): Report {
  return evaluateStaged(stage(asList(pred), asList(gt)), ["--metric", "pq"]);
}

/** Uncertainty-aware panoptic quality at one threshold pair. */
export function evaluateUpq(
  pred: PanopticInput | PanopticInput[],
  gt: PanopticInput | PanopticInput[],
  difficulty: DifficultyInput | DifficultyInput[],
  classConf: ConfidenceInput | ConfidenceInput[],
  instConf: ConfidenceInput | ConfidenceInput[],
  options: UpqOptions = {},
): Report {
  const staged = stage(
    asList(pred),
    asList(gt),
    asList(difficulty),
    asList(classConf),
    asList(instConf),
  );
  return evaluateStaged(staged, [
    "--metric",
    "upq",
    "--class-threshold",
    String(options.classThreshold ?? 0.5),
    "--inst-threshold",
    String(options.instThreshold ?? 0.5),
    "--binarization",
    options.rule ?? "ge",
  ]);
}

/** Threshold-agnostic AUPQ/AUSQ/AURQ over a confidence threshold grid. */
export function evaluateAupq(
  pred: PanopticInput | PanopticInput[],
  gt: PanopticInput | PanopticInput[],
  difficulty: DifficultyInput | DifficultyInput[],
  classConf: ConfidenceInput | ConfidenceInput[],
  instConf: ConfidenceInput | ConfidenceInput[],
  options: AupqOptions = {},
): Report {
  const staged = stage(
    asList(pred),
    asList(gt),
    asList(difficulty),
    asList(classConf),
    asList(instConf),
  );
  return evaluateStaged(staged, [
    "--metric",
    "aupq",
    "--grid-size",
    String(options.gridSize ?? 16),
    "--binarization",
    options.rule ?? "ge",
  ]);
}

/** Ternary difficulty map derived from two annotation stages. */
export function deriveDifficulty(
  h1: PanopticInput,
  h2: PanopticInput,
): DifficultyData {
  const dir = mkdtempSync(join(tmpdir(), "upqeval-"));
  try {
    const h1Dir = join(dir, "h1");
    const h2Dir = join(dir, "h2");
    const outDir = join(dir, "out");
    for (const d of [h1Dir, h2Dir]) {
      mkdirSync(d);
    }
    const placeInto = (value: PanopticInput, target: string) => {
      if (typeof value === "string") {
        copyFileSync(value, join(target, "img.png"));
      } else {
        savePanopticCompact(value, join(target, "img.png"));
      }
    };
    placeInto(h1, h1Dir);
    placeInto(h2, h2Dir);
    runCli(["derive-difficulty", h1Dir, h2Dir, outDir]);
    return loadDifficulty(join(outDir, "img.png"));
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}
