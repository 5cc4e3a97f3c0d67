/** Marginalization confidence baseline for mask-classification outputs.
 *
 * Pure array math, mirroring the engine's formulas: every pixel is
 * assigned to the pair maximizing class probability times mask score;
 * the class confidence marginalizes the winning class over all pairs
 * (masks normalized per pixel), the instance confidence is the winning
 * pair's share of that sum. The product s_class * s_inst always equals
 * the winning pair's joint weight p(c*) * normalized mask.
 */

import { NUM_CLASSES } from "./constants.js";
import type { ConfidenceData } from "./rasters.js";

export interface MaskClassificationInput {
  /** (N, NUM_CLASSES + 1) row-major class distributions, last column is no-object. */
  probs: Float64Array;
  /** (N, H, W) row-major soft masks in [0, 1]. */
  masks: Float64Array;
  nPairs: number;
  width: number;
  height: number;
}

export interface MarginalResult {
  classConf: ConfidenceData;
  instConf: ConfidenceData;
  /** winning pair index per pixel, -1 where nothing applies */
  assignment: Int32Array;
}

function validate(mc: MaskClassificationInput): void {
  const k = NUM_CLASSES + 1;
  if (mc.probs.length !== mc.nPairs * k) {
    throw new Error(`probs must be (${mc.nPairs}, ${k})`);
  }
  if (mc.masks.length !== mc.nPairs * mc.width * mc.height) {
    throw new Error("masks must be (N, H, W) matching probs");
  }
  for (let i = 0; i < mc.nPairs; i++) {
    let sum = 0;
    for (let c = 0; c < k; c++) sum += mc.probs[i * k + c];
    if (Math.abs(sum - 1) > 1e-6) {
      throw new Error(`class distribution ${i} sums to ${sum}`);
    }
  }
  for (const v of mc.masks) {
    if (!(v >= 0 && v <= 1)) throw new Error(`mask value ${v} outside [0, 1]`);
  }
}

export function marginalConfidences(mc: MaskClassificationInput): MarginalResult {
  validate(mc);
  const k = NUM_CLASSES + 1;
  const n = mc.nPairs;
  const px = mc.width * mc.height;

  const topClass = new Int32Array(n);
  for (let i = 0; i < n; i++) {
    let best = 0;
    for (let c = 1; c < k; c++) {
      if (mc.probs[i * k + c] > mc.probs[i * k + best]) best = c;
    }
    topClass[i] = best;
  }

  const assignment = new Int32Array(px).fill(-1);
  const maskSum = new Float64Array(px);
  for (let p = 0; p < px; p++) {
    let bestScore = 0;
    for (let i = 0; i < n; i++) {
      const m = mc.masks[i * px + p];
      maskSum[p] += m;
      if (topClass[i] >= NUM_CLASSES) continue; // no-object pairs never win
      const score = mc.probs[i * k + topClass[i]] * m;
      if (score > bestScore) {
        bestScore = score;
        assignment[p] = i;
      }
    }
  }

  const sClass = new Float64Array(px);
  const sInst = new Float64Array(px);
  for (let p = 0; p < px; p++) {
    const win = assignment[p];
    if (win < 0 || maskSum[p] <= 0) continue;
    const cStar = topClass[win];
    let total = 0;
    for (let i = 0; i < n; i++) {
      total += mc.probs[i * k + cStar] * (mc.masks[i * px + p] / maskSum[p]);
    }
    sClass[p] = Math.min(total, 1);
    if (total > 0) {
      const share =
        (mc.probs[win * k + cStar] * (mc.masks[win * px + p] / maskSum[p])) / total;
      sInst[p] = Math.min(share, 1);
    }
  }

  return {
    classConf: { scores: sClass, width: mc.width, height: mc.height },
    instConf: { scores: sInst, width: mc.width, height: mc.height },
    assignment,
  };
}
