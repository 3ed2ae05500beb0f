/**
 * Soft Dice loss over a batch of probability maps:
 *   loss = 1 - (2*sum(p*g) + eps) / (sum(p) + sum(g) + eps)
 * with the analytic gradient w.r.t. p.
 */
import { FloatArray } from "./ops";

export function softDice(
  probs: FloatArray, targets: FloatArray | Uint8Array, eps = 1.0
): { loss: number; grad: Float64Array } {
  if (probs.length !== targets.length) {
    throw new Error(`soft dice: ${probs.length} probs vs ${targets.length} targets`);
  }
  let inter = 0;
  let sumP = 0;
  let sumG = 0;
  for (let i = 0; i < probs.length; i++) {
    const p = probs[i];
    const g = targets[i];
    inter += p * g;
    sumP += p;
    sumG += g;
  }
  const num = 2 * inter + eps;
  const den = sumP + sumG + eps;
  const loss = 1 - num / den;
  const grad = new Float64Array(probs.length);
  const invDen2 = 1 / (den * den);
  for (let i = 0; i < probs.length; i++) {
    grad[i] = -(2 * targets[i] * den - num) * invDen2;
  }
  return { loss, grad };
}

/** Pooled Dice of thresholded probabilities (validation scoring). */
export function pooledDice(
  probs: FloatArray, targets: FloatArray | Uint8Array, threshold = 0.5
): { tp: number; fp: number; fn: number } {
  let tp = 0;
  let fp = 0;
  let fn = 0;
  for (let i = 0; i < probs.length; i++) {
    const p = probs[i] >= threshold;
    const g = targets[i] !== 0;
    if (p && g) tp++;
    else if (p && !g) fp++;
    else if (!p && g) fn++;
  }
  return { tp, fp, fn };
}

export function diceFromCounts(tp: number, fp: number, fn: number): number {
  const den = 2 * tp + fp + fn;
  return den === 0 ? 1.0 : (2 * tp) / den;
}
