/** Training / prediction entry points driven by a protocol manifest. */
import * as fs from "fs";
import * as path from "path";

import { Adam, ADAM_DEFAULTS } from "./adam";
import { Manifest } from "./manifest";
import { Tensor4, t4 } from "./ops";
import { Rng } from "./rng";
import { readSgt, writeSgt } from "./sgt";
import { diceFromCounts, pooledDice, softDice } from "./softdice";
import {
  BATCH_SIZE,
  ParamSet,
  UNetConfig,
  forward,
  initParams,
} from "./unet";
import { loadModel, saveModel } from "./model_io";

export interface EpochRecord {
  epoch: number;
  trainLoss: number;
  valDice: number;
}

function loadPatch(file: string, patchSize: number, channels: number): Float32Array {
  const { data, shape } = readSgt(file);
  if (!(data instanceof Float32Array)) {
    throw new Error(`${file}: image patch must be float32`);
  }
  if (shape.length !== 3 || shape[0] !== patchSize || shape[1] !== patchSize) {
    throw new Error(
      `${file}: expected ${patchSize}x${patchSize}xC patch, got ${shape.join("x")}`
    );
  }
  if (shape[2] !== channels) {
    throw new Error(`${file}: expected ${channels} channels, got ${shape[2]}`);
  }
  return data;
}

function loadTarget(file: string, patchSize: number): Uint8Array {
  const { data, shape } = readSgt(file);
  if (shape.length !== 2 || shape[0] !== patchSize || shape[1] !== patchSize) {
    throw new Error(
      `${file}: expected ${patchSize}x${patchSize} target, got ${shape.join("x")}`
    );
  }
  const out = new Uint8Array(data.length);
  for (let i = 0; i < data.length; i++) out[i] = data[i] !== 0 ? 1 : 0;
  return out;
}

function stackBatch(
  patches: Float32Array[], indices: number[], patchSize: number, channels: number
): Tensor4 {
  const x = t4(indices.length, patchSize, patchSize, channels);
  indices.forEach((idx, s) => {
    x.data.set(patches[idx], s * patchSize * patchSize * channels);
  });
  return x;
}

function snapshot(params: ParamSet): ParamSet {
  const out: ParamSet = {};
  for (const [k, v] of Object.entries(params)) out[k] = v.slice() as Float32Array;
  return out;
}

export function runTrain(manifest: Manifest, filterScale: number): void {
  const { patch_size: patchSize, channels } = manifest;
  if (patchSize % 32 !== 0) {
    throw new Error(`patch size ${patchSize} not divisible by 32 (5 pooling stages)`);
  }
  const config: UNetConfig = { channels, patchSize, filterScale };
  const epochs = manifest.train_params.epochs ?? 50;
  const batchSize = manifest.train_params.batch_size ?? BATCH_SIZE;
  const learningRate = manifest.train_params.learning_rate ?? ADAM_DEFAULTS.learningRate;

  const trainX = manifest.train_patches.map((f) => loadPatch(f, patchSize, channels));
  const trainY = manifest.train_targets.map((f) => loadTarget(f, patchSize));
  const valX = manifest.val_patches.map((f) => loadPatch(f, patchSize, channels));
  const valY = manifest.val_targets.map((f) => loadTarget(f, patchSize));

  const params = initParams(config, manifest.seed);
  const adam = new Adam({ ...ADAM_DEFAULTS, learningRate });
  const shuffleRng = new Rng(manifest.seed, 1);
  const dropoutRng = new Rng(manifest.seed, 2);

  let bestDice = -1;
  let bestParams = snapshot(params);
  const history: EpochRecord[] = [];

  for (let epoch = 1; epoch <= epochs; epoch++) {
    const order = shuffleRng.shuffle(trainX.map((_, i) => i));
    const losses: number[] = [];
    for (let start = 0; start < order.length; start += batchSize) {
      const indices = order.slice(start, start + batchSize);
      const x = stackBatch(trainX, indices, patchSize, channels);
      const g = new Uint8Array(indices.length * patchSize * patchSize);
      indices.forEach((idx, s) => g.set(trainY[idx], s * patchSize * patchSize));
      const fwd = forward(x, params, config, true, dropoutRng);
      const { loss, grad } = softDice(fwd.probs.data, g);
      if (!Number.isFinite(loss)) {
        throw new Error(`non-finite loss at epoch ${epoch}, batch ${start / batchSize}`);
      }
      losses.push(loss);
      const dProbs = t4(fwd.probs.n, fwd.probs.h, fwd.probs.w, 1);
      dProbs.data.set(grad as never);
      const grads = fwd.backward(dProbs);
      adam.step(params, grads);
    }

    let tp = 0;
    let fp = 0;
    let fn = 0;
    for (let i = 0; i < valX.length; i++) {
      const x = stackBatch(valX, [i], patchSize, channels);
      const fwd = forward(x, params, config, false, dropoutRng);
      const counts = pooledDice(fwd.probs.data, valY[i]);
      tp += counts.tp;
      fp += counts.fp;
      fn += counts.fn;
    }
    const valDice = diceFromCounts(tp, fp, fn);
    history.push({
      epoch,
      trainLoss: losses.reduce((a, b) => a + b, 0) / losses.length,
      valDice,
    });
    process.stderr.write(
      `epoch ${epoch}/${epochs} loss=${history[history.length - 1].trainLoss.toFixed(4)} ` +
      `val_dice=${valDice.toFixed(4)}\n`
    );
    if (valDice > bestDice) {
      bestDice = valDice;
      bestParams = snapshot(params);
    }
  }

  fs.mkdirSync(path.dirname(manifest.model_path), { recursive: true });
  saveModel(manifest.model_path, config, bestParams);
  fs.writeFileSync(
    manifest.model_path + ".history.json",
    JSON.stringify({ bestValDice: bestDice, epochs: history }, null, 2)
  );
}

export function runPredict(manifest: Manifest): void {
  const { config, params } = loadModel(manifest.model_path);
  if (config.channels !== manifest.channels) {
    throw new Error(
      `model expects ${config.channels} channels, manifest says ${manifest.channels}`
    );
  }
  if (config.patchSize !== manifest.patch_size) {
    throw new Error(
      `model expects ${config.patchSize}px patches, manifest says ${manifest.patch_size}`
    );
  }
  fs.mkdirSync(manifest.output_dir, { recursive: true });
  const rng = new Rng(manifest.seed, 3); // unused at inference (dropout off)
  for (let i = 0; i < manifest.predict_patches.length; i++) {
    const data = loadPatch(manifest.predict_patches[i], config.patchSize, config.channels);
    const x = t4(1, config.patchSize, config.patchSize, config.channels);
    x.data.set(data);
    const fwd = forward(x, params, config, false, rng);
    const probs = new Float32Array(fwd.probs.data.length);
    for (let j = 0; j < probs.length; j++) {
      probs[j] = Math.min(1, Math.max(0, fwd.probs.data[j]));
    }
    writeSgt(path.join(manifest.output_dir, manifest.predict_outputs[i]), {
      data: probs,
      shape: [config.patchSize, config.patchSize],
    });
  }
}
