/**
 * The U-Net: 5 downsampling and 5 upsampling stages with skip connections
 * by concatenation, 2x2 max-pool down, 2x2 transposed-conv up, two 3x3
 * ReLU convolutions per stage with a dropout layer between them, sigmoid
 * output head, soft-Dice loss, Adam at lr 0.01, batch 64.
 *
 * `filterScale` divides every filter count (default 1 = the full
 * configuration); the architecture audit runs at scale 1, while protocol
 * conformance tests may use a slimmer scale to stay within CPU budgets.
 */
import {
  FloatArray,
  Tensor4,
  concatChannels,
  conv1x1,
  conv3x3,
  dropout,
  maxPool2x2,
  relu,
  sigmoidInPlace,
  t4,
  upConv2x2,
} from "./ops";
import { Rng } from "./rng";

export const DOWN_FILTERS = [32, 64, 128, 256, 512];
export const BOTTLENECK_FILTERS = 512;
export const DOWN_DROPOUT = [0.1, 0.1, 0.2, 0.2, 0.3];
export const BOTTLENECK_DROPOUT = 0.4;
export const LEARNING_RATE = 0.01;
export const BATCH_SIZE = 64;
export const PATCH_SIZE = 128;

export interface UNetConfig {
  channels: number;
  patchSize: number;
  filterScale: number;
}

export interface ParamSet {
  [name: string]: FloatArray;
}

export function scaledFilters(scale: number): number[] {
  return DOWN_FILTERS.map((f) => Math.max(1, Math.round(f / scale)));
}

export function describeArchitecture(channels: number, patchSize = PATCH_SIZE) {
  return {
    inputSize: [patchSize, patchSize, channels],
    downSteps: 5,
    upSteps: 5,
    downFilters: [...DOWN_FILTERS],
    bottleneckFilters: BOTTLENECK_FILTERS,
    upFilters: [...DOWN_FILTERS].reverse(),
    downDropout: [...DOWN_DROPOUT],
    bottleneckDropout: BOTTLENECK_DROPOUT,
    upDropout: [...DOWN_DROPOUT].reverse(),
    activation: "relu",
    outputActivation: "sigmoid",
    loss: "softDice",
    optimizer: { name: "adam", learningRate: LEARNING_RATE },
    batchSize: BATCH_SIZE,
    skipConnections: "concatenate",
    downsampling: "maxpool2x2",
    upsampling: "transposedConv2x2",
  };
}

interface LayerSpec {
  name: string;
  shape: number[];
}

/** Parameter inventory for a given channel count and filter scale. */
export function layerSpecs(config: UNetConfig): LayerSpec[] {
  const filters = scaledFilters(config.filterScale);
  const bottleneck = Math.max(1, Math.round(BOTTLENECK_FILTERS / config.filterScale));
  const specs: LayerSpec[] = [];
  let cin = config.channels;
  filters.forEach((f, i) => {
    specs.push({ name: `down${i}/conv1/w`, shape: [3, 3, cin, f] });
    specs.push({ name: `down${i}/conv1/b`, shape: [f] });
    specs.push({ name: `down${i}/conv2/w`, shape: [3, 3, f, f] });
    specs.push({ name: `down${i}/conv2/b`, shape: [f] });
    cin = f;
  });
  specs.push({ name: "bottleneck/conv1/w", shape: [3, 3, cin, bottleneck] });
  specs.push({ name: "bottleneck/conv1/b", shape: [bottleneck] });
  specs.push({ name: "bottleneck/conv2/w", shape: [3, 3, bottleneck, bottleneck] });
  specs.push({ name: "bottleneck/conv2/b", shape: [bottleneck] });
  let cur = bottleneck;
  for (let i = filters.length - 1; i >= 0; i--) {
    const f = filters[i];
    specs.push({ name: `up${i}/upconv/w`, shape: [2, 2, cur, f] });
    specs.push({ name: `up${i}/upconv/b`, shape: [f] });
    specs.push({ name: `up${i}/conv1/w`, shape: [3, 3, 2 * f, f] });
    specs.push({ name: `up${i}/conv1/b`, shape: [f] });
    specs.push({ name: `up${i}/conv2/w`, shape: [3, 3, f, f] });
    specs.push({ name: `up${i}/conv2/b`, shape: [f] });
    cur = f;
  }
  specs.push({ name: "head/w", shape: [cur, 1] });
  specs.push({ name: "head/b", shape: [1] });
  return specs;
}

/** He-normal init for conv weights, zeros for biases; deterministic in seed. */
export function initParams(config: UNetConfig, seed: number): ParamSet {
  const rng = new Rng(seed, 0xdead);
  const params: ParamSet = {};
  for (const spec of layerSpecs(config)) {
    const n = spec.shape.reduce((a, b) => a * b, 1);
    const arr = new Float32Array(n);
    if (spec.shape.length > 1) {
      const fanIn = spec.shape.slice(0, -1).reduce((a, b) => a * b, 1);
      const std = Math.sqrt(2 / fanIn);
      for (let i = 0; i < n; i++) arr[i] = rng.nextGaussian() * std;
    }
    params[spec.name] = arr;
  }
  return params;
}

export interface ForwardResult {
  probs: Tensor4;
  /** backward from dLoss/dProbs through the sigmoid to parameter grads */
  backward: (dProbs: Tensor4) => ParamSet;
}

type StageBack = (dy: Tensor4) => Tensor4;

/**
 * Full forward pass.  When `training` is true, dropout is live; the
 * returned closure runs the matching backward pass to parameter grads.
 */
export function forward(
  x: Tensor4, params: ParamSet, config: UNetConfig, training: boolean, rng: Rng
): ForwardResult {
  const filters = scaledFilters(config.filterScale);
  const bottleneck = Math.max(1, Math.round(BOTTLENECK_FILTERS / config.filterScale));
  const grads: ParamSet = {};
  const addGrad = (name: string, g: FloatArray) => {
    const existing = grads[name];
    if (existing) {
      for (let i = 0; i < g.length; i++) existing[i] += g[i];
    } else {
      grads[name] = g;
    }
  };

  const convBlock = (input: Tensor4, prefix: string, f: number, rate: number) => {
    const c1 = conv3x3(input, params[`${prefix}/conv1/w`], params[`${prefix}/conv1/b`], f);
    const r1 = relu(c1.y);
    const dr = dropout(r1.y, rate, training, rng);
    const c2 = conv3x3(dr.y, params[`${prefix}/conv2/w`], params[`${prefix}/conv2/b`], f);
    const r2 = relu(c2.y);
    const back: StageBack = (dy) => {
      const g2 = c2.backward(r2.backward(dy));
      addGrad(`${prefix}/conv2/w`, g2.dw);
      addGrad(`${prefix}/conv2/b`, g2.db);
      const g1 = c1.backward(r1.backward(dr.backward(g2.dx)));
      addGrad(`${prefix}/conv1/w`, g1.dw);
      addGrad(`${prefix}/conv1/b`, g1.db);
      return g1.dx;
    };
    return { y: r2.y, back };
  };

  // encoder: per stage, conv block then pool; block output feeds the skip
  const skips: Tensor4[] = [];
  const skipGrads: (Tensor4 | null)[] = new Array(filters.length).fill(null);
  const encBacks: StageBack[] = [];
  const poolBacks: StageBack[] = [];
  let cur = x;
  for (let i = 0; i < filters.length; i++) {
    const block = convBlock(cur, `down${i}`, filters[i], DOWN_DROPOUT[i]);
    encBacks.push(block.back);
    skips.push(block.y);
    const pool = maxPool2x2(block.y);
    poolBacks.push(pool.backward);
    cur = pool.y;
  }

  const bnBlock = convBlock(cur, "bottleneck", bottleneck, BOTTLENECK_DROPOUT);
  cur = bnBlock.y;

  // decoder: per stage i (deep to shallow), upconv, concat skip, conv block
  const upBacks = new Map<number, { upConcat: StageBack; block: StageBack }>();
  for (let i = filters.length - 1; i >= 0; i--) {
    const f = filters[i];
    const up = upConv2x2(cur, params[`up${i}/upconv/w`], params[`up${i}/upconv/b`], f);
    const cat = concatChannels(up.y, skips[i]);
    const block = convBlock(cat.y, `up${i}`, f, DOWN_DROPOUT[i]);
    const stage = i;
    upBacks.set(stage, {
      block: block.back,
      upConcat: (dy) => {
        const { da, db } = cat.backward(dy);
        skipGrads[stage] = db;
        const gUp = up.backward(da);
        addGrad(`up${stage}/upconv/w`, gUp.dw);
        addGrad(`up${stage}/upconv/b`, gUp.db);
        return gUp.dx;
      },
    });
    cur = block.y;
  }

  const head = conv1x1(cur, params["head/w"], params["head/b"], 1);
  const logits = head.y;
  const probs = t4(logits.n, logits.h, logits.w, 1, logits.data instanceof Float64Array);
  probs.data.set(logits.data as never);
  sigmoidInPlace(probs.data);

  const backward = (dProbs: Tensor4): ParamSet => {
    const dLogits = t4(logits.n, logits.h, logits.w, 1,
                       logits.data instanceof Float64Array);
    for (let i = 0; i < dLogits.data.length; i++) {
      const p = probs.data[i];
      dLogits.data[i] = dProbs.data[i] * p * (1 - p);
    }
    const gHead = head.backward(dLogits);
    addGrad("head/w", gHead.dw);
    addGrad("head/b", gHead.db);
    let d = gHead.dx;

    // decoder stages unwound shallow to deep (reverse of execution)
    for (let i = 0; i < filters.length; i++) {
      const backs = upBacks.get(i)!;
      d = backs.block(d);
      d = backs.upConcat(d);
    }
    d = bnBlock.back(d);
    // encoder stages deep to shallow; skip grads join after the pool
    for (let i = filters.length - 1; i >= 0; i--) {
      d = poolBacks[i](d);
      const sg = skipGrads[i];
      if (sg) {
        for (let k = 0; k < d.data.length; k++) d.data[k] += sg.data[k];
      }
      d = encBacks[i](d);
    }
    return grads;
  };

  return { probs, backward };
}
