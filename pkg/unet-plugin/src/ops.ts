/**
 * Typed-array neural-net kernels, NHWC layout.
 *
 * Hand-rolled on purpose: this plugin must train a real U-Net on CPU inside
 * Node, and the generic JS backends available here are orders of magnitude
 * too slow for convolution training.  The convolutions go through im2col and
 * a cache-friendly inner product; everything accumulates in doubles (plain
 * JS arithmetic), stored as float32.
 */

export type FloatArray = Float32Array | Float64Array;

export interface Tensor4 {
  data: FloatArray;
  n: number;
  h: number;
  w: number;
  c: number;
}

export function t4(n: number, h: number, w: number, c: number, f64 = false): Tensor4 {
  const data = f64 ? new Float64Array(n * h * w * c) : new Float32Array(n * h * w * c);
  return { data, n, h, w, c };
}

export function like(t: Tensor4): Tensor4 {
  return t4(t.n, t.h, t.w, t.c, t.data instanceof Float64Array);
}

function alloc(n: number, f64: boolean): FloatArray {
  return f64 ? new Float64Array(n) : new Float32Array(n);
}

/** im2col for 3x3 same-padding convolution of one sample. */
function im2col3x3(
  x: FloatArray, off: number, h: number, w: number, ci: number, col: FloatArray
): void {
  const k = 9 * ci;
  col.fill(0);
  for (let r = 0; r < h; r++) {
    for (let c = 0; c < w; c++) {
      const base = (r * w + c) * k;
      for (let ky = 0; ky < 3; ky++) {
        const sr = r + ky - 1;
        if (sr < 0 || sr >= h) continue;
        for (let kx = 0; kx < 3; kx++) {
          const sc = c + kx - 1;
          if (sc < 0 || sc >= w) continue;
          const src = off + (sr * w + sc) * ci;
          const dst = base + (ky * 3 + kx) * ci;
          for (let ch = 0; ch < ci; ch++) col[dst + ch] = x[src + ch];
        }
      }
    }
  }
}

/** col2im scatter-add, the adjoint of im2col3x3. */
function col2im3x3(
  col: FloatArray, h: number, w: number, ci: number, dx: FloatArray, off: number
): void {
  const k = 9 * ci;
  for (let r = 0; r < h; r++) {
    for (let c = 0; c < w; c++) {
      const base = (r * w + c) * k;
      for (let ky = 0; ky < 3; ky++) {
        const sr = r + ky - 1;
        if (sr < 0 || sr >= h) continue;
        for (let kx = 0; kx < 3; kx++) {
          const sc = c + kx - 1;
          if (sc < 0 || sc >= w) continue;
          const dst = off + (sr * w + sc) * ci;
          const src = base + (ky * 3 + kx) * ci;
          for (let ch = 0; ch < ci; ch++) dx[dst + ch] += col[src + ch];
        }
      }
    }
  }
}

/**
 * 3x3 same-padding convolution, stride 1.
 * weights: (3,3,Ci,Co) flattened row-major; bias: (Co).
 * Returns output and a backward closure producing {dx, dw, db}.
 */
export function conv3x3(
  x: Tensor4, weights: FloatArray, bias: FloatArray, co: number
): { y: Tensor4; backward: (dy: Tensor4) => { dx: Tensor4; dw: FloatArray; db: FloatArray } } {
  const { n, h, w, c: ci } = x;
  const k = 9 * ci;
  const f64 = x.data instanceof Float64Array;
  const y = t4(n, h, w, co, f64);
  const cols: FloatArray[] = [];
  for (let s = 0; s < n; s++) {
    const col = alloc(h * w * k, f64);
    im2col3x3(x.data, s * h * w * ci, h, w, ci, col);
    cols.push(col);
    const yOff = s * h * w * co;
    for (let i = 0; i < h * w; i++) {
      const rowOff = i * k;
      const outOff = yOff + i * co;
      for (let j = 0; j < co; j++) y.data[outOff + j] = bias[j];
      for (let kk = 0; kk < k; kk++) {
        const a = col[rowOff + kk];
        if (a === 0) continue;
        const wOff = kk * co;
        for (let j = 0; j < co; j++) y.data[outOff + j] += a * weights[wOff + j];
      }
    }
  }

  const backward = (dy: Tensor4) => {
    const dx = like(x);
    const dw = alloc(weights.length, f64);
    const db = alloc(co, f64);
    // transpose weights once: wT[(j, kk)] for sequential dcol accumulation
    const wT = alloc(weights.length, f64);
    for (let kk = 0; kk < k; kk++) {
      for (let j = 0; j < co; j++) wT[j * k + kk] = weights[kk * co + j];
    }
    const dcol = alloc(h * w * k, f64);
    for (let s = 0; s < n; s++) {
      const col = cols[s];
      const dyOff = s * h * w * co;
      dcol.fill(0);
      for (let i = 0; i < h * w; i++) {
        const rowOff = i * k;
        const gOff = dyOff + i * co;
        for (let j = 0; j < co; j++) {
          const g = dy.data[gOff + j];
          if (g === 0) continue;
          db[j] += g;
          const wtOff = j * k;
          for (let kk = 0; kk < k; kk++) dcol[rowOff + kk] += g * wT[wtOff + kk];
        }
        for (let kk = 0; kk < k; kk++) {
          const a = col[rowOff + kk];
          if (a === 0) continue;
          const wOff = kk * co;
          for (let j = 0; j < co; j++) dw[wOff + j] += a * dy.data[gOff + j];
        }
      }
      col2im3x3(dcol, h, w, ci, dx.data, s * h * w * ci);
    }
    return { dx, dw, db };
  };

  return { y, backward };
}

/** 1x1 convolution (the output head). weights: (Ci,Co); bias: (Co). */
export function conv1x1(
  x: Tensor4, weights: FloatArray, bias: FloatArray, co: number
): { y: Tensor4; backward: (dy: Tensor4) => { dx: Tensor4; dw: FloatArray; db: FloatArray } } {
  const { n, h, w, c: ci } = x;
  const f64 = x.data instanceof Float64Array;
  const y = t4(n, h, w, co, f64);
  const px = n * h * w;
  for (let i = 0; i < px; i++) {
    const xOff = i * ci;
    const yOff = i * co;
    for (let j = 0; j < co; j++) y.data[yOff + j] = bias[j];
    for (let ch = 0; ch < ci; ch++) {
      const a = x.data[xOff + ch];
      if (a === 0) continue;
      const wOff = ch * co;
      for (let j = 0; j < co; j++) y.data[yOff + j] += a * weights[wOff + j];
    }
  }
  const backward = (dy: Tensor4) => {
    const dx = like(x);
    const dw = alloc(weights.length, f64);
    const db = alloc(co, f64);
    for (let i = 0; i < px; i++) {
      const xOff = i * ci;
      const yOff = i * co;
      for (let j = 0; j < co; j++) {
        const g = dy.data[yOff + j];
        if (g === 0) continue;
        db[j] += g;
        for (let ch = 0; ch < ci; ch++) {
          dx.data[xOff + ch] += g * weights[ch * co + j];
          dw[ch * co + j] += g * x.data[xOff + ch];
        }
      }
    }
    return { dx, dw, db };
  };
  return { y, backward };
}

/** 2x2 max pooling, stride 2; input H, W must be even. */
export function maxPool2x2(
  x: Tensor4
): { y: Tensor4; backward: (dy: Tensor4) => Tensor4 } {
  const { n, h, w, c } = x;
  if (h % 2 !== 0 || w % 2 !== 0) throw new Error(`maxPool2x2 needs even dims, got ${h}x${w}`);
  const oh = h / 2;
  const ow = w / 2;
  const f64 = x.data instanceof Float64Array;
  const y = t4(n, oh, ow, c, f64);
  const argmax = new Int32Array(n * oh * ow * c);
  for (let s = 0; s < n; s++) {
    for (let r = 0; r < oh; r++) {
      for (let col = 0; col < ow; col++) {
        for (let ch = 0; ch < c; ch++) {
          let best = -Infinity;
          let bestIdx = -1;
          for (let dy = 0; dy < 2; dy++) {
            for (let dx = 0; dx < 2; dx++) {
              const idx = ((s * h + 2 * r + dy) * w + 2 * col + dx) * c + ch;
              const v = x.data[idx];
              if (v > best) {
                best = v;
                bestIdx = idx;
              }
            }
          }
          const oIdx = ((s * oh + r) * ow + col) * c + ch;
          y.data[oIdx] = best;
          argmax[oIdx] = bestIdx;
        }
      }
    }
  }
  const backward = (dy: Tensor4) => {
    const dx = like(x);
    for (let i = 0; i < dy.data.length; i++) dx.data[argmax[i]] += dy.data[i];
    return dx;
  };
  return { y, backward };
}

/**
 * 2x2 stride-2 transposed convolution (learnable upsampling).
 * weights: (2,2,Ci,Co); each output pixel receives exactly one contribution.
 */
export function upConv2x2(
  x: Tensor4, weights: FloatArray, bias: FloatArray, co: number
): { y: Tensor4; backward: (dy: Tensor4) => { dx: Tensor4; dw: FloatArray; db: FloatArray } } {
  const { n, h, w, c: ci } = x;
  const f64 = x.data instanceof Float64Array;
  const y = t4(n, 2 * h, 2 * w, co, f64);
  const oh = 2 * h;
  const ow = 2 * w;
  for (let s = 0; s < n; s++) {
    for (let r = 0; r < h; r++) {
      for (let col = 0; col < w; col++) {
        const xOff = ((s * h + r) * w + col) * ci;
        for (let dy = 0; dy < 2; dy++) {
          for (let dx = 0; dx < 2; dx++) {
            const yOff = ((s * oh + 2 * r + dy) * ow + 2 * col + dx) * co;
            const wBase = (dy * 2 + dx) * ci * co;
            for (let j = 0; j < co; j++) y.data[yOff + j] = bias[j];
            for (let ch = 0; ch < ci; ch++) {
              const a = x.data[xOff + ch];
              if (a === 0) continue;
              const wOff = wBase + ch * co;
              for (let j = 0; j < co; j++) y.data[yOff + j] += a * weights[wOff + j];
            }
          }
        }
      }
    }
  }
  const backward = (dyT: Tensor4) => {
    const dx = like(x);
    const dw = alloc(weights.length, f64);
    const db = alloc(co, f64);
    for (let s = 0; s < n; s++) {
      for (let r = 0; r < h; r++) {
        for (let col = 0; col < w; col++) {
          const xOff = ((s * h + r) * w + col) * ci;
          for (let dy = 0; dy < 2; dy++) {
            for (let dx2 = 0; dx2 < 2; dx2++) {
              const yOff = ((s * oh + 2 * r + dy) * ow + 2 * col + dx2) * co;
              const wBase = (dy * 2 + dx2) * ci * co;
              for (let j = 0; j < co; j++) {
                const g = dyT.data[yOff + j];
                if (g === 0) continue;
                db[j] += g;
                for (let ch = 0; ch < ci; ch++) {
                  dx.data[xOff + ch] += g * weights[wBase + ch * co + j];
                  dw[wBase + ch * co + j] += g * x.data[xOff + ch];
                }
              }
            }
          }
        }
      }
    }
    return { dx, dw, db };
  };
  return { y, backward };
}

/** ReLU with mask-based backward. */
export function relu(x: Tensor4): { y: Tensor4; backward: (dy: Tensor4) => Tensor4 } {
  const y = like(x);
  const mask = new Uint8Array(x.data.length);
  for (let i = 0; i < x.data.length; i++) {
    const v = x.data[i];
    if (v > 0) {
      y.data[i] = v;
      mask[i] = 1;
    }
  }
  const backward = (dy: Tensor4) => {
    const dx = like(x);
    for (let i = 0; i < dy.data.length; i++) if (mask[i]) dx.data[i] = dy.data[i];
    return dx;
  };
  return { y, backward };
}

/** Inverted dropout; identity when rate is 0 or training is off. */
export function dropout(
  x: Tensor4, rate: number, training: boolean, rng: { next(): number }
): { y: Tensor4; backward: (dy: Tensor4) => Tensor4 } {
  if (!training || rate <= 0) {
    return { y: x, backward: (dy) => dy };
  }
  const keep = 1 - rate;
  const scale = 1 / keep;
  const y = like(x);
  const mask = new Uint8Array(x.data.length);
  for (let i = 0; i < x.data.length; i++) {
    if (rng.next() < keep) {
      mask[i] = 1;
      y.data[i] = x.data[i] * scale;
    }
  }
  const backward = (dy: Tensor4) => {
    const dx = like(x);
    for (let i = 0; i < dy.data.length; i++) if (mask[i]) dx.data[i] = dy.data[i] * scale;
    return dx;
  };
  return { y, backward };
}

/** Channel concatenation [a | b]. */
export function concatChannels(
  a: Tensor4, b: Tensor4
): { y: Tensor4; backward: (dy: Tensor4) => { da: Tensor4; db: Tensor4 } } {
  if (a.n !== b.n || a.h !== b.h || a.w !== b.w) {
    throw new Error("concat: spatial dims disagree");
  }
  const f64 = a.data instanceof Float64Array;
  const y = t4(a.n, a.h, a.w, a.c + b.c, f64);
  const px = a.n * a.h * a.w;
  for (let i = 0; i < px; i++) {
    y.data.set(a.data.subarray(i * a.c, (i + 1) * a.c) as never, i * y.c);
    y.data.set(b.data.subarray(i * b.c, (i + 1) * b.c) as never, i * y.c + a.c);
  }
  const backward = (dy: Tensor4) => {
    const da = like(a);
    const db = like(b);
    for (let i = 0; i < px; i++) {
      for (let ch = 0; ch < a.c; ch++) da.data[i * a.c + ch] = dy.data[i * y.c + ch];
      for (let ch = 0; ch < b.c; ch++) db.data[i * b.c + ch] = dy.data[i * y.c + a.c + ch];
    }
    return { da, db };
  };
  return { y, backward };
}

export function sigmoidInPlace(x: FloatArray): void {
  for (let i = 0; i < x.length; i++) {
    const z = x[i];
    x[i] = z >= 0 ? 1 / (1 + Math.exp(-z)) : Math.exp(z) / (1 + Math.exp(z));
  }
}
