/** Adam with bias correction, state kept per named parameter. */
import { FloatArray } from "./ops";
import { ParamSet } from "./unet";

export interface AdamConfig {
  learningRate: number;
  beta1: number;
  beta2: number;
  eps: number;
}

export const ADAM_DEFAULTS: AdamConfig = {
  learningRate: 0.01,
  beta1: 0.9,
  beta2: 0.999,
  eps: 1e-8,
};

export class Adam {
  private m: Map<string, Float64Array> = new Map();
  private v: Map<string, Float64Array> = new Map();
  private t = 0;

  constructor(private config: AdamConfig = ADAM_DEFAULTS) {}

  step(params: ParamSet, grads: ParamSet): void {
    this.t += 1;
    const { learningRate, beta1, beta2, eps } = this.config;
    const c1 = 1 - Math.pow(beta1, this.t);
    const c2 = 1 - Math.pow(beta2, this.t);
    for (const name of Object.keys(params)) {
      const g = grads[name];
      if (!g) continue;
      const p = params[name] as FloatArray;
      let m = this.m.get(name);
      let v = this.v.get(name);
      if (!m) {
        m = new Float64Array(p.length);
        v = new Float64Array(p.length);
        this.m.set(name, m);
        this.v.set(name, v!);
      }
      const vv = v!;
      for (let i = 0; i < p.length; i++) {
        const gi = g[i];
        m[i] = beta1 * m[i] + (1 - beta1) * gi;
        vv[i] = beta2 * vv[i] + (1 - beta2) * gi * gi;
        const mHat = m[i] / c1;
        const vHat = vv[i] / c2;
        p[i] -= learningRate * (mHat / (Math.sqrt(vHat) + eps));
      }
    }
  }
}
