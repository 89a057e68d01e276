/**
 * Adam training loop for the dual-head network (lr 1e-4 by default,
 * matching the composite-loss setup it was designed for).  Meant for
 * small demonstrations and tests; large backbones are out of scope.
 */

import { compositeLossBackward, LossValues } from "./loss";
import { DualHeadNet } from "./model";
import { Tensor } from "./tensor";

export interface Sample {
  image: Tensor; // [H, W, 3]
  label: number;
  mask: Tensor; // [H, W] or [H, W, 1], 0/1 values
}

export interface AdamOptions {
  lr: number;
  beta1: number;
  beta2: number;
  eps: number;
}

export const DEFAULT_ADAM: AdamOptions = { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 };

export class Adam {
  private m = new Map<string, Float64Array>();
  private v = new Map<string, Float64Array>();
  private t = 0;

  constructor(readonly options: AdamOptions = DEFAULT_ADAM) {}

  step(net: DualHeadNet, grads: { [name: string]: Tensor }): void {
    this.t += 1;
    const { lr, beta1, beta2, eps } = this.options;
    for (const param of net.params()) {
      const g = grads[param.name];
      if (!g) continue;
      let m = this.m.get(param.name);
      let v = this.v.get(param.name);
      if (!m) {
        m = new Float64Array(g.size);
        v = new Float64Array(g.size);
        this.m.set(param.name, m);
        this.v.set(param.name, v!);
      }
      for (let i = 0; i < g.size; i++) {
        m[i] = beta1 * m[i] + (1 - beta1) * g.data[i];
        v![i] = beta2 * v![i] + (1 - beta2) * g.data[i] * g.data[i];
        const mHat = m[i] / (1 - Math.pow(beta1, this.t));
        const vHat = v![i] / (1 - Math.pow(beta2, this.t));
        param.tensor.data[i] -= (lr * mHat) / (Math.sqrt(vHat) + eps);
      }
    }
  }
}

export function trainStep(
  net: DualHeadNet,
  batch: Sample[],
  optimizer: Adam,
  lambda: number,
  epsilon = 1e-6
): LossValues {
  const totals: LossValues = { total: 0, ce: 0, dice: 0 };
  const accumulated: { [name: string]: Tensor } = {};
  for (const sample of batch) {
    const result = net.forward(sample.image);
    const { loss, grads } = compositeLossBackward(
      net,
      result,
      sample.label,
      sample.mask,
      lambda,
      epsilon
    );
    totals.total += loss.total;
    totals.ce += loss.ce;
    totals.dice += loss.dice;
    for (const [name, g] of Object.entries(grads)) {
      const acc = accumulated[name];
      if (!acc) {
        accumulated[name] = g.clone();
      } else {
        for (let i = 0; i < g.size; i++) acc.data[i] += g.data[i];
      }
    }
  }
  const n = batch.length;
  for (const g of Object.values(accumulated)) {
    for (let i = 0; i < g.size; i++) g.data[i] /= n;
  }
  optimizer.step(net, accumulated);
  totals.total /= n;
  totals.ce /= n;
  totals.dice /= n;
  return totals;
}
