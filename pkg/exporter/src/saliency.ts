/**
 * Class activation mapping over the shared encoder's last layer.
 *
 * Gradient isolation: every method here is routed exclusively through
 * the classification output (encoder activations + the GAP/dense head).
 * The segmentation head never participates, so its parameters cannot
 * contaminate the attribution maps.
 */

import { bilinearResize } from "./layers";
import { DualHeadNet } from "./model";
import { Tensor } from "./tensor";

export type SaliencyMethod = "GradCAM" | "GradCAMpp" | "ScoreCAM";

/**
 * d(logit_c) / d(acts[x, y, k]) for the GAP + dense classification head:
 * the dense weight W[k, c] spread uniformly over the pooled locations.
 */
export function classGradAtActs(net: DualHeadNet, acts: Tensor, classIdx: number): Tensor {
  const [h, w, c] = acts.shape;
  const numClasses = net.spec.numClasses;
  const grad = Tensor.zeros([h, w, c]);
  for (let k = 0; k < c; k++) {
    const g = net.clfWeight.data[k * numClasses + classIdx] / (h * w);
    for (let i = 0; i < h * w; i++) grad.data[i * c + k] = g;
  }
  return grad;
}

/** Min-max normalize to [0, 1]; a constant map becomes all zeros. */
export function normalize01(map: Tensor): Tensor {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of map.data) {
    lo = Math.min(lo, v);
    hi = Math.max(hi, v);
  }
  const out = new Tensor(map.shape);
  if (hi > lo) {
    for (let i = 0; i < map.data.length; i++) out.data[i] = (map.data[i] - lo) / (hi - lo);
  }
  return out;
}

function weightedCam(acts: Tensor, weights: Float64Array): Tensor {
  const [h, w, c] = acts.shape;
  const cam = Tensor.zeros([h, w, 1]);
  for (let i = 0; i < h * w; i++) {
    let acc = 0;
    for (let k = 0; k < c; k++) acc += weights[k] * acts.data[i * c + k];
    cam.data[i] = Math.max(acc, 0);
  }
  return cam;
}

function finalize(cam: Tensor, outH: number, outW: number): Tensor {
  // normalize first, then resize: bilinear interpolation of [0, 1]
  // values stays in [0, 1], and a constant map is exactly zero before
  // resampling can introduce float jitter
  return bilinearResize(normalize01(cam), outH, outW);
}

export function gradCam(net: DualHeadNet, image: Tensor, classIdx: number): Tensor {
  const [h, w] = image.shape;
  const { acts } = net.classify(image);
  const grad = classGradAtActs(net, acts, classIdx);
  const [ah, aw, c] = acts.shape;
  const weights = new Float64Array(c);
  for (let k = 0; k < c; k++) {
    let sum = 0;
    for (let i = 0; i < ah * aw; i++) sum += grad.data[i * c + k];
    weights[k] = sum / (ah * aw);
  }
  return finalize(weightedCam(acts, weights), h, w);
}

export function gradCamPP(net: DualHeadNet, image: Tensor, classIdx: number): Tensor {
  const [h, w] = image.shape;
  const { acts } = net.classify(image);
  const grad = classGradAtActs(net, acts, classIdx);
  const [ah, aw, c] = acts.shape;
  const weights = new Float64Array(c);
  for (let k = 0; k < c; k++) {
    let actSum = 0;
    for (let i = 0; i < ah * aw; i++) actSum += acts.data[i * c + k];
    let wk = 0;
    for (let i = 0; i < ah * aw; i++) {
      const g = grad.data[i * c + k];
      const g2 = g * g;
      const denom = 2 * g2 + actSum * g2 * g;
      const alpha = denom !== 0 ? g2 / denom : 0;
      wk += alpha * Math.max(g, 0);
    }
    weights[k] = wk;
  }
  return finalize(weightedCam(acts, weights), h, w);
}

export function scoreCam(net: DualHeadNet, image: Tensor, classIdx: number): Tensor {
  const [h, w, cIn] = image.shape;
  const { acts } = net.classify(image);
  const [ah, aw, c] = acts.shape;
  const scores = new Float64Array(c);
  for (let k = 0; k < c; k++) {
    const channel = Tensor.zeros([ah, aw, 1]);
    for (let i = 0; i < ah * aw; i++) channel.data[i] = acts.data[i * c + k];
    const up = normalize01(bilinearResize(channel, h, w));
    const masked = Tensor.zeros(image.shape);
    for (let i = 0; i < h * w; i++) {
      for (let ci = 0; ci < cIn; ci++) {
        masked.data[i * cIn + ci] = image.data[i * cIn + ci] * up.data[i];
      }
    }
    scores[k] = net.classify(masked).probs.data[classIdx];
  }
  // softmax over channel scores
  let max = -Infinity;
  for (const s of scores) max = Math.max(max, s);
  let sum = 0;
  const weights = new Float64Array(c);
  for (let k = 0; k < c; k++) {
    weights[k] = Math.exp(scores[k] - max);
    sum += weights[k];
  }
  for (let k = 0; k < c; k++) weights[k] /= sum;
  return finalize(weightedCam(acts, weights), h, w);
}

export function saliency(
  net: DualHeadNet,
  image: Tensor,
  method: SaliencyMethod,
  classIdx: number
): Tensor {
  switch (method) {
    case "GradCAM":
      return gradCam(net, image, classIdx);
    case "GradCAMpp":
      return gradCamPP(net, image, classIdx);
    case "ScoreCAM":
      return scoreCam(net, image, classIdx);
    default:
      throw new Error(`unknown saliency method ${method}`);
  }
}
