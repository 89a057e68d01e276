/**
 * Composite training loss: categorical cross-entropy over the
 * classification head plus lambda times a smoothed soft-Dice loss over
 * the segmentation head, with a full manual backward pass through the
 * network for training and gradient checking.
 */

import {
  bilinearResizeBackward,
  conv2dBackward,
  convTranspose2dBackward,
  denseBackward,
  globalAvgPoolBackward,
  reluBackward,
  sigmoidBackward,
} from "./layers";
import { DualHeadNet, ForwardResult } from "./model";
import { Tensor } from "./tensor";

export interface LossValues {
  total: number;
  ce: number;
  dice: number;
}

export function crossEntropy(probs: Tensor, label: number): number {
  return -Math.log(Math.max(probs.data[label], 1e-300));
}

/** Soft Dice loss 1 - (2*sum(p*g) + eps) / (sum(p) + sum(g) + eps). */
export function diceLoss(pred: Tensor, gt: Tensor, epsilon: number): number {
  let inter = 0;
  let sp = 0;
  let sg = 0;
  for (let i = 0; i < pred.data.length; i++) {
    inter += pred.data[i] * gt.data[i];
    sp += pred.data[i];
    sg += gt.data[i];
  }
  return 1 - (2 * inter + epsilon) / (sp + sg + epsilon);
}

export function diceLossBackward(pred: Tensor, gt: Tensor, epsilon: number): Tensor {
  let inter = 0;
  let sp = 0;
  let sg = 0;
  for (let i = 0; i < pred.data.length; i++) {
    inter += pred.data[i] * gt.data[i];
    sp += pred.data[i];
    sg += gt.data[i];
  }
  const denom = sp + sg + epsilon;
  const numer = 2 * inter + epsilon;
  const dPred = new Tensor(pred.shape);
  for (let i = 0; i < pred.data.length; i++) {
    dPred.data[i] = -(2 * gt.data[i] * denom - numer) / (denom * denom);
  }
  return dPred;
}

export function compositeLoss(
  result: ForwardResult,
  label: number,
  gtMask: Tensor,
  lambda: number,
  epsilon: number
): LossValues {
  if (lambda < 0) throw new Error("lambda must be >= 0");
  if (result.mask.size !== gtMask.size) {
    throw new Error(
      `mask shape mismatch: prediction ${result.mask.shape} vs ground truth ${gtMask.shape}`
    );
  }
  const ce = crossEntropy(result.probs, label);
  const dice = diceLoss(result.mask, gtMask, epsilon);
  return { total: ce + lambda * dice, ce, dice };
}

export interface Gradients {
  [name: string]: Tensor;
}

/**
 * Full backward pass of the composite loss through both heads and the
 * shared encoder.  Returns the loss values and a gradient for every
 * parameter returned by net.params().
 */
export function compositeLossBackward(
  net: DualHeadNet,
  result: ForwardResult,
  label: number,
  gtMask: Tensor,
  lambda: number,
  epsilon: number
): { loss: LossValues; grads: Gradients } {
  const loss = compositeLoss(result, label, gtMask, lambda, epsilon);
  const c = result.caches;
  const grads: Gradients = {};

  // classification head: d(CE)/dlogits = probs - onehot
  const dLogits = result.probs.clone();
  dLogits.data[label] -= 1;
  const clf = denseBackward(dLogits, c.pooled, net.clfWeight);
  grads["clf.weight"] = clf.dWeight;
  grads["clf.bias"] = clf.dBias;
  const dActsClf = globalAvgPoolBackward(clf.dInput, c.acts.shape);

  // segmentation head
  let dActsSeg = Tensor.zeros(c.acts.shape);
  if (lambda > 0) {
    const dMask = diceLossBackward(result.mask, gtMask, epsilon);
    for (let i = 0; i < dMask.data.length; i++) dMask.data[i] *= lambda;
    const dSig = bilinearResizeBackward(dMask, c.maskSigmoid.shape[0], c.maskSigmoid.shape[1]);
    const dMaskLogits = sigmoidBackward(dSig, c.maskSigmoid);
    const outBack = conv2dBackward(dMaskLogits, c.outConv);
    grads["out.kernel"] = outBack.dKernel;
    grads["out.bias"] = outBack.dBias;
    let dZ = outBack.dInput;
    for (let i = net.decKernels.length - 1; i >= 0; i--) {
      const dPre = reluBackward(dZ, c.decPre[i]);
      const back = convTranspose2dBackward(dPre, c.decConvs[i]);
      grads[`dec${i}.kernel`] = back.dKernel;
      grads[`dec${i}.bias`] = back.dBias;
      dZ = back.dInput;
    }
    dActsSeg = dZ;
  } else {
    grads["out.kernel"] = Tensor.zeros(net.outKernel.shape);
    grads["out.bias"] = Tensor.zeros(net.outBias.shape);
    net.decKernels.forEach((k, i) => {
      grads[`dec${i}.kernel`] = Tensor.zeros(k.shape);
      grads[`dec${i}.bias`] = Tensor.zeros(net.decBiases[i].shape);
    });
  }

  // shared encoder: both heads contribute
  let dActs = Tensor.zeros(c.acts.shape);
  for (let i = 0; i < dActs.data.length; i++) {
    dActs.data[i] = dActsClf.data[i] + dActsSeg.data[i];
  }
  for (let i = net.encKernels.length - 1; i >= 0; i--) {
    const dPre = reluBackward(dActs, c.encPre[i]);
    const back = conv2dBackward(dPre, c.encConvs[i]);
    grads[`enc${i}.kernel`] = back.dKernel;
    grads[`enc${i}.bias`] = back.dBias;
    dActs = back.dInput;
  }

  return { loss, grads };
}
